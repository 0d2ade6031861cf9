"""IQ capture files.

Layout: 4-byte magic ``IQF1``, a little-endian uint32 header length, a
JSON header (rate_sps, format, length, start_phase, free-form metadata),
then interleaved I/Q values, little-endian.  float64 payloads round-trip
bit-exactly; SC16/SC8 are scaled to full-scale 1.0 and quantized.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .blocks import SampleFormat
from .errors import ParseError, ValidationError
from .spectrum import IqBuffer

_MAGIC = b"IQF1"

_SCALE = {SampleFormat.SC16: 32767.0, SampleFormat.SC8: 127.0}
_INT_DTYPE = {SampleFormat.SC16: "<i2", SampleFormat.SC8: "<i1"}


def write_iq(
    path: str | Path,
    buf: IqBuffer,
    fmt: SampleFormat = SampleFormat.FLOAT64,
    metadata: Optional[dict[str, Any]] = None,
) -> None:
    interleaved = np.empty(2 * len(buf.samples), dtype=np.float64)
    interleaved[0::2] = buf.samples.real
    interleaved[1::2] = buf.samples.imag
    if fmt is SampleFormat.FLOAT64:
        payload = interleaved.astype("<f8").tobytes()
    elif fmt in _SCALE:
        scale = _SCALE[fmt]
        clipped = np.clip(np.round(interleaved * scale), -scale - 1, scale)
        payload = clipped.astype(_INT_DTYPE[fmt]).tobytes()
    else:
        raise ValidationError("fmt", f"unsupported sample format {fmt}")
    header = {
        "rate_sps": buf.rate_sps,
        "format": fmt.value,
        "length": len(buf.samples),
        "start_phase": buf.start_phase,
        "metadata": metadata or {},
    }
    head = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(payload)


def read_iq(path: str | Path) -> tuple[IqBuffer, dict[str, Any]]:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != _MAGIC:
        raise ParseError(f"{path}: not an IQ capture file")
    (head_len,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + head_len:
        raise ParseError(f"{path}: truncated header")
    try:
        header = json.loads(raw[8 : 8 + head_len].decode("utf-8"))
        fmt = SampleFormat(header["format"])
        n = int(header["length"])
        rate = float(header["rate_sps"])
        phase = float(header.get("start_phase", 0.0))
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: bad header: {exc}") from exc
    body = raw[8 + head_len :]
    if fmt is SampleFormat.FLOAT64:
        expect = 16 * n
        if len(body) < expect:
            raise ParseError(f"{path}: payload shorter than declared length")
        interleaved = np.frombuffer(body[:expect], dtype="<f8")
    else:
        itemsize = np.dtype(_INT_DTYPE[fmt]).itemsize
        expect = 2 * itemsize * n
        if len(body) < expect:
            raise ParseError(f"{path}: payload shorter than declared length")
        ints = np.frombuffer(body[:expect], dtype=_INT_DTYPE[fmt])
        interleaved = ints.astype(np.float64) / _SCALE[fmt]
    samples = interleaved[0::2] + 1j * interleaved[1::2]
    return IqBuffer(samples, rate, start_phase=phase), header.get("metadata", {})
