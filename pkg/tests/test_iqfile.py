import numpy as np
import pytest

from sdrlab.blocks import SampleFormat
from sdrlab.errors import ParseError
from sdrlab.iqfile import read_iq, write_iq
from sdrlab.spectrum import IqBuffer


def random_buffer(n=257, seed=1):
    """Components drawn inside full scale so integer formats never clip."""
    rng = np.random.default_rng(seed)
    samples = rng.uniform(-0.99, 0.99, n) + 1j * rng.uniform(-0.99, 0.99, n)
    return IqBuffer(samples, rate_sps=12.5e6, start_phase=1.234)


def test_float64_roundtrip_bit_exact(tmp_path):
    buf = random_buffer()
    path = tmp_path / "cap.iq"
    write_iq(path, buf, SampleFormat.FLOAT64, metadata={"origin": "unit", "run": 3})
    back, meta = read_iq(path)
    np.testing.assert_array_equal(back.samples, buf.samples)
    assert back.rate_sps == buf.rate_sps
    assert back.start_phase == buf.start_phase
    assert meta == {"origin": "unit", "run": 3}


def test_sc16_quantization_bounded(tmp_path):
    buf = random_buffer(seed=2)
    path = tmp_path / "cap16.iq"
    write_iq(path, buf, SampleFormat.SC16)
    back, _ = read_iq(path)
    err = np.abs(back.samples - buf.samples)
    # rounding error per component is half an LSB at full scale 32767
    assert np.max(err) <= 1.0 / 32767


def test_sc8_quantization_bounded(tmp_path):
    buf = random_buffer(seed=3)
    path = tmp_path / "cap8.iq"
    write_iq(path, buf, SampleFormat.SC8)
    back, _ = read_iq(path)
    assert np.max(np.abs(back.samples - buf.samples)) <= 1.0 / 127


def test_sc16_clips_overrange(tmp_path):
    buf = IqBuffer(np.array([3.0 + 0j, -3.0 + 0j]), 1e6)
    path = tmp_path / "clip.iq"
    write_iq(path, buf, SampleFormat.SC16)
    back, _ = read_iq(path)
    assert back.samples[0].real == pytest.approx(1.0, abs=1e-4)
    assert back.samples[1].real == pytest.approx(-1.0, abs=1e-3)


def test_empty_buffer_roundtrip(tmp_path):
    buf = IqBuffer(np.array([], dtype=complex), 1e6)
    path = tmp_path / "empty.iq"
    write_iq(path, buf)
    back, _ = read_iq(path)
    assert len(back.samples) == 0


def test_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.iq"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ParseError):
        read_iq(path)


def test_rejects_truncated_payload(tmp_path):
    buf = random_buffer(n=64)
    path = tmp_path / "trunc.iq"
    write_iq(path, buf, SampleFormat.FLOAT64)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 100])
    with pytest.raises(ParseError):
        read_iq(path)


def test_rejects_garbage_header(tmp_path):
    path = tmp_path / "hdr.iq"
    head = b"{not json"
    path.write_bytes(b"IQF1" + len(head).to_bytes(4, "little") + head)
    with pytest.raises(ParseError):
        read_iq(path)
