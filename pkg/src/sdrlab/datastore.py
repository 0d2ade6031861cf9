"""Measurement archives: append-only experiment records plus the
configuration snapshot they were taken under.

On-disk layout, one directory per experiment:

    <root>/exp-0001/records.tsv    tab-delimited, one record per line
    <root>/exp-0001/snapshot.json  ConfigSnapshot, canonical JSON
    <root>/exp-0001/seal.json      present once sealed; holds the digest

Record columns, in order: t_utc, node_id, location, freq_hz,
azimuth_deg, value_dbm.  Floats are serialized with repr() so parsing
returns bit-identical values.  The location column holds either
"x,y,z" (three comma-separated floats) or a free-text floorplan label;
labels that would parse as three floats are rejected at append time so
the encoding stays unambiguous.

Each append is flushed and fsynced before returning, so an
acknowledged record survives a crash.  A torn final line (the one
write that was never acknowledged) is dropped on reopen; corruption
anywhere else raises ParseError.

The seal digest is SHA-256 over the record file bytes followed by the
canonical snapshot JSON.  It is stable across reopens and versions.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

from .errors import (
    NotFoundError,
    OrderError,
    ParseError,
    SealedError,
    StateError,
    ValidationError,
)
from .reservation import Reservation, ReservationState

Location = Union[tuple[float, float, float], str]

_EXP_DIR = re.compile(r"^exp-(\d{4,})$")


def document_digest(text: Union[str, bytes]) -> str:
    """SHA-256 hex of a configuration document; used to fill the
    recomputable hash fields of ConfigSnapshot."""
    data = text.encode("utf-8") if isinstance(text, str) else text
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class ExperimentRecord:
    t_utc: float
    node_id: str
    location: Location
    freq_hz: float
    azimuth_deg: float
    value_dbm: float

    def __post_init__(self):
        if not math.isfinite(self.t_utc):
            raise ValidationError("t_utc", "must be finite")
        if "\t" in self.node_id or "\n" in self.node_id or not self.node_id:
            raise ValidationError("node_id", "must be non-empty without tabs or newlines")
        if not (self.freq_hz > 0 and math.isfinite(self.freq_hz)):
            raise ValidationError("freq_hz", "must be finite and > 0")
        if not (0.0 <= self.azimuth_deg < 360.0):
            raise ValidationError("azimuth_deg", "must lie in [0, 360)")
        if not math.isfinite(self.value_dbm):
            raise ValidationError("value_dbm", "must be finite")
        if isinstance(self.location, str):
            if "\t" in self.location or "\n" in self.location:
                raise ValidationError("location", "label may not contain tabs or newlines")
            if _parse_xyz(self.location) is not None:
                raise ValidationError(
                    "location", "label collides with the x,y,z encoding"
                )
        else:
            try:
                x, y, z = (float(v) for v in self.location)
            except (TypeError, ValueError) as exc:
                raise ValidationError("location", "need (x, y, z) or a label") from exc
            if not all(math.isfinite(v) for v in (x, y, z)):
                raise ValidationError("location", "coordinates must be finite")
            object.__setattr__(self, "location", (x, y, z))


@dataclass(frozen=True)
class ConfigSnapshot:
    inventory_hash: str
    reservation_id: str
    scenario_hash: str
    software: tuple[str, ...] = ()
    sample_formats: tuple[str, ...] = ()
    created_utc: float = 0.0

    def canonical_json(self) -> str:
        doc = {
            "inventory_hash": self.inventory_hash,
            "reservation_id": self.reservation_id,
            "scenario_hash": self.scenario_hash,
            "software": list(self.software),
            "sample_formats": list(self.sample_formats),
            "created_utc": self.created_utc,
        }
        return json.dumps(doc, separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ConfigSnapshot":
        doc = json.loads(text)
        return cls(
            inventory_hash=doc["inventory_hash"],
            reservation_id=doc["reservation_id"],
            scenario_hash=doc["scenario_hash"],
            software=tuple(doc.get("software", ())),
            sample_formats=tuple(doc.get("sample_formats", ())),
            created_utc=doc.get("created_utc", 0.0),
        )


def _parse_xyz(text: str) -> Optional[tuple[float, float, float]]:
    parts = text.split(",")
    if len(parts) != 3:
        return None
    try:
        x, y, z = (float(p) for p in parts)
    except ValueError:
        return None
    return (x, y, z)


def _format_location(loc: Location) -> str:
    if isinstance(loc, str):
        return loc
    x, y, z = loc
    return f"{x!r},{y!r},{z!r}"


def _format_record(rec: ExperimentRecord) -> str:
    return "\t".join(
        (
            repr(rec.t_utc),
            rec.node_id,
            _format_location(rec.location),
            repr(rec.freq_hz),
            repr(rec.azimuth_deg),
            repr(rec.value_dbm),
        )
    ) + "\n"


def _parse_record(line: str) -> ExperimentRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 6:
        raise ParseError(f"expected 6 tab-separated fields, got {len(parts)}")
    t, node, loc_text, freq, az, val = parts
    loc: Location = _parse_xyz(loc_text) or loc_text
    try:
        return ExperimentRecord(
            t_utc=float(t),
            node_id=node,
            location=loc,
            freq_hz=float(freq),
            azimuth_deg=float(az),
            value_dbm=float(val),
        )
    except (ValueError, ValidationError) as exc:
        raise ParseError(f"bad record line: {exc}") from exc


class ExperimentArchive:
    """Single-writer record log for one experiment."""

    def __init__(self, directory: Path, experiment_id: str, snapshot: ConfigSnapshot):
        self.dir = directory
        self.experiment_id = experiment_id
        self.snapshot = snapshot
        self.records: list[ExperimentRecord] = []
        self._last_t: dict[str, float] = {}
        self._digest: Optional[str] = None

    @property
    def sealed(self) -> bool:
        return self._digest is not None

    @property
    def digest(self) -> Optional[str]:
        return self._digest

    @property
    def _records_path(self) -> Path:
        return self.dir / "records.tsv"

    @property
    def _seal_path(self) -> Path:
        return self.dir / "seal.json"

    def append(self, rec: ExperimentRecord) -> None:
        if self.sealed:
            raise SealedError(f"{self.experiment_id} is sealed")
        last = self._last_t.get(rec.node_id)
        if last is not None and rec.t_utc < last:
            raise OrderError(
                f"{rec.node_id}: t_utc {rec.t_utc!r} precedes the node's last record {last!r}"
            )
        line = _format_record(rec)
        with open(self._records_path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        self.records.append(rec)
        self._last_t[rec.node_id] = rec.t_utc

    def query(
        self,
        t_min: Optional[float] = None,
        t_max: Optional[float] = None,
        node_id: Optional[str] = None,
        freq_min: Optional[float] = None,
        freq_max: Optional[float] = None,
        az_min: Optional[float] = None,
        az_max: Optional[float] = None,
    ) -> list[ExperimentRecord]:
        """Records matching every supplied bound (all inclusive),
        ordered by t_utc then node_id; ties keep append order."""
        out = []
        for r in self.records:
            if t_min is not None and r.t_utc < t_min:
                continue
            if t_max is not None and r.t_utc > t_max:
                continue
            if node_id is not None and r.node_id != node_id:
                continue
            if freq_min is not None and r.freq_hz < freq_min:
                continue
            if freq_max is not None and r.freq_hz > freq_max:
                continue
            if az_min is not None and r.azimuth_deg < az_min:
                continue
            if az_max is not None and r.azimuth_deg > az_max:
                continue
            out.append(r)
        return sorted(out, key=lambda r: (r.t_utc, r.node_id))

    def seal(self) -> str:
        if self.sealed:
            raise SealedError(f"{self.experiment_id} already sealed")
        digest = self._compute_digest()
        self._seal_path.write_text(
            json.dumps({"digest": digest}, separators=(",", ":")) + "\n"
        )
        self._digest = digest
        return digest

    def _compute_digest(self) -> str:
        h = hashlib.sha256()
        if self._records_path.exists():
            h.update(self._records_path.read_bytes())
        h.update(self.snapshot.canonical_json().encode("utf-8"))
        return h.hexdigest()

    # -- recovery --

    def _load(self) -> None:
        path = self._records_path
        if not path.exists():
            return
        raw = path.read_bytes()
        chunks = raw.split(b"\n")
        tail = chunks.pop()  # bytes after the final newline; non-empty means torn
        good_bytes = 0
        for i, chunk in enumerate(chunks):
            last_complete_line = i == len(chunks) - 1 and not tail
            try:
                rec = _parse_record(chunk.decode("utf-8"))
            except (ParseError, UnicodeDecodeError) as exc:
                if last_complete_line:
                    break  # torn, unacknowledged write; drop it below
                raise ParseError(
                    f"corrupt record at byte {good_bytes}: {exc}"
                ) from exc
            self.records.append(rec)
            self._last_t[rec.node_id] = rec.t_utc
            good_bytes += len(chunk) + 1
        if good_bytes < len(raw):
            with open(path, "rb+") as fh:
                fh.truncate(good_bytes)
        if self._seal_path.exists():
            try:
                self._digest = json.loads(self._seal_path.read_text())["digest"]
            except (ValueError, KeyError) as exc:
                raise ParseError(f"seal file unreadable: {exc}") from exc


class DataStore:
    """All experiment archives under one root directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.archives: dict[str, ExperimentArchive] = {}
        self._counter = 0
        for entry in sorted(self.root.iterdir()):
            m = _EXP_DIR.match(entry.name)
            if not m or not entry.is_dir():
                continue
            snap_path = entry / "snapshot.json"
            try:
                snapshot = ConfigSnapshot.from_json(snap_path.read_text())
            except (OSError, ValueError, KeyError) as exc:
                raise ParseError(f"{entry.name}: snapshot unreadable: {exc}") from exc
            archive = ExperimentArchive(entry, entry.name, snapshot)
            archive._load()
            self.archives[entry.name] = archive
            self._counter = max(self._counter, int(m.group(1)))

    def open_experiment(
        self, reservation: Reservation, snapshot: ConfigSnapshot
    ) -> ExperimentArchive:
        if reservation.state is not ReservationState.ACTIVE:
            raise StateError(
                f"{reservation.id}: experiments open only while Active, "
                f"is {reservation.state.value}"
            )
        self._counter += 1
        exp_id = f"exp-{self._counter:04d}"
        directory = self.root / exp_id
        directory.mkdir()
        (directory / "snapshot.json").write_text(snapshot.canonical_json() + "\n")
        archive = ExperimentArchive(directory, exp_id, snapshot)
        self.archives[exp_id] = archive
        return archive

    def archive(self, experiment_id: str) -> ExperimentArchive:
        if experiment_id not in self.archives:
            raise NotFoundError(f"unknown experiment {experiment_id!r}")
        return self.archives[experiment_id]

    def list_experiments(self) -> list[str]:
        return sorted(self.archives)
