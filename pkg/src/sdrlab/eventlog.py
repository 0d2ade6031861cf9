"""Append-only JSON-lines event log with snapshot support.

One JSON object per line: {"seq": n, "t": seconds, "kind": str,
"payload": {...}}.  Appends are flushed and fsynced so a crash loses at
most the torn final line; scan() reports such a tail as a RecoveryError
carrying the byte offset where the good prefix ends, and repair()
truncates there.  A snapshot file holds derived state plus the seq it
covers, so replay = load snapshot + apply the log tail.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterator, Optional

from .errors import RecoveryError


class EventLog:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._seq = self._last_seq()

    def _last_seq(self) -> int:
        if not self.path.exists():
            return 0
        last = 0
        for ev in self.scan():
            last = ev["seq"]
        return last

    @property
    def next_seq(self) -> int:
        return self._seq + 1

    def append(self, kind: str, payload: dict[str, Any], t: float) -> dict[str, Any]:
        self._seq += 1
        event = {"seq": self._seq, "t": t, "kind": kind, "payload": payload}
        line = json.dumps(event, separators=(",", ":"), sort_keys=True) + "\n"
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        return event

    def scan(self, from_seq: int = 0) -> Iterator[dict[str, Any]]:
        """Yield events with seq > from_seq.  Raises RecoveryError with
        the byte offset of the first bad line when the tail is corrupt."""
        if not self.path.exists():
            return
        offset = 0
        with open(self.path, "rb") as fh:
            for raw in fh:
                try:
                    ev = json.loads(raw.decode("utf-8"))
                    if not isinstance(ev, dict) or "seq" not in ev or "kind" not in ev:
                        raise ValueError("missing required keys")
                except (ValueError, UnicodeDecodeError) as exc:
                    raise RecoveryError(offset, f"corrupt event at byte {offset}: {exc}") from exc
                offset += len(raw)
                if ev["seq"] > from_seq:
                    yield ev

    def repair(self) -> int:
        """Truncate a corrupt tail in place; returns events kept."""
        kept = []
        try:
            for ev in self.scan():
                kept.append(ev)
        except RecoveryError as err:
            with open(self.path, "rb+") as fh:
                fh.truncate(err.offset)
        self._seq = kept[-1]["seq"] if kept else 0
        return len(kept)


def write_snapshot(path: str | Path, state: dict[str, Any], covers_seq: int) -> None:
    doc = {"covers_seq": covers_seq, "state": state}
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1, sort_keys=True))
    os.replace(tmp, path)


def read_snapshot(path: str | Path) -> Optional[tuple[dict[str, Any], int]]:
    p = Path(path)
    if not p.exists():
        return None
    try:
        doc = json.loads(p.read_text())
        return doc["state"], int(doc["covers_seq"])
    except (ValueError, KeyError) as exc:
        raise RecoveryError(0, f"snapshot unreadable: {exc}") from exc
