import json

import pytest

from sdrlab.errors import RecoveryError
from sdrlab.eventlog import EventLog, read_snapshot, write_snapshot


def test_append_assigns_increasing_seq(tmp_path):
    log = EventLog(tmp_path / "events.jsonl")
    e1 = log.append("a", {"x": 1}, 10.0)
    e2 = log.append("b", {"x": 2}, 11.0)
    assert (e1["seq"], e2["seq"]) == (1, 2)
    got = list(log.scan())
    assert [ev["kind"] for ev in got] == ["a", "b"]
    assert got[0]["payload"] == {"x": 1}


def test_scan_from_seq_skips_prefix(tmp_path):
    log = EventLog(tmp_path / "events.jsonl")
    for i in range(5):
        log.append("tick", {"i": i}, float(i))
    assert [ev["seq"] for ev in log.scan(from_seq=3)] == [4, 5]


def test_reopen_continues_sequence(tmp_path):
    path = tmp_path / "events.jsonl"
    EventLog(path).append("a", {}, 0.0)
    log2 = EventLog(path)
    ev = log2.append("b", {}, 1.0)
    assert ev["seq"] == 2


def test_same_appends_give_identical_bytes(tmp_path):
    # replayability depends on the serialization being canonical
    pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for p in (pa, pb):
        log = EventLog(p)
        log.append("k", {"z": 1, "a": [1, 2]}, 5.0)
        log.append("k", {"a": None}, 6.0)
    assert pa.read_bytes() == pb.read_bytes()


def test_torn_tail_raises_recovery_error_with_offset(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog(path)
    log.append("a", {}, 0.0)
    log.append("b", {}, 1.0)
    good_size = path.stat().st_size
    with open(path, "a") as fh:
        fh.write('{"seq": 3, "t": 2.0, "kind": "c", "pay')  # crash mid-write
    with pytest.raises(RecoveryError) as err:
        list(EventLog(path).scan())
    assert err.value.offset == good_size


def test_non_json_garbage_tail_detected(tmp_path):
    path = tmp_path / "events.jsonl"
    EventLog(path).append("a", {}, 0.0)
    with open(path, "ab") as fh:
        fh.write(b"\x00\xff\xfe garbage\n")
    with pytest.raises(RecoveryError):
        list(EventLog(path).scan())


def test_valid_json_missing_keys_is_corrupt(tmp_path):
    path = tmp_path / "events.jsonl"
    EventLog(path).append("a", {}, 0.0)
    with open(path, "a") as fh:
        fh.write(json.dumps({"not": "an event"}) + "\n")
    with pytest.raises(RecoveryError):
        list(EventLog(path).scan())


def test_repair_truncates_and_resumes(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog(path)
    log.append("a", {}, 0.0)
    log.append("b", {}, 1.0)
    with open(path, "a") as fh:
        fh.write('{"broken')
    fresh = EventLog.__new__(EventLog)  # avoid scanning in __init__
    fresh.path = path
    fresh._seq = 0
    kept = fresh.repair()
    assert kept == 2
    ev = fresh.append("c", {}, 2.0)
    assert ev["seq"] == 3
    assert [e["kind"] for e in fresh.scan()] == ["a", "b", "c"]


def test_repair_on_clean_log_is_noop(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog(path)
    log.append("a", {}, 0.0)
    before = path.read_bytes()
    assert log.repair() == 1
    assert path.read_bytes() == before


def test_snapshot_roundtrip(tmp_path):
    path = tmp_path / "snap.json"
    state = {"reservations": [{"id": "res-0001"}], "id_counter": 2}
    write_snapshot(path, state, covers_seq=17)
    got_state, covers = read_snapshot(path)
    assert got_state == state
    assert covers == 17
    assert not (tmp_path / "snap.json.tmp").exists()


def test_snapshot_missing_returns_none(tmp_path):
    assert read_snapshot(tmp_path / "nope.json") is None


def test_snapshot_garbage_raises(tmp_path):
    path = tmp_path / "snap.json"
    path.write_text("{{{{")
    with pytest.raises(RecoveryError):
        read_snapshot(path)


def test_empty_file_scans_empty(tmp_path):
    path = tmp_path / "events.jsonl"
    path.touch()
    assert list(EventLog(path).scan()) == []
