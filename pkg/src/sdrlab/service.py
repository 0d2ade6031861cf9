"""Single-writer orchestrator tying the scheduler, allocator pool,
measurement store, and channel emulator together behind one lock.

The HTTP gateway and CLI both talk to this class, so domain behavior
is identical on either surface.  State lives under one directory:

    <state_dir>/events.jsonl     scheduler event log (source of truth)
    <state_dir>/snapshot.json    optional scheduler snapshot
    <state_dir>/scenario.yaml    current channel scenario, verbatim
    <state_dir>/experiments/     measurement archives

Construction replays the log, so a restart reproduces the calendar
exactly; a corrupt log tail raises RecoveryError naming the byte
offset (pass repair=True to truncate it instead).

Node status events are emitted when allocations bind and release:
each device's host node goes Active with the owning reservation, then
back to Idle.  Event ids increase monotonically and a bounded replay
buffer supports resume-by-last-id.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from .allocator import AllocatorPool, slot_rate_for
from .blocks import SpectrumBlock, SpectrumSlot
from .channel import ChannelScenario, load_scenario, run_timeline
from .datastore import ConfigSnapshot, DataStore, ExperimentRecord, document_digest
from .errors import SpecError, StateError
from .eventlog import EventLog
from .inventory import Inventory, capacity_summary
from .reservation import (
    TERMINAL_STATES,
    ReservationState,
    Window,
    reservation_to_dict,
    spec_from_dict,
)
from .scheduler import Scheduler
from .spectrum import IqBuffer, aggregate, disaggregate, tone


class NodeState(str, Enum):
    IDLE = "Idle"
    RESERVED = "Reserved"
    ACTIVE = "Active"
    FAULT = "Fault"


@dataclass(frozen=True)
class NodeStatusEvent:
    event_id: int
    node_id: str
    state: NodeState
    t_utc: float
    owner: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "node_id": self.node_id,
            "state": self.state.value,
            "t_utc": self.t_utc,
            "owner": self.owner,
        }


EVENT_BUFFER = 1024


class Orchestrator:
    def __init__(
        self,
        inv: Inventory,
        state_dir: str | Path,
        *,
        clock: Callable[[], float] = time.time,
        inventory_text: Optional[str] = None,
        repair: bool = False,
    ):
        self.inv = inv
        self.clock = clock
        self.lock = threading.RLock()
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.inventory_text = inventory_text

        log_path = self.state_dir / "events.jsonl"
        snap_path = self.state_dir / "snapshot.json"
        if log_path.exists():
            if repair:
                # Constructor scans the log and would raise on a torn tail,
                # so truncate through a bare instance first.
                log = EventLog.__new__(EventLog)
                log.path = log_path
                log._seq = 0
                log.repair()
            self.sched = Scheduler.replay(
                inv,
                log_path,
                snapshot_path=snap_path if snap_path.exists() else None,
                clock=clock,
            )
        else:
            self.sched = Scheduler(inv, log_path=log_path, clock=clock)

        self.store = DataStore(self.state_dir / "experiments")

        self.scenario_text: Optional[str] = None
        self.scenario: Optional[ChannelScenario] = None
        scenario_path = self.state_dir / "scenario.yaml"
        if scenario_path.exists():
            text = scenario_path.read_text()
            self.scenario = load_scenario(text)
            self.scenario_text = text

        self._event_seq = 0
        self._node_last_t: dict[str, float] = {}
        self.node_events: list[NodeStatusEvent] = []
        self.subscribers: list[Callable[[NodeStatusEvent], None]] = []

    # ------------------------------------------------------------ node events

    def _emit(self, node_id: str, state: NodeState, owner: Optional[str]) -> None:
        t = self.clock()
        last = self._node_last_t.get(node_id)
        if last is not None and t <= last:
            t = math.nextafter(last, math.inf)
        self._node_last_t[node_id] = t
        self._event_seq += 1
        ev = NodeStatusEvent(self._event_seq, node_id, state, t, owner)
        self.node_events.append(ev)
        if len(self.node_events) > EVENT_BUFFER:
            del self.node_events[: len(self.node_events) - EVENT_BUFFER]
        for cb in list(self.subscribers):
            cb(ev)

    def events_since(self, last_id: int) -> list[NodeStatusEvent]:
        return [ev for ev in self.node_events if ev.event_id > last_id]

    def _allocation_nodes(self, res_id: str) -> list[str]:
        alloc = self.sched.pool.allocation(res_id)
        if alloc is None:
            return []
        nodes: list[str] = []
        by_id = {d.id: d for d in self.inv.sdr_devices}
        for dev in alloc.devices:
            node = by_id[dev].node_id
            if node not in nodes:
                nodes.append(node)
        for vm in alloc.vm_placements:
            if vm.compute_node_id not in nodes:
                nodes.append(vm.compute_node_id)
        return nodes

    # ------------------------------------------------------------- inventory

    def inventory_dict(self) -> dict:
        inv = self.inv
        return {
            "sdr_devices": [
                {
                    "id": d.id,
                    "node_id": d.node_id,
                    "attachment": d.attachment.value,
                    "daughterboards": d.daughterboards,
                    "max_center_freq_hz": d.max_center_freq_hz,
                    "max_instant_bw_hz": d.max_instant_bw_hz,
                    "tx_chains": d.tx_chains,
                    "rx_chains": d.rx_chains,
                }
                for d in inv.sdr_devices
            ],
            "compute_nodes": [
                {
                    "id": n.id,
                    "cores": n.cores,
                    "clock_ghz": n.clock_ghz,
                    "ram_gb": n.ram_gb,
                    "ram_max_gb": n.ram_max_gb,
                    "storage_gb": n.storage_gb,
                }
                for n in inv.compute_nodes
            ],
            "fabric": {
                "ports": inv.fabric.ports,
                "port_rate_bps": inv.fabric.port_rate_bps,
                "base_latency_ns": inv.fabric.base_latency_ns,
                "capacity_bps": inv.fabric.capacity_bps,
            },
            "licensed_bands": [
                {"low_hz": b.low_hz, "high_hz": b.high_hz, "label": b.label}
                for b in inv.licensed_bands
            ],
            "software_catalog": list(inv.software_catalog),
        }

    def capacity_dict(self) -> dict:
        return capacity_summary(self.inv).to_dict()

    # ----------------------------------------------------------- reservations

    def request(self, user: str, body: dict) -> dict:
        try:
            window = Window(float(body["start_utc"]), float(body["end_utc"]))
        except KeyError as exc:
            raise SpecError("window", f"missing {exc.args[0]}") from exc
        except (TypeError, ValueError) as exc:
            raise SpecError("window", "start_utc and end_utc must be numbers") from exc
        try:
            spec = spec_from_dict(body.get("spec", {}))
        except SpecError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError("spec", f"malformed resource spec: {exc}") from exc
        with self.lock:
            res = self.sched.request_reservation(user, window, spec)
            return reservation_to_dict(res)

    def evaluate(self, res_id: str) -> dict:
        with self.lock:
            res = self.sched.evaluate_admission(res_id)
            return reservation_to_dict(res)

    def review(self, res_id: str, admin: str, approve: bool) -> dict:
        with self.lock:
            res = self.sched.review_decision(res_id, admin, approve)
            return reservation_to_dict(res)

    def activate(self, res_id: str) -> dict:
        with self.lock:
            res = self.sched.activate(res_id)
            for node in self._allocation_nodes(res_id):
                self._emit(node, NodeState.ACTIVE, res_id)
            return reservation_to_dict(res)

    def complete(self, res_id: str) -> dict:
        with self.lock:
            nodes = self._allocation_nodes(res_id)
            res, _ = self.sched.complete(res_id)
            for node in nodes:
                self._emit(node, NodeState.IDLE, None)
            return reservation_to_dict(res)

    def cancel(self, res_id: str, actor: str) -> dict:
        with self.lock:
            nodes = self._allocation_nodes(res_id)
            res = self.sched.cancel(res_id, actor)
            for node in nodes:
                self._emit(node, NodeState.IDLE, None)
            return reservation_to_dict(res)

    def survey(self, res_id: str, responses: Iterable[str]) -> dict:
        with self.lock:
            form = self.sched.submit_survey(res_id, responses)
            return {
                "reservation_id": form.reservation_id,
                "questions": list(form.questions),
                "responses": list(form.responses or ()),
            }

    def reservation(self, res_id: str) -> dict:
        with self.lock:
            return reservation_to_dict(self.sched.get(res_id))

    def schedule(self, from_utc: Optional[float], to_utc: Optional[float]) -> list[dict]:
        with self.lock:
            if from_utc is None and to_utc is None:
                rows = self.sched.list_reservations()
            else:
                lo = -math.inf if from_utc is None else from_utc
                hi = math.inf if to_utc is None else to_utc
                if lo >= hi:
                    raise SpecError("range", "from must precede to")
                rows = [
                    r
                    for r in self.sched.list_reservations()
                    if r.window.start_utc < hi and lo < r.window.end_utc
                ]
            return [reservation_to_dict(r) for r in rows]

    def utilization(self, from_utc: float, to_utc: float, bucket_s: float) -> dict:
        with self.lock:
            rep = self.sched.utilization_report(from_utc, to_utc, bucket_s)
            return {
                "start_utc": rep.start_utc,
                "end_utc": rep.end_utc,
                "bucket_s": rep.bucket_s,
                "occupancy": rep.occupancy,
            }

    # -------------------------------------------------------------- scenario

    def set_scenario(self, text: str) -> dict:
        sc = load_scenario(text)  # raises ParseError / ScenarioError
        with self.lock:
            self.scenario = sc
            self.scenario_text = text
            (self.state_dir / "scenario.yaml").write_text(text)
            return {"radios": [r.id for r in sc.radios], "carrier_hz": sc.carrier_hz}

    def get_scenario(self) -> dict:
        with self.lock:
            if self.scenario_text is None:
                raise StateError("no scenario loaded")
            return {"yaml": self.scenario_text}

    # ------------------------------------------------------------- emulation

    def run_emulation(self, body: dict) -> dict:
        """Drive every scenario radio as both transmitter and receiver:
        per-radio slot tones are aggregated into one wideband block,
        pushed through the attenuation timeline, and each receiver's
        block is disaggregated back per slot to measure power.  Records
        land in the named experiment archive when one is given."""
        with self.lock:
            if self.scenario is None:
                raise StateError("no scenario loaded; PUT /v1/scenario first")
            sc = self.scenario
            res_id = body.get("reservation_id")
            if res_id is not None:
                res = self.sched.get(res_id)
                if res.state is not ReservationState.ACTIVE:
                    raise StateError(
                        f"{res_id}: emulation requires Active, is {res.state.value}"
                    )
            duration_s = float(body.get("duration_s", 1.0))
            step_s = float(body.get("step_s", 0.1))
            seed = int(body.get("seed", 0))
            samples = int(body.get("samples_per_step", 4096))
            offsets = [float(f) for f in body.get("offsets_hz", (-5e6, 5e6))]
            slot_bw = float(body.get("slot_bw_hz", 2e6))
            block_bw = float(body.get("block_bw_hz", 40e6))
            amplitude = float(body.get("amplitude", 0.5))
            if duration_s <= 0 or step_s <= 0:
                raise SpecError("duration_s", "duration and step must be > 0")
            if not offsets:
                raise SpecError("offsets_hz", "at least one slot offset required")

            block = SpectrumBlock(node_id="emulation", center_hz=sc.carrier_hz,
                                  block_bw_hz=block_bw)
            rate = block.sample_rate_sps
            slots = []
            for off in offsets:
                slot = SpectrumSlot(
                    offset_hz=off, bw_hz=slot_bw, owner="emulation",
                    slot_rate_sps=slot_rate_for(rate, slot_bw),
                )
                block.add_slot(slot)
                slots.append(slot)

            n_slot = max(1, int(samples * slots[0].slot_rate_sps / rate))
            slot_tones = [
                (slot, tone(n_slot, slot.slot_rate_sps, 0.0, amplitude=amplitude))
                for slot in slots
            ]
            tx_block = aggregate([(b, s) for s, b in slot_tones], block, n_out=samples)

            def source(t, n, r):
                return IqBuffer(tx_block.samples[:n], r)

            tx_ids = body.get("tx_radios") or [r.id for r in sc.radios]
            steps = run_timeline(
                sc,
                duration_s,
                step_s,
                {rid: source for rid in tx_ids},
                seed=seed,
                samples_per_step=samples,
                rate_sps=rate,
            )

            archive = None
            if body.get("experiment_id"):
                archive = self.store.archive(body["experiment_id"])

            t0 = float(body.get("t0_utc", self.clock()))
            n_records = 0
            power_sum: dict[str, dict[float, float]] = {}
            for step in steps:
                for radio in sc.radios:
                    rx_buf = step.rx[radio.id]
                    others = [rid for rid in tx_ids if rid != radio.id]
                    az = 0.0
                    if len(others) == 1:
                        here = sc.position_at(radio.id, step.t_s)
                        there = sc.position_at(others[0], step.t_s)
                        az = math.degrees(
                            math.atan2(there[1] - here[1], there[0] - here[0])
                        ) % 360.0
                    for slot in slots:
                        narrow = disaggregate(rx_buf, slot)
                        n = narrow.samples.size
                        body_samples = narrow.samples[n // 4 : max(n // 4 + 1, 3 * n // 4)]
                        p = float(np.mean(np.abs(body_samples) ** 2))
                        value = -300.0 if p <= 0 else 10 * math.log10(p)
                        freq = sc.carrier_hz + slot.offset_hz
                        power_sum.setdefault(radio.id, {}).setdefault(freq, 0.0)
                        power_sum[radio.id][freq] += value
                        if archive is not None:
                            pos = sc.position_at(radio.id, step.t_s)
                            archive.append(
                                ExperimentRecord(
                                    t_utc=t0 + step.t_s,
                                    node_id=radio.id,
                                    location=pos,
                                    freq_hz=freq,
                                    azimuth_deg=az,
                                    value_dbm=value,
                                )
                            )
                            n_records += 1
            mean_power = {
                rid: {f"{freq:.0f}": total / len(steps) for freq, total in by_freq.items()}
                for rid, by_freq in power_sum.items()
            }
            return {
                "steps": len(steps),
                "records": n_records,
                "experiment_id": body.get("experiment_id"),
                "mean_power_dbm": mean_power,
            }

    # ------------------------------------------------------------ experiments

    def open_experiment(self, res_id: str) -> dict:
        with self.lock:
            res = self.sched.get(res_id)
            snapshot = ConfigSnapshot(
                inventory_hash=document_digest(self.inventory_text or ""),
                reservation_id=res_id,
                scenario_hash=document_digest(self.scenario_text or ""),
                software=res.spec.compute.software,
                sample_formats=("SC16", "float64"),
                created_utc=self.clock(),
            )
            archive = self.store.open_experiment(res, snapshot)
            return {"experiment_id": archive.experiment_id}

    def append_records(self, exp_id: str, body: dict) -> dict:
        rows = body["records"] if "records" in body else [body]
        with self.lock:
            archive = self.store.archive(exp_id)
            for row in rows:
                archive.append(self._parse_record(row))
            return {"appended": len(rows), "total": len(archive.records)}

    @staticmethod
    def _parse_record(row: dict) -> ExperimentRecord:
        try:
            loc = row["location"]
            if isinstance(loc, (list, tuple)):
                loc = tuple(float(v) for v in loc)
            return ExperimentRecord(
                t_utc=float(row["t_utc"]),
                node_id=str(row["node_id"]),
                location=loc,
                freq_hz=float(row["freq_hz"]),
                azimuth_deg=float(row["azimuth_deg"]),
                value_dbm=float(row["value_dbm"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError("record", f"malformed record: {exc}") from exc

    def query_records(self, exp_id: str, **bounds) -> dict:
        with self.lock:
            archive = self.store.archive(exp_id)
            rows = archive.query(**bounds)
            return {
                "experiment_id": exp_id,
                "records": [
                    {
                        "t_utc": r.t_utc,
                        "node_id": r.node_id,
                        "location": list(r.location)
                        if isinstance(r.location, tuple)
                        else r.location,
                        "freq_hz": r.freq_hz,
                        "azimuth_deg": r.azimuth_deg,
                        "value_dbm": r.value_dbm,
                    }
                    for r in rows
                ],
            }

    def seal_experiment(self, exp_id: str) -> dict:
        with self.lock:
            archive = self.store.archive(exp_id)
            return {"experiment_id": exp_id, "digest": archive.seal()}

    def reload_inventory(self, inv: Inventory, text: Optional[str] = None) -> dict:
        """Swap the resource pool.  Refused while any reservation is
        still in flight; bound allocations would dangle otherwise."""
        with self.lock:
            busy = [
                r.id
                for r in self.sched.list_reservations()
                if r.state not in TERMINAL_STATES
            ]
            if busy:
                raise StateError(
                    f"cannot reload inventory with in-flight reservations: {busy}"
                )
            self.inv = inv
            self.sched.inv = inv
            self.sched.pool = AllocatorPool(inv)
            self.inventory_text = text
            return self.capacity_dict()

    def snapshot(self) -> None:
        with self.lock:
            self.sched.snapshot(self.state_dir / "snapshot.json")
