"""Reservation lifecycle over the shared inventory.

Event-sourced: every mutation is an event applied to in-memory state and
appended to the log, so replaying the log (or a snapshot plus the tail)
rebuilds the calendar exactly.  All mutations must run on one writer
thread; the service layer holds that lock.

Admission policy: a request is denied when it provably cannot coexist
with overlapping reservations, auto-confirmed when it is short and
small (duration and per-class pool fractions under the configured
thresholds, inclusive), and parked for admin review otherwise.
Tentative holds expire after a TTL if never evaluated.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

from .allocator import AllocatorPool, ffd_feasible
from .errors import (
    AllocationError,
    CapacityError,
    LicenseError,
    NotFoundError,
    SpecError,
    StateError,
)
from .eventlog import EventLog, read_snapshot, write_snapshot
from .inventory import Attachment, Inventory, band_containing_span
from .reservation import (
    ALLOWED_TRANSITIONS,
    AuditEntry,
    Reservation,
    ReservationState,
    ResourceSpec,
    SurveyForm,
    TERMINAL_STATES,
    Window,
    reservation_from_dict,
    reservation_to_dict,
)

AUTO_APPROVE_MAX_S = 86400.0
AUTO_APPROVE_FRACTION = 0.25
TENTATIVE_TTL_S = 900.0

RESOURCE_CLASSES = ("sdr_ota", "sdr_emulator", "cores", "ram_gb", "network_bps")


@dataclass(frozen=True)
class Conflict:
    kind: str  # devices | spectrum | compute | network
    other_ids: tuple[str, ...]
    detail: str


@dataclass(frozen=True)
class UsageEntry:
    reservation_id: str
    scheduled_seconds: float
    actual_seconds: float
    resources_held: dict


@dataclass
class UtilizationReport:
    start_utc: float
    end_utc: float
    bucket_s: float
    occupancy: dict[str, list[float]]  # class -> per-bucket fraction

    @property
    def bucket_edges(self) -> list[float]:
        edges = []
        t = self.start_utc
        while t < self.end_utc:
            edges.append(t)
            t += self.bucket_s
        return edges


def _overlap_s(a0: float, a1: float, b0: float, b1: float) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


class Scheduler:
    def __init__(
        self,
        inv: Inventory,
        *,
        auto_approve_max_s: float = AUTO_APPROVE_MAX_S,
        auto_approve_fraction: float = AUTO_APPROVE_FRACTION,
        tentative_ttl_s: float = TENTATIVE_TTL_S,
        log_path: Optional[str | Path] = None,
        clock: Callable[[], float] = time.time,
    ):
        self.inv = inv
        self.auto_approve_max_s = auto_approve_max_s
        self.auto_approve_fraction = auto_approve_fraction
        self.tentative_ttl_s = tentative_ttl_s
        self.clock = clock
        self.pool = AllocatorPool(inv)
        self.reservations: dict[str, Reservation] = {}
        self.ledger: dict[str, UsageEntry] = {}
        self.listeners: list[Callable[[dict], None]] = []
        self._id_counter = itertools.count(1)
        self.log = EventLog(log_path) if log_path is not None else None
        self._replaying = False

    # ------------------------------------------------------------------ events

    def _record(self, kind: str, payload: dict[str, Any], t: float) -> None:
        """Apply the event to state; persist and broadcast only if the
        apply succeeded, so failed operations leave nothing behind."""
        self._apply_event(kind, payload, t)
        if self.log is not None and not self._replaying:
            self.log.append(kind, payload, t)
        if not self._replaying:
            event = {"kind": kind, "payload": payload, "t": t}
            for cb in list(self.listeners):
                cb(event)

    def _apply_event(self, kind: str, payload: dict[str, Any], t: float) -> None:
        if kind == "requested":
            res = reservation_from_dict(payload["reservation"])
            self.reservations[res.id] = res
            res.transition(ReservationState.TENTATIVE, t, actor=res.user)
        elif kind == "transition":
            res = self.reservations[payload["id"]]
            to = ReservationState(payload["to"])
            if (res.state, to) not in ALLOWED_TRANSITIONS:
                raise StateError(
                    f"{res.id}: illegal transition {res.state.value} -> {to.value}"
                )
            if to is ReservationState.ACTIVE:
                self.pool.bind(res.id, res.spec)  # deterministic; atomic
                res.activated_at = t
            res.transition(to, t, payload.get("actor", "system"), payload.get("note", ""))
            if to is ReservationState.COMPLETED:
                res.completed_at = t
                self.pool.release(res.id)
                self._write_ledger(res)
                if res.survey is None:
                    res.survey = SurveyForm(reservation_id=res.id)
            elif to is ReservationState.CANCELLED:
                self.pool.release(res.id)
        elif kind == "audit_note":
            res = self.reservations[payload["id"]]
            res.audit.append(
                AuditEntry(t, payload.get("actor", "system"), res.state, res.state, payload["note"])
            )
        elif kind == "survey_submitted":
            res = self.reservations[payload["id"]]
            if res.survey is None or res.survey.responses is not None:
                raise StateError(f"{res.id}: survey not open for responses")
            res.survey.responses = tuple(payload["responses"])
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _write_ledger(self, res: Reservation) -> None:
        actual = 0.0
        if res.activated_at is not None and res.completed_at is not None:
            actual = res.completed_at - res.activated_at
        self.ledger[res.id] = UsageEntry(
            reservation_id=res.id,
            scheduled_seconds=res.window.duration_s,
            actual_seconds=actual,
            resources_held={
                "devices": res.spec.radio.n_usrps,
                "path": res.spec.radio.path.value,
                "cores": res.spec.compute.cpu_cores,
                "ram_gb": res.spec.compute.ram_gb,
                "network_bps": res.spec.network.requested_bps,
            },
        )

    # ------------------------------------------------------------ lifecycle ops

    def request_reservation(
        self, user: str, window: Window, spec: ResourceSpec
    ) -> Reservation:
        spec.validate(self.inv)
        self._check_license(spec)
        self._check_static_capacity(spec)
        res_id = f"res-{next(self._id_counter):04d}"
        res = Reservation(id=res_id, user=user, window=window, spec=spec)
        now = self.clock()
        self._record("requested", {"reservation": reservation_to_dict(res)}, now)
        return self.reservations[res_id]

    def _check_license(self, spec: ResourceSpec) -> None:
        if spec.radio.path is Attachment.OVER_THE_AIR:
            for ch in spec.radio.channels:
                lo, hi = ch.center_hz - ch.bw_hz / 2, ch.center_hz + ch.bw_hz / 2
                if band_containing_span(self.inv, lo, hi) is None:
                    raise LicenseError(
                        f"channel {ch.center_hz / 1e6:.1f} MHz "
                        f"({ch.bw_hz / 1e6:.1f} MHz wide) is outside every licensed band"
                    )
        else:
            max_tune = max(
                (d.max_center_freq_hz for d in self.inv.sdr_devices), default=0.0
            )
            for ch in spec.radio.channels:
                if ch.center_hz > max_tune:
                    raise SpecError(
                        "center_hz",
                        f"{ch.center_hz / 1e9:.2f} GHz exceeds device tuning range",
                    )

    def _check_static_capacity(self, spec: ResourceSpec) -> None:
        """Reject only what no calendar could ever satisfy."""
        pool_devices = len(
            [d for d in self.inv.sdr_devices if d.attachment is spec.radio.path]
        )
        checks = [
            ("devices", spec.radio.n_usrps, pool_devices),
            ("cores", spec.compute.cpu_cores, sum(n.cores for n in self.inv.compute_nodes)),
            ("ram_gb", spec.compute.ram_gb, sum(n.ram_gb for n in self.inv.compute_nodes)),
            (
                "storage_gb",
                spec.compute.storage_gb,
                sum(n.storage_gb for n in self.inv.compute_nodes),
            ),
            ("network_bps", spec.network.requested_bps, self.inv.fabric.capacity_bps),
        ]
        for name, want, have in checks:
            if want > have:
                raise CapacityError(f"{name}: requested {want:g}, inventory holds {have:g}")

    def evaluate_admission(self, res_id: str) -> Reservation:
        res = self._get(res_id)
        if res.state is not ReservationState.TENTATIVE:
            raise StateError(f"{res_id}: evaluate requires Tentative, is {res.state.value}")
        now = self.clock()
        requested_at = res.audit[0].t_utc if res.audit else now
        if now - requested_at > self.tentative_ttl_s:
            self._record(
                "transition",
                {"id": res_id, "to": "Cancelled", "actor": "system", "note": "tentative hold expired"},
                now,
            )
            raise StateError(f"{res_id}: tentative hold expired")
        conflicts = self.detect_conflicts(res)
        if conflicts:
            note = "; ".join(f"{c.kind}: {c.detail}" for c in conflicts[:3])
            self._record(
                "transition",
                {"id": res_id, "to": "Denied", "actor": "system", "note": note},
                now,
            )
        elif self._auto_approvable(res):
            self._record(
                "transition",
                {"id": res_id, "to": "Confirmed", "actor": "system", "note": "auto-approved"},
                now,
            )
        else:
            self._record(
                "transition",
                {"id": res_id, "to": "PendingReview", "actor": "system",
                 "note": "exceeds auto-approval thresholds"},
                now,
            )
        return res

    def _auto_approvable(self, res: Reservation) -> bool:
        if res.window.duration_s > self.auto_approve_max_s:
            return False
        f = self.auto_approve_fraction
        spec = res.spec
        pool_devices = len(
            [d for d in self.inv.sdr_devices if d.attachment is spec.radio.path]
        )
        total_cores = sum(n.cores for n in self.inv.compute_nodes)
        total_ram = sum(n.ram_gb for n in self.inv.compute_nodes)
        fractions = []
        if spec.radio.n_usrps:
            fractions.append(spec.radio.n_usrps / pool_devices if pool_devices else 2.0)
        if spec.compute.cpu_cores:
            fractions.append(spec.compute.cpu_cores / total_cores if total_cores else 2.0)
        if spec.compute.ram_gb:
            fractions.append(spec.compute.ram_gb / total_ram if total_ram else 2.0)
        if spec.network.requested_bps:
            fractions.append(spec.network.requested_bps / self.inv.fabric.capacity_bps)
        return all(x <= f for x in fractions)

    def review_decision(self, res_id: str, admin: str, approve: bool) -> Reservation:
        res = self._get(res_id)
        if res.state is not ReservationState.PENDING_REVIEW:
            raise StateError(f"{res_id}: review requires PendingReview, is {res.state.value}")
        to = "Confirmed" if approve else "Denied"
        self._record(
            "transition",
            {"id": res_id, "to": to, "actor": admin, "note": "admin review"},
            self.clock(),
        )
        return res

    def activate(self, res_id: str, now: Optional[float] = None) -> Reservation:
        res = self._get(res_id)
        now = self.clock() if now is None else now
        if res.state is not ReservationState.CONFIRMED:
            raise StateError(f"{res_id}: activate requires Confirmed, is {res.state.value}")
        if not res.window.contains(now):
            raise StateError(f"{res_id}: now is outside the reserved window")
        try:
            self._record(
                "transition",
                {"id": res_id, "to": "Active", "actor": res.user},
                now,
            )
        except AllocationError as err:
            # reservation stays Confirmed; leave a trace in the audit trail
            self._record(
                "audit_note",
                {"id": res_id, "note": f"activation failed: {err}", "actor": "system"},
                now,
            )
            raise
        return res

    def complete(self, res_id: str, now: Optional[float] = None) -> tuple[Reservation, SurveyForm]:
        res = self._get(res_id)
        now = self.clock() if now is None else now
        if res.state is not ReservationState.ACTIVE:
            raise StateError(f"{res_id}: complete requires Active, is {res.state.value}")
        self._record(
            "transition", {"id": res_id, "to": "Completed", "actor": res.user}, now
        )
        assert res.survey is not None
        return res, res.survey

    def cancel(self, res_id: str, actor: str = "user") -> Reservation:
        res = self._get(res_id)
        if res.state in TERMINAL_STATES:
            raise StateError(f"{res_id}: already terminal ({res.state.value})")
        self._record(
            "transition",
            {"id": res_id, "to": "Cancelled", "actor": actor},
            self.clock(),
        )
        return res

    def submit_survey(self, res_id: str, responses: Iterable[str]) -> SurveyForm:
        res = self._get(res_id)
        self._record(
            "survey_submitted",
            {"id": res_id, "responses": list(responses)},
            self.clock(),
        )
        assert res.survey is not None
        return res.survey

    def expire_stale(self, now: Optional[float] = None) -> list[str]:
        """Cancel tentative holds whose TTL has lapsed; returns their ids."""
        now = self.clock() if now is None else now
        expired = []
        for res in list(self.reservations.values()):
            if res.state is not ReservationState.TENTATIVE:
                continue
            requested_at = res.audit[0].t_utc if res.audit else now
            if now - requested_at > self.tentative_ttl_s:
                self._record(
                    "transition",
                    {"id": res.id, "to": "Cancelled", "actor": "system",
                     "note": "tentative hold expired"},
                    now,
                )
                expired.append(res.id)
        return expired

    # ------------------------------------------------------------- conflicts

    def detect_conflicts(self, candidate: Reservation) -> list[Conflict]:
        others = [
            r
            for r in self.reservations.values()
            if r.id != candidate.id
            and r.state not in TERMINAL_STATES
            and r.window.overlaps(candidate.window)
        ]
        if not others:
            return []
        conflicts: list[Conflict] = []
        conflicts += self._device_conflicts(candidate, others)
        conflicts += self._spectrum_conflicts(candidate, others)
        conflicts += self._compute_conflicts(candidate, others)
        conflicts += self._network_conflicts(candidate, others)
        return conflicts

    def _critical_times(self, candidate: Reservation, others: list[Reservation]):
        """Window endpoints inside the candidate's window: checking demand
        at these points covers every distinct overlap set."""
        points = {candidate.window.start_utc}
        for o in others:
            for t in (o.window.start_utc, o.window.end_utc):
                if candidate.window.contains(t):
                    points.add(t)
        return sorted(points)

    def _concurrent_at(self, t: float, others: list[Reservation]) -> list[Reservation]:
        return [o for o in others if o.window.contains(t)]

    def _device_conflicts(self, candidate, others) -> list[Conflict]:
        out = []
        path = candidate.spec.radio.path
        want = candidate.spec.radio.n_usrps
        if not want:
            return out
        pool = len([d for d in self.inv.sdr_devices if d.attachment is path])
        for t in self._critical_times(candidate, others):
            live = self._concurrent_at(t, others)
            demand = want + sum(
                o.spec.radio.n_usrps for o in live if o.spec.radio.path is path
            )
            if demand > pool:
                ids = tuple(o.id for o in live if o.spec.radio.path is path)
                out.append(
                    Conflict(
                        "devices",
                        ids,
                        f"{demand} {path.value} devices demanded, pool has {pool}",
                    )
                )
                break
        return out

    def _spectrum_conflicts(self, candidate, others) -> list[Conflict]:
        # only over-the-air channels share a medium; emulator paths are cabled
        if candidate.spec.radio.path is not Attachment.OVER_THE_AIR:
            return []
        out = []
        for o in others:
            if o.spec.radio.path is not Attachment.OVER_THE_AIR:
                continue
            for ca in candidate.spec.radio.channels:
                for cb in o.spec.radio.channels:
                    lo_a, hi_a = ca.center_hz - ca.bw_hz / 2, ca.center_hz + ca.bw_hz / 2
                    lo_b, hi_b = cb.center_hz - cb.bw_hz / 2, cb.center_hz + cb.bw_hz / 2
                    if hi_a > lo_b and hi_b > lo_a:
                        out.append(
                            Conflict(
                                "spectrum",
                                (o.id,),
                                f"channel at {ca.center_hz / 1e6:.1f} MHz overlaps "
                                f"{o.id} at {cb.center_hz / 1e6:.1f} MHz",
                            )
                        )
        return out

    def _compute_conflicts(self, candidate, others) -> list[Conflict]:
        cand = (candidate.spec.compute.cpu_cores, candidate.spec.compute.ram_gb)
        if cand == (0, 0):
            return []
        for t in self._critical_times(candidate, others):
            demands = [cand] + [
                (o.spec.compute.cpu_cores, o.spec.compute.ram_gb)
                for o in self._concurrent_at(t, others)
            ]
            if not ffd_feasible(demands, self.inv.compute_nodes):
                ids = tuple(o.id for o in self._concurrent_at(t, others))
                return [Conflict("compute", ids, "no placement fits concurrent VMs")]
        return []

    def _network_conflicts(self, candidate, others) -> list[Conflict]:
        want = candidate.spec.network.requested_bps
        if not want:
            return []
        cap = self.inv.fabric.capacity_bps
        for t in self._critical_times(candidate, others):
            live = self._concurrent_at(t, others)
            total = want + sum(o.spec.network.requested_bps for o in live)
            if total > cap:
                return [
                    Conflict(
                        "network",
                        tuple(o.id for o in live),
                        f"{total:.3g} bps demanded, fabric carries {cap:.3g}",
                    )
                ]
        return []

    # ------------------------------------------------------------- reporting

    def _hold_interval(self, res: Reservation) -> Optional[tuple[float, float]]:
        s = res.state
        if s in (ReservationState.CONFIRMED, ReservationState.ACTIVE):
            return (res.window.start_utc, res.window.end_utc)
        if s is ReservationState.COMPLETED:
            if res.activated_at is None or res.completed_at is None:
                return None
            return (res.activated_at, res.completed_at)
        if s is ReservationState.CANCELLED:
            was_confirmed = any(
                a.to_state is ReservationState.CONFIRMED for a in res.audit
            )
            if not was_confirmed:
                return None
            cancel_t = next(
                a.t_utc for a in res.audit if a.to_state is ReservationState.CANCELLED
            )
            return (res.window.start_utc, min(cancel_t, res.window.end_utc))
        return None

    def _held_quantities(self, res: Reservation) -> dict[str, float]:
        spec = res.spec
        q = {
            "cores": float(spec.compute.cpu_cores),
            "ram_gb": float(spec.compute.ram_gb),
            "network_bps": float(spec.network.requested_bps),
            "sdr_ota": 0.0,
            "sdr_emulator": 0.0,
        }
        key = "sdr_ota" if spec.radio.path is Attachment.OVER_THE_AIR else "sdr_emulator"
        q[key] = float(spec.radio.n_usrps)
        return q

    def _pool_totals(self) -> dict[str, float]:
        return {
            "sdr_ota": float(
                len([d for d in self.inv.sdr_devices if d.attachment is Attachment.OVER_THE_AIR])
            ),
            "sdr_emulator": float(
                len([d for d in self.inv.sdr_devices if d.attachment is Attachment.EMULATOR])
            ),
            "cores": float(sum(n.cores for n in self.inv.compute_nodes)),
            "ram_gb": float(sum(n.ram_gb for n in self.inv.compute_nodes)),
            "network_bps": self.inv.fabric.capacity_bps,
        }

    def utilization_report(
        self, start_utc: float, end_utc: float, bucket_s: float
    ) -> UtilizationReport:
        """Time-weighted occupancy per resource class: integral of held
        quantity over each bucket, divided by pool total times bucket
        length."""
        if end_utc <= start_utc or bucket_s <= 0:
            raise SpecError("range", "end must follow start and bucket_s must be > 0")
        pools = self._pool_totals()
        n_buckets = int((end_utc - start_utc + bucket_s - 1e-9) // bucket_s)
        occupancy = {cls: [0.0] * n_buckets for cls in RESOURCE_CLASSES}
        for res in self.reservations.values():
            hold = self._hold_interval(res)
            if hold is None:
                continue
            held = self._held_quantities(res)
            for b in range(n_buckets):
                b0 = start_utc + b * bucket_s
                b1 = min(b0 + bucket_s, end_utc)
                dt = _overlap_s(hold[0], hold[1], b0, b1)
                if dt <= 0:
                    continue
                for cls, qty in held.items():
                    if qty and pools[cls] > 0:
                        occupancy[cls][b] += qty * dt / (pools[cls] * (b1 - b0))
        return UtilizationReport(start_utc, end_utc, bucket_s, occupancy)

    # ------------------------------------------------------------- queries

    def _get(self, res_id: str) -> Reservation:
        if res_id not in self.reservations:
            raise NotFoundError(f"unknown reservation {res_id!r}")
        return self.reservations[res_id]

    def get(self, res_id: str) -> Reservation:
        return self._get(res_id)

    def list_reservations(
        self,
        states: Optional[Iterable[ReservationState]] = None,
        overlapping: Optional[Window] = None,
    ) -> list[Reservation]:
        out = []
        wanted = None if states is None else set(states)
        for res in self.reservations.values():
            if wanted is not None and res.state not in wanted:
                continue
            if overlapping is not None and not res.window.overlaps(overlapping):
                continue
            out.append(res)
        return sorted(out, key=lambda r: r.id)

    def pending_review(self) -> list[Reservation]:
        return self.list_reservations(states=[ReservationState.PENDING_REVIEW])

    # ---------------------------------------------------------- persistence

    def snapshot(self, path: str | Path) -> None:
        state = {
            "reservations": [reservation_to_dict(r) for r in self.list_reservations()],
            "id_counter": self._peek_counter(),
        }
        covers = self.log.next_seq - 1 if self.log else 0
        write_snapshot(path, state, covers)

    def _peek_counter(self) -> int:
        # itertools.count has no peek; advance and rebuild
        n = next(self._id_counter)
        self._id_counter = itertools.count(n)
        return n

    @classmethod
    def replay(
        cls,
        inv: Inventory,
        log_path: str | Path,
        snapshot_path: Optional[str | Path] = None,
        **kwargs,
    ) -> "Scheduler":
        """Rebuild scheduler state from the snapshot (if any) plus the
        event log tail.  Allocation state is reconstructed by re-running
        the deterministic bind for reservations that were Active."""
        sched = cls(inv, log_path=log_path, **kwargs)
        sched._replaying = True
        from_seq = 0
        if snapshot_path is not None:
            loaded = read_snapshot(snapshot_path)
            if loaded is not None:
                state, from_seq = loaded
                for rd in state["reservations"]:
                    res = reservation_from_dict(rd)
                    sched.reservations[res.id] = res
                    if res.state is ReservationState.ACTIVE:
                        sched.pool.bind(res.id, res.spec)
                    if res.state is ReservationState.COMPLETED:
                        sched._write_ledger(res)
                sched._id_counter = itertools.count(state.get("id_counter", 1))
        if sched.log is not None:
            for ev in sched.log.scan(from_seq=from_seq):
                sched._apply_event(ev["kind"], ev["payload"], ev["t"])
        sched._replaying = False
        highest = 0
        for res_id in sched.reservations:
            highest = max(highest, int(res_id.split("-")[1]))
        sched._id_counter = itertools.count(highest + 1)
        return sched
