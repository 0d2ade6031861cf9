"""Reservation records: what a user asked for, and where it is in its
lifecycle.

The state machine:

    Requested -> Tentative -> {Confirmed, PendingReview, Denied}
    PendingReview -> {Confirmed, Denied}
    Confirmed -> {Active, Cancelled}
    Active -> Completed
    any non-terminal -> Cancelled

Denied, Completed, and Cancelled are terminal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import SpecError, StateError
from .inventory import Attachment, Inventory


class ReservationState(str, Enum):
    REQUESTED = "Requested"
    TENTATIVE = "Tentative"
    PENDING_REVIEW = "PendingReview"
    CONFIRMED = "Confirmed"
    DENIED = "Denied"
    ACTIVE = "Active"
    COMPLETED = "Completed"
    CANCELLED = "Cancelled"


TERMINAL_STATES = frozenset(
    {ReservationState.DENIED, ReservationState.COMPLETED, ReservationState.CANCELLED}
)

# legal edges; "any non-terminal -> Cancelled" is folded in explicitly
ALLOWED_TRANSITIONS = frozenset(
    {
        (ReservationState.REQUESTED, ReservationState.TENTATIVE),
        (ReservationState.TENTATIVE, ReservationState.CONFIRMED),
        (ReservationState.TENTATIVE, ReservationState.PENDING_REVIEW),
        (ReservationState.TENTATIVE, ReservationState.DENIED),
        (ReservationState.PENDING_REVIEW, ReservationState.CONFIRMED),
        (ReservationState.PENDING_REVIEW, ReservationState.DENIED),
        (ReservationState.CONFIRMED, ReservationState.ACTIVE),
        (ReservationState.ACTIVE, ReservationState.COMPLETED),
    }
    | {
        (s, ReservationState.CANCELLED)
        for s in ReservationState
        if s not in (ReservationState.DENIED, ReservationState.COMPLETED, ReservationState.CANCELLED)
    }
)


@dataclass(frozen=True)
class Channel:
    center_hz: float
    bw_hz: float


@dataclass(frozen=True)
class ComputeSpec:
    cpu_cores: int = 1
    cpu_threads: int = 1
    ram_gb: float = 4.0
    storage_gb: float = 20.0
    vm_lifetime_s: float = 3600.0
    software: tuple[str, ...] = ()


@dataclass(frozen=True)
class RadioSpec:
    n_usrps: int = 0
    channels: tuple[Channel, ...] = ()
    path: Attachment = Attachment.OVER_THE_AIR


@dataclass(frozen=True)
class NetworkSpec:
    requested_bps: float = 0.0


@dataclass(frozen=True)
class ResourceSpec:
    compute: ComputeSpec = ComputeSpec()
    radio: RadioSpec = RadioSpec()
    network: NetworkSpec = NetworkSpec()

    def validate(self, inv: Inventory) -> None:
        """Structural checks; raises SpecError naming the offending field."""
        c, r, n = self.compute, self.radio, self.network
        for fname, value in (
            ("cpu_cores", c.cpu_cores),
            ("cpu_threads", c.cpu_threads),
            ("ram_gb", c.ram_gb),
            ("storage_gb", c.storage_gb),
            ("vm_lifetime_s", c.vm_lifetime_s),
            ("n_usrps", r.n_usrps),
            ("requested_bps", n.requested_bps),
        ):
            if value < 0:
                raise SpecError(fname, "must be >= 0")
        for ch in r.channels:
            if ch.bw_hz <= 0:
                raise SpecError("bw_hz", "channel bandwidth must be > 0")
            if ch.center_hz <= 0:
                raise SpecError("center_hz", "channel center must be > 0")
        catalog = set(inv.software_catalog)
        for label in c.software:
            if label not in catalog:
                raise SpecError("software", f"unknown package label {label!r}")
        if r.channels and r.n_usrps == 0:
            raise SpecError("n_usrps", "channels requested without any radios")


@dataclass(frozen=True)
class Window:
    start_utc: float
    end_utc: float

    def __post_init__(self):
        if self.start_utc >= self.end_utc:
            raise SpecError("window", "start must precede end")

    @property
    def duration_s(self) -> float:
        return self.end_utc - self.start_utc

    def overlaps(self, other: "Window") -> bool:
        return self.start_utc < other.end_utc and other.start_utc < self.end_utc

    def contains(self, t: float) -> bool:
        return self.start_utc <= t < self.end_utc


SURVEY_QUESTIONS = (
    "Were the allocated resources adequate for the experiment?",
    "How did actual usage compare with the scheduled window?",
    "Anything else the operations team should know?",
)


@dataclass
class SurveyForm:
    reservation_id: str
    questions: tuple[str, ...] = SURVEY_QUESTIONS
    responses: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class AuditEntry:
    t_utc: float
    actor: str
    from_state: Optional[ReservationState]
    to_state: ReservationState
    note: str = ""


@dataclass
class Reservation:
    id: str
    user: str
    window: Window
    spec: ResourceSpec
    state: ReservationState = ReservationState.REQUESTED
    survey: Optional[SurveyForm] = None
    audit: list[AuditEntry] = field(default_factory=list)
    activated_at: Optional[float] = None
    completed_at: Optional[float] = None

    def transition(
        self, to: ReservationState, t_utc: float, actor: str, note: str = ""
    ) -> None:
        if (self.state, to) not in ALLOWED_TRANSITIONS:
            raise StateError(f"{self.id}: illegal transition {self.state.value} -> {to.value}")
        self.audit.append(AuditEntry(t_utc, actor, self.state, to, note))
        self.state = to


def spec_to_dict(spec: ResourceSpec) -> dict:
    return {
        "compute": {
            "cpu_cores": spec.compute.cpu_cores,
            "cpu_threads": spec.compute.cpu_threads,
            "ram_gb": spec.compute.ram_gb,
            "storage_gb": spec.compute.storage_gb,
            "vm_lifetime_s": spec.compute.vm_lifetime_s,
            "software": list(spec.compute.software),
        },
        "radio": {
            "n_usrps": spec.radio.n_usrps,
            "channels": [
                {"center_hz": c.center_hz, "bw_hz": c.bw_hz} for c in spec.radio.channels
            ],
            "path": spec.radio.path.value,
        },
        "network": {"requested_bps": spec.network.requested_bps},
    }


def spec_from_dict(d: dict) -> ResourceSpec:
    c = d.get("compute", {})
    r = d.get("radio", {})
    n = d.get("network", {})
    return ResourceSpec(
        compute=ComputeSpec(
            cpu_cores=int(c.get("cpu_cores", 1)),
            cpu_threads=int(c.get("cpu_threads", 1)),
            ram_gb=float(c.get("ram_gb", 4.0)),
            storage_gb=float(c.get("storage_gb", 20.0)),
            vm_lifetime_s=float(c.get("vm_lifetime_s", 3600.0)),
            software=tuple(c.get("software", ())),
        ),
        radio=RadioSpec(
            n_usrps=int(r.get("n_usrps", 0)),
            channels=tuple(
                Channel(float(ch["center_hz"]), float(ch["bw_hz"]))
                for ch in r.get("channels", ())
            ),
            path=Attachment(r.get("path", "OverTheAir")),
        ),
        network=NetworkSpec(requested_bps=float(n.get("requested_bps", 0.0))),
    )


def reservation_to_dict(res: Reservation) -> dict:
    return {
        "id": res.id,
        "user": res.user,
        "window": {"start_utc": res.window.start_utc, "end_utc": res.window.end_utc},
        "spec": spec_to_dict(res.spec),
        "state": res.state.value,
        "activated_at": res.activated_at,
        "completed_at": res.completed_at,
        "survey": (
            None
            if res.survey is None
            else {
                "reservation_id": res.survey.reservation_id,
                "questions": list(res.survey.questions),
                "responses": None
                if res.survey.responses is None
                else list(res.survey.responses),
            }
        ),
        "audit": [
            {
                "t_utc": a.t_utc,
                "actor": a.actor,
                "from_state": None if a.from_state is None else a.from_state.value,
                "to_state": a.to_state.value,
                "note": a.note,
            }
            for a in res.audit
        ],
    }


def reservation_from_dict(d: dict) -> Reservation:
    survey = None
    if d.get("survey") is not None:
        s = d["survey"]
        survey = SurveyForm(
            reservation_id=s["reservation_id"],
            questions=tuple(s["questions"]),
            responses=None if s.get("responses") is None else tuple(s["responses"]),
        )
    return Reservation(
        id=d["id"],
        user=d["user"],
        window=Window(d["window"]["start_utc"], d["window"]["end_utc"]),
        spec=spec_from_dict(d["spec"]),
        state=ReservationState(d["state"]),
        survey=survey,
        audit=[
            AuditEntry(
                t_utc=a["t_utc"],
                actor=a["actor"],
                from_state=None
                if a.get("from_state") is None
                else ReservationState(a["from_state"]),
                to_state=ReservationState(a["to_state"]),
                note=a.get("note", ""),
            )
            for a in d.get("audit", [])
        ],
        activated_at=d.get("activated_at"),
        completed_at=d.get("completed_at"),
    )
