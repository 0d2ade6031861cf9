"""RF channel emulation between radios.

A scenario declares radios (physical or virtual), a propagation model,
and optional position keyframes.  The emulator turns geometry into
time-varying attenuation matrices and applies them to IQ streams as
flat scalar gains plus receiver noise.  No delay spread, Doppler, or
multipath taps; the emulated channel is a gain matrix.

Power convention: |sample|^2 is power in milliwatts, so 10*log10 of the
mean squared magnitude is dBm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
import yaml

from .errors import ParseError, RateError, ScenarioError, ValidationError
from .spectrum import IqBuffer

# free-space path loss in dB for d in meters, f in Hz:
# 20 log10(d) + 20 log10(f) + 20 log10(4 pi / c)
FSPL_CONST_DB = -147.558

MAX_PHYSICAL_RADIOS = 8


class RadioKind(str, Enum):
    PHYSICAL = "Physical"
    VIRTUAL = "Virtual"


@dataclass(frozen=True)
class Radio:
    id: str
    kind: RadioKind = RadioKind.VIRTUAL
    position_m: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class FreeSpace:
    """Free-space path loss."""


@dataclass(frozen=True)
class LogDistance:
    """Log-distance path loss: free space at d0, then 10*n*log10(d/d0)."""

    exponent: float = 2.0
    d0_m: float = 1.0

    def __post_init__(self):
        if self.exponent <= 0 or self.d0_m <= 0:
            raise ValidationError("exponent", "exponent and d0_m must be > 0")


@dataclass(frozen=True)
class Empirical:
    """Measured attenuation matrices, step-held between timestamps."""

    ids: tuple[str, ...]
    times_s: tuple[float, ...]
    matrices: tuple  # one n x n tuple-of-tuples per timestamp

    def __post_init__(self):
        if not self.times_s:
            raise ValidationError("times_s", "at least one matrix record required")
        if list(self.times_s) != sorted(self.times_s):
            raise ValidationError("times_s", "timestamps must be non-decreasing")
        n = len(self.ids)
        for m in self.matrices:
            if len(m) != n or any(len(row) != n for row in m):
                raise ValidationError("matrices", f"matrix rows must be {n}x{n}")

    def at(self, t_s: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times_s, t_s, side="right")) - 1
        idx = max(idx, 0)
        return np.array(self.matrices[idx], dtype=float)


Model = Union[FreeSpace, LogDistance, Empirical]


@dataclass(frozen=True)
class Keyframe:
    t_s: float
    positions: Mapping[str, tuple[float, float, float]]


@dataclass
class ChannelScenario:
    radios: list[Radio]
    model: Model
    carrier_hz: float
    keyframes: list[Keyframe] = field(default_factory=list)
    noise_floor_dbm_hz: Optional[float] = None

    def __post_init__(self):
        ids = [r.id for r in self.radios]
        if len(set(ids)) != len(ids):
            raise ScenarioError("radio ids must be unique")
        n_phys = sum(1 for r in self.radios if r.kind is RadioKind.PHYSICAL)
        if n_phys > MAX_PHYSICAL_RADIOS:
            raise ScenarioError(
                f"{n_phys} physical radios requested, at most {MAX_PHYSICAL_RADIOS} exist"
            )
        times = [k.t_s for k in self.keyframes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScenarioError("keyframe times must be strictly increasing")
        if self.carrier_hz <= 0:
            raise ScenarioError("carrier_hz must be > 0")

    def radio(self, radio_id: str) -> Radio:
        for r in self.radios:
            if r.id == radio_id:
                return r
        raise ScenarioError(f"unknown radio {radio_id!r}")

    def position_at(self, radio_id: str, t_s: float) -> tuple[float, float, float]:
        """Linear interpolation through this radio's keyframes; the base
        position anchors t=0 and the last keyframe holds forever after."""
        base = self.radio(radio_id).position_m
        knots_t = [0.0]
        knots_p = [base]
        for kf in self.keyframes:
            if radio_id in kf.positions:
                pos = tuple(float(v) for v in kf.positions[radio_id])
                if kf.t_s == 0.0:
                    knots_t, knots_p = [0.0], [pos]
                else:
                    knots_t.append(kf.t_s)
                    knots_p.append(pos)
        coords = np.array(knots_p, dtype=float)
        return tuple(
            float(np.interp(t_s, knots_t, coords[:, axis])) for axis in range(3)
        )


@dataclass(frozen=True)
class AttenuationMatrix:
    ids: tuple[str, ...]
    a_db: tuple  # n x n, diagonal unused
    t_s: float

    @property
    def n(self) -> int:
        return len(self.ids)

    def loss_db(self, tx_id: str, rx_id: str) -> float:
        i = self.ids.index(tx_id)
        j = self.ids.index(rx_id)
        return self.a_db[i][j]

    def as_array(self) -> np.ndarray:
        return np.array(self.a_db, dtype=float)


def path_loss_db(model: Model, d_m: float, f_hz: float) -> float:
    """Path loss for the geometric models.

    FreeSpace: 20 log10(d) + 20 log10(f) - 147.558
    LogDistance: free-space loss at d0, plus 10 * exponent * log10(d/d0)
    """
    if d_m <= 0:
        raise ValidationError("d_m", "distance must be > 0")
    if f_hz <= 0:
        raise ValidationError("f_hz", "frequency must be > 0")
    fspl = 20 * math.log10(d_m) + 20 * math.log10(f_hz) + FSPL_CONST_DB
    if isinstance(model, FreeSpace):
        return fspl
    if isinstance(model, LogDistance):
        at_d0 = 20 * math.log10(model.d0_m) + 20 * math.log10(f_hz) + FSPL_CONST_DB
        return at_d0 + 10 * model.exponent * math.log10(d_m / model.d0_m)
    raise ScenarioError("empirical model has no closed-form path loss")


def attenuation_at(sc: ChannelScenario, t_s: float) -> AttenuationMatrix:
    """Attenuation matrix at time t: geometry models interpolate radio
    positions and evaluate pairwise path loss; the empirical model holds
    its most recent record."""
    if not sc.radios:
        raise ScenarioError("scenario has no radios")
    ids = tuple(r.id for r in sc.radios)
    if isinstance(sc.model, Empirical):
        if sc.model.ids != ids:
            raise ScenarioError("empirical matrix ids do not match scenario radios")
        m = sc.model.at(t_s)
        return AttenuationMatrix(ids, tuple(map(tuple, m)), t_s)
    pos = [np.array(sc.position_at(r, t_s)) for r in ids]
    n = len(ids)
    a = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.linalg.norm(pos[i] - pos[j]))
            loss = path_loss_db(sc.model, d, sc.carrier_hz)
            a[i][j] = a[j][i] = loss
    return AttenuationMatrix(ids, tuple(map(tuple, a)), t_s)


def apply_channel(
    tx: Sequence[tuple[str, IqBuffer]],
    m: AttenuationMatrix,
    rx_id: str,
    noise_floor_dbm_hz: Optional[float] = None,
    seed: int = 0,
) -> IqBuffer:
    """Receive at rx_id: sum of attenuated transmit streams plus white
    receiver noise at the declared density integrated over the sample
    bandwidth.  Identical seed gives bit-identical output."""
    if rx_id not in m.ids:
        raise ScenarioError(f"receiver {rx_id!r} not in attenuation matrix")
    if not tx:
        raise ScenarioError("no transmit streams")
    rate = tx[0][1].rate_sps
    n = len(tx[0][1].samples)
    for _, buf in tx:
        if buf.rate_sps != rate or len(buf.samples) != n:
            raise RateError("transmit buffers must share rate and length")
    acc = np.zeros(n, dtype=np.complex128)
    for tx_id, buf in tx:
        if tx_id == rx_id:
            continue  # self-path excluded
        gain = 10 ** (-m.loss_db(tx_id, rx_id) / 20)
        acc += gain * buf.samples
    if noise_floor_dbm_hz is not None:
        noise_mw = 10 ** ((noise_floor_dbm_hz + 10 * math.log10(rate)) / 10)
        rng = np.random.default_rng(seed)
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        acc = acc + math.sqrt(noise_mw / 2) * w
    return IqBuffer(acc, rate)


@dataclass(frozen=True)
class TimelineStep:
    t_s: float
    matrix: AttenuationMatrix
    rx: Mapping[str, IqBuffer]


TxSource = Callable[[float, int, float], IqBuffer]


def run_timeline(
    sc: ChannelScenario,
    duration_s: float,
    step_s: float,
    tx_sources: Mapping[str, TxSource],
    seed: int = 0,
    samples_per_step: int = 256,
    rate_sps: float = 1e6,
) -> list[TimelineStep]:
    """Step the scenario clock, emitting the matrix and every radio's
    received stream at each step.  Per-call noise seeds are derived from
    (seed, step, receiver) so the whole run is reproducible."""
    if step_s <= 0:
        raise ScenarioError("step_s must be > 0")
    if not sc.radios:
        raise ScenarioError("scenario has no radios")
    for radio_id in tx_sources:
        sc.radio(radio_id)  # raises on unknown ids
    steps = []
    n_steps = int(math.floor(duration_s / step_s + 1e-9))
    for k in range(n_steps):
        t = k * step_s
        m = attenuation_at(sc, t)
        tx = [(rid, src(t, samples_per_step, rate_sps)) for rid, src in tx_sources.items()]
        rx = {}
        for j, radio in enumerate(sc.radios):
            sub_seed = (seed * 1000003 + k * len(sc.radios) + j) % (2**63)
            rx[radio.id] = apply_channel(tx, m, radio.id, sc.noise_floor_dbm_hz, sub_seed)
        steps.append(TimelineStep(t_s=t, matrix=m, rx=rx))
    return steps


def power_dbm(buf: IqBuffer) -> float:
    """Mean sample power on the |x|^2 = mW convention."""
    p = float(np.mean(np.abs(buf.samples) ** 2))
    if p <= 0:
        return -math.inf
    return 10 * math.log10(p)


# --- scenario files ----------------------------------------------------------

def load_empirical_matrix(path: str | Path) -> Empirical:
    """Plain-text matrix-per-timestamp records:

        ids: alpha beta gamma
        t 0.0
        0 80.0 91.2
        80.0 0 85.5
        91.2 85.5 0
        t 2.5
        ...
    """
    lines = [
        ln.strip()
        for ln in Path(path).read_text().splitlines()
        if ln.strip() and not ln.strip().startswith("#")
    ]
    if not lines or not lines[0].startswith("ids:"):
        raise ParseError(f"{path}: expected leading 'ids:' line")
    ids = tuple(lines[0].split(":", 1)[1].split())
    n = len(ids)
    times = []
    matrices = []
    i = 1
    while i < len(lines):
        if not lines[i].startswith("t "):
            raise ParseError(f"{path}: expected 't <seconds>' at line {i + 1}")
        try:
            times.append(float(lines[i].split()[1]))
            rows = []
            for k in range(n):
                row = tuple(float(v) for v in lines[i + 1 + k].split())
                if len(row) != n:
                    raise ParseError(f"{path}: row of {len(row)} values, expected {n}")
                rows.append(row)
        except (IndexError, ValueError) as exc:
            raise ParseError(f"{path}: bad matrix record: {exc}") from exc
        matrices.append(tuple(rows))
        i += 1 + n
    try:
        return Empirical(ids=ids, times_s=tuple(times), matrices=tuple(matrices))
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _build_model(raw: Mapping, base_dir: Path) -> Model:
    kind = raw.get("kind")
    if kind == "FreeSpace":
        return FreeSpace()
    if kind == "LogDistance":
        return LogDistance(
            exponent=float(raw.get("exponent", 2.0)), d0_m=float(raw.get("d0_m", 1.0))
        )
    if kind == "Empirical":
        if "matrix_file" not in raw:
            raise ValidationError("matrix_file", "Empirical model requires matrix_file")
        return load_empirical_matrix(base_dir / raw["matrix_file"])
    raise ValidationError("kind", f"unknown propagation model {kind!r}")


def load_scenario(source: Union[str, Path, Mapping]) -> ChannelScenario:
    """Build a scenario from a mapping, a YAML string, or a file path."""
    base_dir = Path(".")
    if isinstance(source, Mapping):
        raw = source
    else:
        if isinstance(source, Path) or ("\n" not in str(source) and Path(source).exists()):
            base_dir = Path(source).parent
            text = Path(source).read_text()
        else:
            text = str(source)
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ParseError(f"scenario is not valid YAML: {exc}") from exc
        if not isinstance(raw, Mapping):
            raise ParseError("scenario document must be a mapping")
    try:
        radios = [
            Radio(
                id=str(r["id"]),
                kind=RadioKind(r.get("kind", "Virtual")),
                position_m=tuple(float(v) for v in r.get("position_m", (0, 0, 0))),
            )
            for r in raw.get("radios", [])
        ]
        keyframes = [
            Keyframe(
                t_s=float(k["t_s"]),
                positions={
                    str(rid): tuple(float(v) for v in pos)
                    for rid, pos in k.get("positions", {}).items()
                },
            )
            for k in raw.get("keyframes", [])
        ]
        noise = raw.get("noise_floor_dbm_hz")
        return ChannelScenario(
            radios=radios,
            model=_build_model(raw.get("model", {"kind": "FreeSpace"}), base_dir),
            carrier_hz=float(raw.get("carrier_hz", 2.4e9)),
            keyframes=keyframes,
            noise_floor_dbm_hz=None if noise is None else float(noise),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad scenario document: {exc}") from exc
