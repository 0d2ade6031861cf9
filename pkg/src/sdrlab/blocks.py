"""Spectrum blocks and the frequency-offset slots carved out of them.

A block is one wide composite passband streamed to or from a dual-device
node; slots are the sub-intervals individual reservations own.  Slot
geometry (guard bands, disjointness) lives here so both the allocator's
planner and the signal engine agree on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ValidationError

GUARD_FRACTION = 0.1
GUARD_FLOOR_HZ = 100e3


class SampleFormat(str, Enum):
    """Complex sample wire formats."""

    SC16 = "SC16"  # 16-bit I + 16-bit Q, 4 bytes per complex sample
    SC8 = "SC8"  # 8-bit I + 8-bit Q, 2 bytes per complex sample
    FLOAT64 = "float64"  # file/archive format only, 16 bytes per complex sample

    @property
    def bytes_per_complex(self) -> int:
        return {"SC16": 4, "SC8": 2, "float64": 16}[self.value]


def guard_hz(bw_hz: float) -> float:
    """Unused spectrum kept beside a slot of the given width."""
    return max(GUARD_FRACTION * bw_hz, GUARD_FLOOR_HZ)


def pair_guard_hz(bw_a: float, bw_b: float) -> float:
    return max(guard_hz(bw_a), guard_hz(bw_b))


def default_sample_rate(block_bw_hz: float) -> float:
    """25% oversampling, rounded up to a whole number of MHz."""
    return math.ceil(1.25 * block_bw_hz / 1e6) * 1e6


@dataclass(frozen=True)
class SpectrumSlot:
    """A reservation-owned frequency interval, centered offset_hz from block center."""

    offset_hz: float
    bw_hz: float
    owner: str
    slot_rate_sps: float

    def __post_init__(self):
        if self.bw_hz <= 0:
            raise ValidationError("bw_hz", "slot bandwidth must be > 0")
        if self.slot_rate_sps < self.bw_hz:
            raise ValidationError("slot_rate_sps", "slot rate must cover slot bandwidth")

    @property
    def low_hz(self) -> float:
        return self.offset_hz - self.bw_hz / 2

    @property
    def high_hz(self) -> float:
        return self.offset_hz + self.bw_hz / 2


def slots_disjoint(a: SpectrumSlot, b: SpectrumSlot) -> bool:
    """Centers at least half-widths plus the pairwise guard apart."""
    min_sep = (a.bw_hz + b.bw_hz) / 2 + pair_guard_hz(a.bw_hz, b.bw_hz)
    return abs(a.offset_hz - b.offset_hz) >= min_sep - 1e-6


def integer_ratio(numerator: float, denominator: float):
    """The exact integer ratio numerator/denominator, or None."""
    if denominator <= 0:
        return None
    ratio = numerator / denominator
    rounded = round(ratio)
    if rounded >= 1 and abs(ratio - rounded) < 1e-9:
        return rounded
    return None


@dataclass
class SpectrumBlock:
    """A composite passband on one node, subdivided into owned slots."""

    node_id: str
    center_hz: float
    block_bw_hz: float
    sample_rate_sps: float = 0.0
    sample_format: SampleFormat = SampleFormat.SC16
    slots: list[SpectrumSlot] = field(default_factory=list)

    def __post_init__(self):
        if self.block_bw_hz <= 0:
            raise ValidationError("block_bw_hz", "must be > 0")
        if not self.sample_rate_sps:
            self.sample_rate_sps = default_sample_rate(self.block_bw_hz)
        if self.sample_rate_sps < self.block_bw_hz:
            raise ValidationError(
                "sample_rate_sps", "complex baseband rate must cover the block bandwidth"
            )
        if self.sample_format not in (SampleFormat.SC16, SampleFormat.SC8):
            raise ValidationError("sample_format", "blocks stream SC16 or SC8")
        for slot in self.slots:
            self._check_slot(slot, self.slots)

    def _check_slot(self, slot: SpectrumSlot, against) -> None:
        half = self.block_bw_hz / 2
        if slot.low_hz < -half - 1e-6 or slot.high_hz > half + 1e-6:
            raise ValidationError("offset_hz", "slot extends outside the block passband")
        if integer_ratio(self.sample_rate_sps, slot.slot_rate_sps) is None:
            raise ValidationError(
                "slot_rate_sps", "block rate must be an integer multiple of the slot rate"
            )
        for other in against:
            if other is slot:
                continue
            if not slots_disjoint(slot, other):
                raise ValidationError("offset_hz", "slots overlap within guard bands")

    def add_slot(self, slot: SpectrumSlot) -> None:
        self._check_slot(slot, self.slots)
        self.slots.append(slot)

    def remove_owner(self, owner: str) -> None:
        self.slots = [s for s in self.slots if s.owner != owner]

    def free_of(self, owner: str) -> bool:
        return all(s.owner != owner for s in self.slots)

    def clone(self) -> "SpectrumBlock":
        return replace(self, slots=list(self.slots))
