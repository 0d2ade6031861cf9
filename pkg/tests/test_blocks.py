import math
import random

import pytest

from sdrlab.blocks import (
    SampleFormat,
    SpectrumBlock,
    SpectrumSlot,
    default_sample_rate,
    guard_hz,
    integer_ratio,
    pair_guard_hz,
    slots_disjoint,
)
from sdrlab.errors import ValidationError


def overlap_with_guard(a: SpectrumSlot, b: SpectrumSlot) -> bool:
    """Brute-force interval check: do the slots' spans, each widened by
    half the pairwise guard, intersect?"""
    g = max(guard_hz(a.bw_hz), guard_hz(b.bw_hz))
    lo_a, hi_a = a.low_hz - g / 2, a.high_hz + g / 2
    lo_b, hi_b = b.low_hz - g / 2, b.high_hz + g / 2
    return hi_a > lo_b and hi_b > lo_a


def make_slot(offset, bw, rate=None, owner="r"):
    return SpectrumSlot(offset_hz=offset, bw_hz=bw, owner=owner, slot_rate_sps=rate or bw)


def test_guard_is_fraction_above_floor():
    assert guard_hz(2e6) == pytest.approx(200e3)
    assert guard_hz(100e6) == pytest.approx(10e6)


def test_guard_floor_for_narrow_slots():
    # 10% of 500 kHz would be 50 kHz; the 100 kHz floor wins
    assert guard_hz(500e3) == 100e3
    assert guard_hz(1e3) == 100e3


def test_pair_guard_takes_wider_slot():
    assert pair_guard_hz(2e6, 100e6) == pytest.approx(10e6)


def test_default_sample_rate_covers_320_mhz_block():
    assert default_sample_rate(320e6) == 400e6


def test_default_sample_rate_rounds_up_to_mhz():
    assert default_sample_rate(100e6) == 125e6
    assert default_sample_rate(1e6) == 2e6  # 1.25 MHz rounds up


def test_sample_format_wire_sizes():
    assert SampleFormat.SC16.bytes_per_complex == 4
    assert SampleFormat.SC8.bytes_per_complex == 2
    assert SampleFormat.FLOAT64.bytes_per_complex == 16


def test_slot_rejects_nonpositive_bandwidth():
    with pytest.raises(ValidationError):
        make_slot(0.0, -1e6)


def test_slot_rate_must_cover_bandwidth():
    with pytest.raises(ValidationError) as err:
        SpectrumSlot(offset_hz=0, bw_hz=10e6, owner="r", slot_rate_sps=5e6)
    assert err.value.field == "slot_rate_sps"


def test_disjointness_matches_interval_oracle():
    rng = random.Random(7)
    for _ in range(500):
        a = make_slot(rng.uniform(-150e6, 150e6), rng.uniform(1e5, 80e6))
        b = make_slot(rng.uniform(-150e6, 150e6), rng.uniform(1e5, 80e6))
        assert slots_disjoint(a, b) == (not overlap_with_guard(a, b))


def test_integer_ratio():
    assert integer_ratio(400e6, 100e6) == 4
    assert integer_ratio(400e6, 400e6) == 1
    assert integer_ratio(400e6, 120e6) is None
    assert integer_ratio(100e6, 400e6) is None  # sub-unity is not an integer ratio
    assert integer_ratio(1e6, 0) is None


def test_block_defaults():
    blk = SpectrumBlock(node_id="n", center_hz=1e9, block_bw_hz=320e6)
    assert blk.sample_rate_sps == 400e6
    assert blk.sample_format is SampleFormat.SC16


def test_block_rejects_rate_below_bandwidth():
    with pytest.raises(ValidationError):
        SpectrumBlock(node_id="n", center_hz=1e9, block_bw_hz=320e6, sample_rate_sps=300e6)


def test_block_streams_integer_formats_only():
    with pytest.raises(ValidationError):
        SpectrumBlock(
            node_id="n", center_hz=1e9, block_bw_hz=1e6, sample_format=SampleFormat.FLOAT64
        )


def test_add_slot_rejects_out_of_band():
    blk = SpectrumBlock(node_id="n", center_hz=1e9, block_bw_hz=100e6, sample_rate_sps=125e6)
    with pytest.raises(ValidationError):
        blk.add_slot(make_slot(45e6, 20e6, rate=12.5e6))  # upper edge at 55 MHz


def test_add_slot_rejects_fractional_rate_ratio():
    blk = SpectrumBlock(node_id="n", center_hz=1e9, block_bw_hz=100e6, sample_rate_sps=125e6)
    with pytest.raises(ValidationError) as err:
        blk.add_slot(make_slot(0, 20e6, rate=30e6))
    assert err.value.field == "slot_rate_sps"


def test_add_slot_rejects_guard_violation():
    blk = SpectrumBlock(node_id="n", center_hz=1e9, block_bw_hz=100e6, sample_rate_sps=125e6)
    blk.add_slot(make_slot(0, 20e6, rate=25e6, owner="a"))
    # centers 21 MHz apart, need 20 + 2 guard
    with pytest.raises(ValidationError):
        blk.add_slot(make_slot(21e6, 20e6, rate=25e6, owner="b"))


def test_remove_owner_frees_slots():
    blk = SpectrumBlock(node_id="n", center_hz=1e9, block_bw_hz=100e6, sample_rate_sps=125e6)
    blk.add_slot(make_slot(-30e6, 20e6, rate=25e6, owner="a"))
    blk.add_slot(make_slot(30e6, 20e6, rate=25e6, owner="b"))
    assert not blk.free_of("a")
    blk.remove_owner("a")
    assert blk.free_of("a")
    assert [s.owner for s in blk.slots] == ["b"]


def test_clone_is_independent():
    blk = SpectrumBlock(node_id="n", center_hz=1e9, block_bw_hz=100e6, sample_rate_sps=125e6)
    blk.add_slot(make_slot(0, 20e6, rate=25e6, owner="a"))
    dup = blk.clone()
    dup.remove_owner("a")
    assert not blk.free_of("a")
    assert dup.free_of("a")


def test_block_accepts_touching_edge_slot():
    # slot upper edge exactly at the passband edge is in-band
    blk = SpectrumBlock(node_id="n", center_hz=1e9, block_bw_hz=320e6, sample_rate_sps=400e6)
    blk.add_slot(make_slot(140e6, 40e6, rate=50e6))
    assert math.isclose(blk.slots[0].high_hz, 160e6)
