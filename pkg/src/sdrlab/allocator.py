"""Binding admitted reservations to concrete resources.

Planning helpers (slot planning, throughput arithmetic, pipeline
placement) are pure; the AllocatorPool mutates shared free-resource
state and is serialized by the scheduler's single writer.  Heuristics
are deliberately simple: first-fit ascending for spectrum, first-fit
decreasing by RAM for VMs, greedy topological order for pipelines.  A
heuristic may miss a feasible packing; it never returns an invalid one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .blocks import (
    SpectrumBlock,
    SpectrumSlot,
    pair_guard_hz,
    slots_disjoint,
)
from .errors import AllocationError, NoFitError, PlacementError, ValidationError
from .inventory import Attachment, ComputeNode, Inventory, NetworkFabric
from .reservation import ResourceSpec

BLOCK_BW_CAP_HZ = 320e6


def slot_rate_for(block_rate_sps: float, bw_hz: float) -> float:
    """Largest integer-divisor rate of the block rate giving at least 25%
    oversampling over the slot bandwidth."""
    k = int(block_rate_sps // (1.25 * bw_hz))
    if k < 1:
        raise NoFitError(f"slot of {bw_hz} Hz cannot fit a {block_rate_sps} sps block")
    return block_rate_sps / k


def plan_spectrum_slots(
    block: SpectrumBlock,
    bw_hz: float,
    preferred_offset_hz: Optional[float] = None,
    owner: str = "",
) -> SpectrumSlot:
    """Choose a slot for the request: the preferred offset when it fits
    (guards included), else first fit scanning ascending offsets.  The
    block is not modified."""
    if bw_hz <= 0:
        raise ValidationError("bw_hz", "must be > 0")
    rate = slot_rate_for(block.sample_rate_sps, bw_hz)

    def fits(offset: float) -> bool:
        cand = SpectrumSlot(offset_hz=offset, bw_hz=bw_hz, owner=owner, slot_rate_sps=rate)
        half = block.block_bw_hz / 2
        if cand.low_hz < -half - 1e-6 or cand.high_hz > half + 1e-6:
            return False
        return all(slots_disjoint(cand, s) for s in block.slots)

    if preferred_offset_hz is not None and fits(preferred_offset_hz):
        return SpectrumSlot(preferred_offset_hz, bw_hz, owner, rate)
    # candidate positions: block low edge, then just past each slot's guard
    candidates = [-block.block_bw_hz / 2 + bw_hz / 2]
    for s in sorted(block.slots, key=lambda s: s.offset_hz):
        candidates.append(s.high_hz + pair_guard_hz(s.bw_hz, bw_hz) + bw_hz / 2)
    for offset in candidates:
        if fits(offset):
            return SpectrumSlot(offset, bw_hz, owner, rate)
    raise NoFitError(f"no {bw_hz / 1e6:.1f} MHz gap left in block on {block.node_id}")


@dataclass(frozen=True)
class ThroughputReport:
    required_bps: float
    capacity_bps: float

    @property
    def fit(self) -> bool:
        return self.required_bps <= self.capacity_bps

    @property
    def verdict(self) -> str:
        return "Fit" if self.fit else "Exceeds"


def throughput_check(
    block: SpectrumBlock, fabric: NetworkFabric, n_streams: int = 1
) -> ThroughputReport:
    """Bits per second to stream the block against one fabric port."""
    required = block.sample_rate_sps * block.sample_format.bytes_per_complex * 8 * n_streams
    return ThroughputReport(required_bps=required, capacity_bps=fabric.port_rate_bps)


# --- pipeline placement ------------------------------------------------------

@dataclass(frozen=True)
class PipelineTask:
    id: str
    cores: int
    ram_gb: float


@dataclass(frozen=True)
class PipelineEdge:
    src: str
    dst: str
    rate_bps: float


@dataclass(frozen=True)
class PipelineGraph:
    tasks: tuple[PipelineTask, ...]
    edges: tuple[PipelineEdge, ...]

    def __post_init__(self):
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise ValidationError("tasks", "duplicate task ids")
        known = set(ids)
        for e in self.edges:
            if e.src not in known or e.dst not in known:
                raise ValidationError("edges", f"edge {e.src}->{e.dst} names unknown task")
            if e.rate_bps < 0:
                raise ValidationError("edges", "edge rates must be >= 0")

    def topo_order(self) -> list[PipelineTask]:
        """Kahn's algorithm; raises if the graph has a cycle."""
        indeg = {t.id: 0 for t in self.tasks}
        for e in self.edges:
            indeg[e.dst] += 1
        ready = [t for t in self.tasks if indeg[t.id] == 0]
        order = []
        while ready:
            t = ready.pop(0)
            order.append(t)
            for e in self.edges:
                if e.src == t.id:
                    indeg[e.dst] -= 1
                    if indeg[e.dst] == 0:
                        ready.append(next(x for x in self.tasks if x.id == e.dst))
        if len(order) != len(self.tasks):
            raise ValidationError("edges", "pipeline graph has a cycle")
        return order


def place_pipeline(
    g: PipelineGraph, inv: Inventory, live: Sequence["Allocation"] = ()
) -> dict[str, str]:
    """Map tasks to compute nodes in topological order, preferring the
    node that already hosts a predecessor (co-located edges cost no
    network).  Cross-node edges charge their rate against both endpoint
    port budgets."""
    free_cores = {n.id: n.cores for n in inv.compute_nodes}
    free_ram = {n.id: float(n.ram_gb) for n in inv.compute_nodes}
    for alloc in live:
        for vm in alloc.vm_placements:
            free_cores[vm.compute_node_id] -= vm.cores
            free_ram[vm.compute_node_id] -= vm.ram_gb
    port_budget = {n.id: inv.fabric.port_rate_bps for n in inv.compute_nodes}
    placement: dict[str, str] = {}

    def edge_charges(task_id: str, node_id: str) -> list[tuple[str, float]]:
        charges = []
        for e in g.edges:
            other = None
            if e.src == task_id and e.dst in placement:
                other = placement[e.dst]
            elif e.dst == task_id and e.src in placement:
                other = placement[e.src]
            if other is not None and other != node_id:
                charges.append((node_id, e.rate_bps))
                charges.append((other, e.rate_bps))
        return charges

    for task in g.topo_order():
        preds = [placement[e.src] for e in g.edges if e.dst == task.id and e.src in placement]
        ordered = sorted(
            (n.id for n in inv.compute_nodes),
            key=lambda nid: (0 if nid in preds else 1, nid),
        )
        chosen = None
        for nid in ordered:
            if free_cores[nid] < task.cores or free_ram[nid] < task.ram_gb:
                continue
            charges = edge_charges(task.id, nid)
            totals: dict[str, float] = {}
            for node, rate in charges:
                totals[node] = totals.get(node, 0.0) + rate
            if any(port_budget[node] < rate for node, rate in totals.items()):
                continue
            chosen = nid
            for node, rate in charges:
                port_budget[node] -= rate
            break
        if chosen is None:
            raise PlacementError(f"no node can host task {task.id!r}")
        free_cores[chosen] -= task.cores
        free_ram[chosen] -= task.ram_gb
        placement[task.id] = chosen
    return placement


def ffd_feasible(
    demands: Iterable[tuple[int, float]], nodes: Sequence[ComputeNode]
) -> bool:
    """First-fit-decreasing by RAM over (cores, ram_gb) demands.  A True
    answer is always realizable; False may be conservative."""
    free = [(n.cores, float(n.ram_gb)) for n in nodes]
    for cores, ram in sorted(demands, key=lambda d: d[1], reverse=True):
        for i, (fc, fr) in enumerate(free):
            if fc >= cores and fr >= ram:
                free[i] = (fc - cores, fr - ram)
                break
        else:
            return False
    return True


# --- binding -----------------------------------------------------------------

@dataclass(frozen=True)
class VmPlacement:
    compute_node_id: str
    cores: int
    ram_gb: float
    storage_gb: float
    lifetime_s: float


@dataclass(frozen=True)
class Allocation:
    reservation_id: str
    devices: tuple[str, ...]
    vm_placements: tuple[VmPlacement, ...]
    slots: tuple[tuple[str, SpectrumSlot], ...]  # (node_id, slot)
    network_bps_reserved: float


class AllocatorPool:
    """Mutable free-resource state over an immutable inventory."""

    def __init__(self, inv: Inventory):
        self.inv = inv
        self.free_devices = {d.id for d in inv.sdr_devices}
        self.free_cores = {n.id: n.cores for n in inv.compute_nodes}
        self.free_ram = {n.id: float(n.ram_gb) for n in inv.compute_nodes}
        self.free_storage = {n.id: float(n.storage_gb) for n in inv.compute_nodes}
        self.blocks: dict[str, SpectrumBlock] = {}
        self.network_reserved_bps = 0.0
        self.live: dict[str, Allocation] = {}

    # -- queries --

    def allocation(self, reservation_id: str) -> Optional[Allocation]:
        return self.live.get(reservation_id)

    def free_device_count(self, path: Attachment) -> int:
        return sum(
            1
            for d in self.inv.sdr_devices
            if d.attachment is path and d.id in self.free_devices
        )

    def network_headroom_bps(self) -> float:
        return self.inv.fabric.capacity_bps - self.network_reserved_bps

    # -- binding --

    def _node_block_bw(self, node_id: str) -> float:
        devs = [d for d in self.inv.sdr_devices if d.node_id == node_id]
        return min(sum(d.max_instant_bw_hz for d in devs), BLOCK_BW_CAP_HZ)

    def bind(self, reservation_id: str, spec: ResourceSpec) -> Allocation:
        """All-or-nothing: choices are planned against copies and only
        committed once every resource class succeeds."""
        if reservation_id in self.live:
            raise AllocationError("reservation", f"{reservation_id} already bound")
        # devices, greedy in inventory order on the requested path
        wanted = spec.radio.n_usrps
        chosen_devices = [
            d
            for d in self.inv.sdr_devices
            if d.attachment is spec.radio.path and d.id in self.free_devices
        ][:wanted]
        if len(chosen_devices) < wanted:
            raise AllocationError(
                "devices",
                f"need {wanted} on the {spec.radio.path.value} path, "
                f"{len(chosen_devices)} free",
            )
        # spectrum slots on the chosen devices' nodes, planned on clones
        node_ids = []
        for d in chosen_devices:
            if d.node_id not in node_ids:
                node_ids.append(d.node_id)
        trial_blocks = {nid: blk.clone() for nid, blk in self.blocks.items()}
        planned_slots: list[tuple[str, SpectrumSlot]] = []
        for ch in spec.radio.channels:
            placed = False
            for nid in node_ids:
                blk = trial_blocks.get(nid)
                if blk is None:
                    blk = SpectrumBlock(
                        node_id=nid, center_hz=ch.center_hz,
                        block_bw_hz=self._node_block_bw(nid),
                    )
                    trial_blocks[nid] = blk
                try:
                    slot = plan_spectrum_slots(
                        blk,
                        ch.bw_hz,
                        preferred_offset_hz=ch.center_hz - blk.center_hz,
                        owner=reservation_id,
                    )
                except NoFitError:
                    continue
                blk.add_slot(slot)
                planned_slots.append((nid, slot))
                placed = True
                break
            if not placed:
                raise AllocationError(
                    "spectrum", f"no slot for {ch.bw_hz / 1e6:.1f} MHz channel"
                )
        # one VM on the first node with room, first-fit over inventory order
        c = spec.compute
        vm_node = None
        for n in self.inv.compute_nodes:
            if (
                self.free_cores[n.id] >= c.cpu_cores
                and self.free_ram[n.id] >= c.ram_gb
                and self.free_storage[n.id] >= c.storage_gb
            ):
                vm_node = n.id
                break
        if vm_node is None and (c.cpu_cores or c.ram_gb or c.storage_gb):
            raise AllocationError("compute", "no compute node fits the VM")
        # network headroom
        if spec.network.requested_bps > self.network_headroom_bps():
            raise AllocationError(
                "network",
                f"{spec.network.requested_bps:.3g} bps requested, "
                f"{self.network_headroom_bps():.3g} free",
            )
        # commit
        placements = ()
        if vm_node is not None:
            placements = (
                VmPlacement(vm_node, c.cpu_cores, c.ram_gb, c.storage_gb, c.vm_lifetime_s),
            )
            self.free_cores[vm_node] -= c.cpu_cores
            self.free_ram[vm_node] -= c.ram_gb
            self.free_storage[vm_node] -= c.storage_gb
        for d in chosen_devices:
            self.free_devices.remove(d.id)
        self.blocks = trial_blocks
        self.network_reserved_bps += spec.network.requested_bps
        alloc = Allocation(
            reservation_id=reservation_id,
            devices=tuple(d.id for d in chosen_devices),
            vm_placements=placements,
            slots=tuple(planned_slots),
            network_bps_reserved=spec.network.requested_bps,
        )
        self.live[reservation_id] = alloc
        return alloc

    def release(self, reservation_id: str) -> None:
        """Return everything the allocation held; no-op if not live."""
        alloc = self.live.pop(reservation_id, None)
        if alloc is None:
            return
        for dev in alloc.devices:
            self.free_devices.add(dev)
        for vm in alloc.vm_placements:
            self.free_cores[vm.compute_node_id] += vm.cores
            self.free_ram[vm.compute_node_id] += vm.ram_gb
            self.free_storage[vm.compute_node_id] += vm.storage_gb
        for node_id, slot in alloc.slots:
            blk = self.blocks.get(node_id)
            if blk is not None:
                blk.slots = [s for s in blk.slots if s != slot]
                if not blk.slots:
                    del self.blocks[node_id]
        self.network_reserved_bps -= alloc.network_bps_reserved
