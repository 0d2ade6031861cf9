"""Static resource pool: SDR devices, compute nodes, network fabric, licensed bands.

The inventory is loaded once from a structured document (YAML or JSON),
validated, and then treated as immutable: capacity changes require a
reload.  Every other subsystem allocates against it.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import yaml

from .errors import ParseError, ValidationError


class Attachment(str, Enum):
    """How a device reaches the RF medium: ceiling antennas or the cabled emulator."""

    OVER_THE_AIR = "OverTheAir"
    EMULATOR = "Emulator"


@dataclass(frozen=True)
class SdrDevice:
    """One RF front end (dual-device nodes group two of these)."""

    id: str
    node_id: str
    attachment: Attachment = Attachment.OVER_THE_AIR
    daughterboards: int = 2
    max_center_freq_hz: float = 6.0e9
    max_instant_bw_hz: float = 160.0e6  # per daughterboard
    tx_chains: int = 2
    rx_chains: int = 2

    def __post_init__(self):
        if self.max_instant_bw_hz <= 0:
            raise ValidationError("max_instant_bw_hz", f"must be > 0 (device {self.id})")
        if self.max_center_freq_hz <= self.max_instant_bw_hz / 2:
            raise ValidationError(
                "max_center_freq_hz",
                f"must exceed max_instant_bw_hz/2 (device {self.id})",
            )
        if self.tx_chains < 0:
            raise ValidationError("tx_chains", f"must be >= 0 (device {self.id})")
        if self.rx_chains < 0:
            raise ValidationError("rx_chains", f"must be >= 0 (device {self.id})")
        if self.daughterboards < 1:
            raise ValidationError("daughterboards", f"must be >= 1 (device {self.id})")


@dataclass(frozen=True)
class ComputeNode:
    """One rackmount host in the cluster."""

    id: str
    cores: int = 24  # dual 12-core sockets
    clock_ghz: float = 3.0
    ram_gb: float = 128
    ram_max_gb: float = 1540
    storage_gb: float = 1000

    def __post_init__(self):
        if self.cores < 1:
            raise ValidationError("cores", f"must be >= 1 (node {self.id})")
        if self.ram_gb > self.ram_max_gb:
            raise ValidationError("ram_gb", f"exceeds ram_max_gb (node {self.id})")
        if self.ram_gb < 0 or self.storage_gb < 0:
            raise ValidationError("ram_gb", f"must be >= 0 (node {self.id})")


@dataclass(frozen=True)
class NetworkFabric:
    """The shared switch interconnecting hosts and radios."""

    ports: int = 96
    port_rate_bps: float = 10.0e9
    base_latency_ns: float = 550

    def __post_init__(self):
        if self.ports < 1:
            raise ValidationError("ports", "must be >= 1")
        if self.port_rate_bps <= 0:
            raise ValidationError("port_rate_bps", "must be > 0")

    @property
    def capacity_bps(self) -> float:
        return self.ports * self.port_rate_bps


@dataclass(frozen=True)
class LicensedBand:
    """An experimental license grant; edges are inclusive on both ends."""

    low_hz: float
    high_hz: float
    label: str = ""

    def __post_init__(self):
        if not self.low_hz < self.high_hz:
            raise ValidationError("low_hz", f"must be < high_hz (band {self.label!r})")

    def contains(self, f_hz: float) -> bool:
        return self.low_hz <= f_hz <= self.high_hz

    def contains_span(self, low_hz: float, high_hz: float) -> bool:
        return self.low_hz <= low_hz and high_hz <= self.high_hz


@dataclass(frozen=True)
class Inventory:
    """The validated, immutable resource pool."""

    sdr_devices: tuple[SdrDevice, ...] = ()
    compute_nodes: tuple[ComputeNode, ...] = ()
    fabric: NetworkFabric = field(default_factory=NetworkFabric)
    licensed_bands: tuple[LicensedBand, ...] = ()
    software_catalog: tuple[str, ...] = ()

    def __post_init__(self):
        seen = set()
        for dev in self.sdr_devices:
            if dev.id in seen:
                raise ValidationError("sdr_devices", f"duplicate device id {dev.id!r}")
            seen.add(dev.id)
        seen = set()
        for node in self.compute_nodes:
            if node.id in seen:
                raise ValidationError("compute_nodes", f"duplicate node id {node.id!r}")
            seen.add(node.id)
        per_node = {}
        for dev in self.sdr_devices:
            per_node[dev.node_id] = per_node.get(dev.node_id, 0) + 1
            if per_node[dev.node_id] > 2:
                raise ValidationError(
                    "node_id", f"node {dev.node_id!r} groups more than 2 devices"
                )

    def device(self, device_id: str) -> SdrDevice:
        for dev in self.sdr_devices:
            if dev.id == device_id:
                return dev
        raise KeyError(device_id)

    def node(self, node_id: str) -> ComputeNode:
        for n in self.compute_nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def devices_by_attachment(self, attachment: Attachment) -> tuple[SdrDevice, ...]:
        return tuple(d for d in self.sdr_devices if d.attachment == attachment)

    def sdr_node_ids(self) -> tuple[str, ...]:
        out = []
        for dev in self.sdr_devices:
            if dev.node_id not in out:
                out.append(dev.node_id)
        return tuple(out)

    def to_dict(self) -> dict:
        d = asdict(self)
        for dev in d["sdr_devices"]:
            dev["attachment"] = dev["attachment"].value
        d["sdr_devices"] = list(d["sdr_devices"])
        d["compute_nodes"] = list(d["compute_nodes"])
        d["licensed_bands"] = list(d["licensed_bands"])
        d["software_catalog"] = list(d["software_catalog"])
        return d

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


@dataclass(frozen=True)
class CapacityReport:
    """Pool totals per resource class; all sums over the member lists.

    ``total_instant_bw_per_dual_node_hz`` is the largest per-node sum of
    device instantaneous bandwidths: each device streams one
    daughterboard's worth at a time, so a dual-device node tops out at
    twice the per-device figure.
    """

    n_compute_nodes: int = 0
    total_cores: int = 0
    total_ram_gb: float = 0
    total_ram_max_gb: float = 0
    total_storage_gb: float = 0
    n_sdr_devices: int = 0
    n_ota_devices: int = 0
    n_emulator_devices: int = 0
    total_tx_chains: int = 0
    total_rx_chains: int = 0
    total_instant_bw_per_dual_node_hz: float = 0
    fabric_ports: int = 0
    fabric_capacity_bps: float = 0
    n_licensed_bands: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _coerce_numbers(raw: dict, int_fields: tuple, float_fields: tuple) -> dict:
    # YAML 1.1 reads "6.0e9" as a string; accept either spelling.
    out = dict(raw)
    for name in int_fields:
        if name in out:
            try:
                out[name] = int(out[name])
            except (TypeError, ValueError):
                raise ValidationError(name, f"not an integer: {out[name]!r}") from None
    for name in float_fields:
        if name in out:
            try:
                out[name] = float(out[name])
            except (TypeError, ValueError):
                raise ValidationError(name, f"not a number: {out[name]!r}") from None
    return out


def _build_device(raw: dict, index: int) -> SdrDevice:
    if "id" not in raw:
        raise ValidationError("sdr_devices", f"device #{index} missing id")
    if "node_id" not in raw:
        raise ValidationError("node_id", f"device {raw['id']!r} missing node_id")
    kwargs = _coerce_numbers(
        raw,
        ("daughterboards", "tx_chains", "rx_chains"),
        ("max_center_freq_hz", "max_instant_bw_hz"),
    )
    att = kwargs.get("attachment")
    if att is not None:
        try:
            kwargs["attachment"] = Attachment(att)
        except ValueError:
            raise ValidationError("attachment", f"unknown attachment {att!r}") from None
    try:
        return SdrDevice(**kwargs)
    except TypeError as exc:
        raise ValidationError("sdr_devices", str(exc)) from None


def _build_node(raw: dict, index: int) -> ComputeNode:
    if "id" not in raw:
        raise ValidationError("compute_nodes", f"node #{index} missing id")
    kwargs = _coerce_numbers(
        raw, ("cores",), ("clock_ghz", "ram_gb", "ram_max_gb", "storage_gb")
    )
    try:
        return ComputeNode(**kwargs)
    except TypeError as exc:
        raise ValidationError("compute_nodes", str(exc)) from None


def load_inventory(source) -> Inventory:
    """Load and validate an inventory document.

    ``source`` may be a mapping, a YAML/JSON string, or a path to a file.
    Omitted fields take the documented defaults.  Raises ParseError for a
    malformed document, ValidationError (naming the field) for an
    invariant violation.
    """
    if isinstance(source, Path):
        if not source.exists():
            raise ParseError(f"no such inventory file: {source}")
        text = source.read_text()
    elif isinstance(source, str) and "\n" not in source and Path(source).exists():
        text = Path(source).read_text()
    else:
        text = source
    if isinstance(text, str):
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ParseError(f"inventory document does not parse: {exc}") from None
    else:
        doc = text
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ParseError("inventory document must be a mapping at top level")
    known = {"sdr_devices", "compute_nodes", "fabric", "licensed_bands", "software_catalog"}
    unknown = set(doc) - known
    if unknown:
        raise ParseError(f"unknown top-level keys: {sorted(unknown)}")

    devices = tuple(
        _build_device(raw, i) for i, raw in enumerate(doc.get("sdr_devices") or [])
    )
    nodes = tuple(_build_node(raw, i) for i, raw in enumerate(doc.get("compute_nodes") or []))
    try:
        fabric = NetworkFabric(
            **_coerce_numbers(doc.get("fabric") or {}, ("ports",), ("port_rate_bps", "base_latency_ns"))
        )
    except TypeError as exc:
        raise ValidationError("fabric", str(exc)) from None
    bands = []
    for i, raw in enumerate(doc.get("licensed_bands") or []):
        try:
            bands.append(LicensedBand(**_coerce_numbers(raw, (), ("low_hz", "high_hz"))))
        except TypeError as exc:
            raise ValidationError("licensed_bands", str(exc)) from None
    catalog = tuple(str(s) for s in (doc.get("software_catalog") or []))
    return Inventory(
        sdr_devices=devices,
        compute_nodes=nodes,
        fabric=fabric,
        licensed_bands=tuple(bands),
        software_catalog=catalog,
    )


def default_inventory_path() -> Path:
    return Path(str(importlib.resources.files("sdrlab") / "data" / "default_inventory.yaml"))


def default_inventory() -> Inventory:
    """The inventory document shipped with the package."""
    return load_inventory(default_inventory_path())


def capacity_summary(inv: Inventory) -> CapacityReport:
    """Deterministic pool totals per resource class."""
    per_node_bw = {}
    for dev in inv.sdr_devices:
        per_node_bw[dev.node_id] = per_node_bw.get(dev.node_id, 0.0) + dev.max_instant_bw_hz
    return CapacityReport(
        n_compute_nodes=len(inv.compute_nodes),
        total_cores=sum(n.cores for n in inv.compute_nodes),
        total_ram_gb=sum(n.ram_gb for n in inv.compute_nodes),
        total_ram_max_gb=sum(n.ram_max_gb for n in inv.compute_nodes),
        total_storage_gb=sum(n.storage_gb for n in inv.compute_nodes),
        n_sdr_devices=len(inv.sdr_devices),
        n_ota_devices=len(inv.devices_by_attachment(Attachment.OVER_THE_AIR)),
        n_emulator_devices=len(inv.devices_by_attachment(Attachment.EMULATOR)),
        total_tx_chains=sum(d.tx_chains for d in inv.sdr_devices),
        total_rx_chains=sum(d.rx_chains for d in inv.sdr_devices),
        total_instant_bw_per_dual_node_hz=max(per_node_bw.values(), default=0.0),
        fabric_ports=inv.fabric.ports,
        fabric_capacity_bps=inv.fabric.capacity_bps,
        n_licensed_bands=len(inv.licensed_bands),
    )


def band_containing(inv: Inventory, f_hz: float) -> Optional[LicensedBand]:
    """The licensed band whose inclusive [low, high] contains f_hz, if any."""
    for band in inv.licensed_bands:
        if band.contains(f_hz):
            return band
    return None


def band_containing_span(inv: Inventory, low_hz: float, high_hz: float) -> Optional[LicensedBand]:
    """The licensed band fully containing [low_hz, high_hz], if any."""
    for band in inv.licensed_bands:
        if band.contains_span(low_hz, high_hz):
            return band
    return None
