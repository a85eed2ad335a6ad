"""Platform, link, and accuracy models plus their JSON formats and cost queries.

Per-layer latency/energy comes from externally supplied tables (one per
platform); link cost is an affine function of transmitted bits; accuracy is a
measured artifact consumed as either a constant or a per-cut table. All models
are immutable after load and every query is pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

_ALLOWED_BITS = (4, 8, 16, 32)


class CostError(ValueError):
    """A model document is invalid or a query cannot be answered."""


@dataclass(frozen=True)
class CostEntry:
    latency_s: float
    energy_j: float

    def __post_init__(self):
        for name in ("latency_s", "energy_j"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise CostError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class PlatformModel:
    """One accelerator: quantization width, memory capacity, per-layer cost table."""

    name: str
    bits: int
    mem_capacity_bytes: int
    cost_table: dict[str, CostEntry] = field(default_factory=dict)
    default_cost: CostEntry | None = None

    def __post_init__(self):
        if self.bits not in _ALLOWED_BITS:
            raise CostError(f"platform {self.name!r}: bits must be one of {_ALLOWED_BITS}, got {self.bits}")
        if not isinstance(self.mem_capacity_bytes, int) or self.mem_capacity_bytes <= 0:
            raise CostError(f"platform {self.name!r}: mem_capacity_bytes must be a positive integer")


@dataclass(frozen=True)
class LinkModel:
    """Inter-platform transport: affine latency/energy in the transmitted bits."""

    name: str
    bandwidth_bps: float
    fixed_latency_s: float = 0.0
    energy_per_bit_j: float = 0.0
    fixed_energy_j: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.bandwidth_bps) or self.bandwidth_bps <= 0:
            raise CostError(f"link {self.name!r}: bandwidth_bps must be finite and > 0")
        for name in ("fixed_latency_s", "energy_per_bit_j", "fixed_energy_j"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise CostError(f"link {self.name!r}: {name} must be finite and >= 0")


@dataclass(frozen=True)
class AccuracyModel:
    """Measured top-1 accuracy per partitioning choice.

    kind "constant" reports one value for every scheme. kind "cut_table" maps
    the id of the last layer executed before the precision drop to a top-1
    fraction, with an optional fallback for uncovered cuts.
    """

    kind: str
    constant_top1: float | None = None
    table: dict[str, float] = field(default_factory=dict)
    fallback: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "cut_table"):
            raise CostError(f"accuracy kind must be 'constant' or 'cut_table', got {self.kind!r}")
        if self.kind == "constant":
            if self.constant_top1 is None:
                raise CostError("constant accuracy model needs a top1 value")
            _check_fraction("top1", self.constant_top1)
        else:
            for lid, v in self.table.items():
                _check_fraction(f"entry {lid!r}", v)
            if self.fallback is not None:
                _check_fraction("fallback", self.fallback)


def _check_fraction(what: str, v: float) -> None:
    if not math.isfinite(v) or not 0.0 <= v <= 1.0:
        raise CostError(f"accuracy {what} must lie in [0, 1], got {v!r}")


def layer_cost(platform: PlatformModel, layer_id: str) -> CostEntry:
    """Table lookup with optional platform-wide default."""
    entry = platform.cost_table.get(layer_id)
    if entry is not None:
        return entry
    if platform.default_cost is not None:
        return platform.default_cost
    raise CostError(f"uncosted layer {layer_id!r} on {platform.name}")


def link_transfer(link: LinkModel, bits: int) -> CostEntry:
    """Cost of moving `bits` over the link: fixed part plus proportional part."""
    if bits < 0:
        raise CostError(f"bits must be >= 0, got {bits}")
    return CostEntry(
        latency_s=link.fixed_latency_s + bits / link.bandwidth_bps,
        energy_j=link.fixed_energy_j + bits * link.energy_per_bit_j,
    )


def accuracy_eval(model, scheme, order, platform_bits=None) -> float:
    """Top-1 accuracy of a partitioning scheme.

    For a cut table the key is the last layer before the boundary where the
    bit width first drops below the running maximum along the chain (with two
    platforms: the single cut). Uniform bit widths or a cut at position 0 fall
    back to the declared fallback value.
    """
    if model.kind == "constant":
        return model.constant_top1

    boundary = _keying_boundary(scheme.cuts, platform_bits)
    if boundary is not None:
        pos = scheme.cuts[boundary]
        if pos > 0:
            key = order.order[pos - 1]
            if key in model.table:
                return model.table[key]
            if model.fallback is None:
                raise CostError(f"accuracy table does not cover cut after {key!r} and no fallback is set")
            return model.fallback
    if model.fallback is None:
        raise CostError("accuracy table has no applicable cut and no fallback is set")
    return model.fallback


def _keying_boundary(cuts, platform_bits) -> int | None:
    if not cuts:
        return None
    if len(cuts) == 1 or platform_bits is None:
        return 0
    running_max = platform_bits[0]
    for k in range(len(cuts)):
        if platform_bits[k + 1] < running_max:
            return k
        running_max = max(running_max, platform_bits[k + 1])
    return None


def platform_from_json(text: str) -> PlatformModel:
    doc = _load_object(text, "platform")
    _check_keys(doc, "platform", {"name", "bits", "mem_capacity_bytes"}, {"cost_table", "default_cost"})
    table = {}
    for lid, entry in doc.get("cost_table", {}).items():
        table[lid] = _cost_entry(entry, f"cost_table[{lid!r}]")
    default = doc.get("default_cost")
    return PlatformModel(
        name=doc["name"],
        bits=doc["bits"],
        mem_capacity_bytes=doc["mem_capacity_bytes"],
        cost_table=table,
        default_cost=_cost_entry(default, "default_cost") if default is not None else None,
    )


def link_from_json(text: str) -> LinkModel:
    doc = _load_object(text, "link")
    _check_keys(doc, "link", {"name", "bandwidth_bps"}, {"fixed_latency_s", "energy_per_bit_j", "fixed_energy_j"})
    return LinkModel(
        name=doc["name"],
        bandwidth_bps=float(doc["bandwidth_bps"]),
        fixed_latency_s=float(doc.get("fixed_latency_s", 0.0)),
        energy_per_bit_j=float(doc.get("energy_per_bit_j", 0.0)),
        fixed_energy_j=float(doc.get("fixed_energy_j", 0.0)),
    )


def accuracy_from_json(text: str) -> AccuracyModel:
    doc = _load_object(text, "accuracy")
    kind = doc.get("kind")
    if kind == "constant":
        _check_keys(doc, "accuracy", {"kind", "top1"}, set())
        return AccuracyModel(kind="constant", constant_top1=float(doc["top1"]))
    if kind == "cut_table":
        _check_keys(doc, "accuracy", {"kind", "entries"}, {"fallback"})
        entries = {lid: float(v) for lid, v in doc["entries"].items()}
        fb = doc.get("fallback")
        return AccuracyModel(kind="cut_table", table=entries, fallback=float(fb) if fb is not None else None)
    raise CostError(f"accuracy kind must be 'constant' or 'cut_table', got {kind!r}")


def _load_object(text: str, what: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CostError(f"malformed {what} document: {e}") from None
    if not isinstance(doc, dict):
        raise CostError(f"malformed {what} document: top level must be an object")
    return doc


def _check_keys(doc: dict, what: str, required: set[str], optional: set[str]) -> None:
    missing = required - set(doc)
    if missing:
        raise CostError(f"{what} document missing fields: {sorted(missing)}")
    unknown = set(doc) - required - optional
    if unknown:
        raise CostError(f"{what} document has unknown fields: {sorted(unknown)}")


def _cost_entry(entry, where: str) -> CostEntry:
    if not isinstance(entry, dict) or set(entry) != {"latency_s", "energy_j"}:
        raise CostError(f"{where} must be an object with latency_s and energy_j")
    return CostEntry(latency_s=float(entry["latency_s"]), energy_j=float(entry["energy_j"]))
