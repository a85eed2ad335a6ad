"""Evaluate one partitioning scheme into the full metric record.

A scheme assigns contiguous runs of the layer order to the platforms of the
chain. Per-frame latency and energy are the sums of stage and link costs;
steady-state pipeline throughput is bounded by the slowest stage or link;
memory demand and accuracy come from their modules. Constraint checks and the
weighted-cost scalarization used for final-point selection live here too.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .cost import (
    AccuracyModel,
    CostError,
    LinkModel,
    PlatformModel,
    accuracy_eval,
    layer_cost,
    link_transfer,
)
from .graph import DnnGraph, LayerOrder, cut_tensors
from .memory import MemoryReport, memory_feasible

METRICS = ("latency", "energy", "throughput", "bandwidth", "accuracy", "memory")
BENEFIT_METRICS = frozenset({"throughput", "accuracy"})


class EvaluationError(ValueError):
    """A scheme or system description cannot be evaluated."""


@dataclass(frozen=True)
class PartitionScheme:
    """Monotone cut positions splitting the layer order over an N-platform chain.

    cuts has N-1 entries; segment k is order[cuts[k-1] : cuts[k]] with virtual
    boundaries 0 and L. Equal neighboring cuts leave a platform empty.
    """

    cuts: tuple[int, ...]

    def __post_init__(self):
        prev = 0
        for c in self.cuts:
            if not isinstance(c, int) or isinstance(c, bool) or c < prev:
                raise EvaluationError(f"cuts must be non-decreasing non-negative integers, got {self.cuts}")
            prev = c

    def validate(self, num_layers: int, num_platforms: int) -> None:
        if len(self.cuts) != num_platforms - 1:
            raise EvaluationError(
                f"scheme has {len(self.cuts)} cuts but the chain has {num_platforms} platforms"
            )
        if self.cuts and self.cuts[-1] > num_layers:
            raise EvaluationError(f"cut {self.cuts[-1]} exceeds layer count {num_layers}")

    def segments(self, num_layers: int) -> list[tuple[int, int]]:
        bounds = [0, *self.cuts, num_layers]
        return [(bounds[k], bounds[k + 1]) for k in range(len(self.cuts) + 1)]

    def partition_count(self, num_layers: int) -> int:
        return sum(1 for lo, hi in self.segments(num_layers) if hi > lo)


@dataclass(frozen=True)
class Constraints:
    """Optional bounds; absent bounds are not checked. Comparisons are inclusive."""

    max_latency_s: float | None = None
    max_energy_j: float | None = None
    min_throughput_fps: float | None = None
    max_link_bits: int | None = None
    min_top1: float | None = None

    def __post_init__(self):
        for name in ("max_latency_s", "max_energy_j", "min_throughput_fps", "max_link_bits", "min_top1"):
            v = getattr(self, name)
            if v is not None and (not math.isfinite(v) or v <= 0):
                raise EvaluationError(f"constraint {name} must be finite and positive, got {v!r}")


@dataclass(frozen=True)
class ObjectiveWeights:
    """Coefficients of the weighted-cost sum over normalized metrics.

    Cost-like metrics (latency, energy, bandwidth, memory) enter as
    value/reference; benefit-like metrics (throughput, accuracy) as
    reference/value, so lower is uniformly better. references=None means
    "derive from the all-on-last-platform scheme" (see auto_references).
    """

    entries: dict[str, float]
    references: dict[str, float] | None = None

    def __post_init__(self):
        if not self.entries:
            raise EvaluationError("objective weights must name at least one metric")
        for name, coeff in self.entries.items():
            if name not in METRICS:
                raise EvaluationError(f"unknown metric {name!r}; expected one of {METRICS}")
            if not math.isfinite(coeff) or coeff < 0:
                raise EvaluationError(f"weight for {name!r} must be finite and >= 0")
        if not any(c > 0 for c in self.entries.values()):
            raise EvaluationError("objective weights need at least one nonzero coefficient")


@dataclass(frozen=True)
class SystemSpec:
    """The full problem: workload, order, platform chain, links, models, goals."""

    graph: DnnGraph
    order: LayerOrder
    platforms: tuple[PlatformModel, ...]
    links: tuple[LinkModel, ...]
    accuracy: AccuracyModel
    constraints: Constraints = field(default_factory=Constraints)
    weights: ObjectiveWeights = field(default_factory=lambda: ObjectiveWeights(entries={"latency": 1.0}))

    def __post_init__(self):
        if len(self.platforms) < 1:
            raise EvaluationError("system needs at least one platform")
        if len(self.links) != len(self.platforms) - 1:
            raise EvaluationError(
                f"chain of {len(self.platforms)} platforms needs {len(self.platforms) - 1} links, "
                f"got {len(self.links)}"
            )
        if set(self.order.order) != {l.id for l in self.graph.layers}:
            raise EvaluationError("order does not cover exactly the graph's layers")


@dataclass(frozen=True)
class EvaluationRecord:
    """All metrics of one evaluated scheme plus its feasibility verdict."""

    cuts: tuple[int, ...]
    latency_s: float
    energy_j: float
    throughput_fps: float
    stage_latencies: tuple[float, ...]
    link_latencies: tuple[float, ...]
    link_bits: tuple[int, ...]
    mem_bytes: tuple[int, ...]
    top1: float
    feasible: bool
    violated: tuple[str, ...]
    partition_count: int
    memory_report: MemoryReport = field(compare=False, repr=False)

    @property
    def link_bits_total(self) -> int:
        return sum(self.link_bits)

    def to_dict(self, platform_names: tuple[str, ...]) -> dict:
        d = {
            "cuts": list(self.cuts),
            "latency_s": self.latency_s,
            "energy_j": self.energy_j,
            "throughput_fps": self.throughput_fps,
            "link_bits": list(self.link_bits),
            "link_bits_total": self.link_bits_total,
            "top1": self.top1,
            "feasible": self.feasible,
            "violated": list(self.violated),
            "partition_count": self.partition_count,
        }
        for name, b in zip(platform_names, self.mem_bytes):
            d[f"mem_{name}_bytes"] = b
        return d


def throughput(stage_latencies, link_latencies) -> float:
    """Steady-state frames per second of the asynchronous pipeline.

    The pipeline is bounded by its slowest occupied stage or link; zero-latency
    entries (skipped platforms, idle links) do not hold a frame and are
    excluded. With nothing occupied the rate is unbounded (+inf).
    """
    worst = 0.0
    for d in list(stage_latencies) + list(link_latencies):
        if d < 0:
            raise EvaluationError(f"latency must be >= 0, got {d}")
        worst = max(worst, d)
    if worst == 0.0:
        return math.inf
    return 1.0 / worst


def evaluate_scheme(scheme: PartitionScheme, sys: SystemSpec) -> EvaluationRecord:
    """Produce the full metric record for one scheme."""
    graph, order = sys.graph, sys.order
    n_layers = graph.num_layers
    scheme.validate(n_layers, len(sys.platforms))
    segments = scheme.segments(n_layers)

    stage_lat: list[float] = []
    stage_en: list[float] = []
    for platform, (lo, hi) in zip(sys.platforms, segments):
        lat = en = 0.0
        for lid in order.order[lo:hi]:
            entry = layer_cost(platform, lid)
            lat += entry.latency_s
            en += entry.energy_j
        stage_lat.append(lat)
        stage_en.append(en)

    link_bits: list[int] = []
    link_lat: list[float] = []
    link_en: list[float] = []
    for k, cut in enumerate(scheme.cuts):
        merged = k > 0 and cut == scheme.cuts[k - 1]  # zero-length hop already charged
        if merged:
            bits = 0
        else:
            crossing = cut_tensors(graph, order, cut)
            elems = sum(graph.layer(lid).out_elems for lid in crossing)
            bits = elems * sys.platforms[k].bits
        link_bits.append(bits)
        if bits > 0:
            entry = link_transfer(sys.links[k], bits)
            link_lat.append(entry.latency_s)
            link_en.append(entry.energy_j)
        else:
            link_lat.append(0.0)
            link_en.append(0.0)

    total_latency = sum(stage_lat) + sum(link_lat)
    total_energy = sum(stage_en) + sum(link_en)
    fps = throughput(stage_lat, link_lat)

    mem_ok, mem_report = memory_feasible(graph, order, scheme, sys.platforms)
    mem_bytes = tuple(b for _, b in mem_report.per_platform_bytes)
    platform_bits = [p.bits for p in sys.platforms]
    top1 = accuracy_eval(sys.accuracy, scheme, order, platform_bits)

    violated = [
        f"mem_capacity:{p.name}"
        for p, b in zip(sys.platforms, mem_bytes)
        if b > p.mem_capacity_bytes
    ]
    record = EvaluationRecord(
        cuts=scheme.cuts,
        latency_s=total_latency,
        energy_j=total_energy,
        throughput_fps=fps,
        stage_latencies=tuple(stage_lat),
        link_latencies=tuple(link_lat),
        link_bits=tuple(link_bits),
        mem_bytes=mem_bytes,
        top1=top1,
        feasible=mem_ok,
        violated=tuple(violated),
        partition_count=scheme.partition_count(n_layers),
        memory_report=mem_report,
    )
    bounds_ok, bound_violations = check_constraints(record, sys.constraints)
    return replace(
        record,
        feasible=mem_ok and bounds_ok,
        violated=tuple(violated) + tuple(bound_violations),
    )


def check_constraints(rec: EvaluationRecord, constraints: Constraints) -> tuple[bool, list[str]]:
    """Compare the record against every present bound, inclusively."""
    violated = []
    c = constraints
    if c.max_latency_s is not None and rec.latency_s > c.max_latency_s:
        violated.append("max_latency_s")
    if c.max_energy_j is not None and rec.energy_j > c.max_energy_j:
        violated.append("max_energy_j")
    if c.min_throughput_fps is not None and rec.throughput_fps < c.min_throughput_fps:
        violated.append("min_throughput_fps")
    if c.max_link_bits is not None and any(b > c.max_link_bits for b in rec.link_bits):
        violated.append("max_link_bits")
    if c.min_top1 is not None and rec.top1 < c.min_top1:
        violated.append("min_top1")
    return not violated, violated


def metric_value(rec: EvaluationRecord, metric: str) -> float:
    """Scalar value of one named metric on a record."""
    if metric == "latency":
        return rec.latency_s
    if metric == "energy":
        return rec.energy_j
    if metric == "throughput":
        return rec.throughput_fps
    if metric == "bandwidth":
        return float(rec.link_bits_total)
    if metric == "accuracy":
        return rec.top1
    if metric == "memory":
        return float(max(rec.mem_bytes))
    raise EvaluationError(f"unknown metric {metric!r}; expected one of {METRICS}")


def constraint_violation(rec: EvaluationRecord, sys: SystemSpec) -> float:
    """Total relative constraint overshoot; 0 for feasible records."""
    c = sys.constraints
    total = 0.0
    if c.max_latency_s is not None and rec.latency_s > c.max_latency_s:
        total += (rec.latency_s - c.max_latency_s) / c.max_latency_s
    if c.max_energy_j is not None and rec.energy_j > c.max_energy_j:
        total += (rec.energy_j - c.max_energy_j) / c.max_energy_j
    if c.min_throughput_fps is not None and rec.throughput_fps < c.min_throughput_fps:
        total += (c.min_throughput_fps - rec.throughput_fps) / c.min_throughput_fps
    if c.max_link_bits is not None:
        for b in rec.link_bits:
            if b > c.max_link_bits:
                total += (b - c.max_link_bits) / c.max_link_bits
    if c.min_top1 is not None and rec.top1 < c.min_top1:
        total += (c.min_top1 - rec.top1) / c.min_top1
    for (name, b), p in zip(rec.memory_report.per_platform_bytes, sys.platforms):
        if b > p.mem_capacity_bytes:
            total += (b - p.mem_capacity_bytes) / p.mem_capacity_bytes
    return total


def auto_references(sys: SystemSpec) -> dict[str, float]:
    """Per-metric references taken from the all-on-last-platform scheme.

    Non-positive reference values (e.g. zero link bits with everything on one
    platform) are replaced by 1.0 so the normalization stays well defined.
    """
    baseline = evaluate_scheme(PartitionScheme(cuts=(0,) * (len(sys.platforms) - 1)), sys)
    refs = {}
    for m in METRICS:
        v = metric_value(baseline, m)
        refs[m] = v if math.isfinite(v) and v > 0 else 1.0
    return refs


def resolve_weights(sys: SystemSpec) -> ObjectiveWeights:
    """Fill in auto references if the system's weights carry none."""
    w = sys.weights
    if w.references is not None:
        return w
    return ObjectiveWeights(entries=dict(w.entries), references=auto_references(sys))


def weighted_cost(rec: EvaluationRecord, w: ObjectiveWeights) -> float:
    """Weighted sum of normalized metrics; lower is better.

    Benefit metrics are inverted (reference/value), so a zero benefit value
    with a nonzero weight is rejected as degenerate.
    """
    if w.references is None:
        raise EvaluationError("weights carry no references; resolve them against a system first")
    total = 0.0
    for name, coeff in w.entries.items():
        if coeff == 0:
            continue
        ref = w.references.get(name, 1.0)
        v = metric_value(rec, name)
        if name in BENEFIT_METRICS:
            if v == 0:
                raise EvaluationError(f"degenerate benefit metric {name!r}: value is zero")
            total += coeff * (ref / v)
        else:
            total += coeff * (v / ref)
    return total


def constraints_from_dict(doc: dict) -> Constraints:
    known = {"max_latency_s", "max_energy_j", "min_throughput_fps", "max_link_bits", "min_top1"}
    unknown = set(doc) - known
    if unknown:
        raise EvaluationError(f"unknown constraint fields: {sorted(unknown)}")
    return Constraints(**doc)


def objectives_config_from_json(text: str) -> tuple[Constraints, ObjectiveWeights | None]:
    """Parse the combined constraints/weights document.

    Schema: {"constraints": {...}?, "weights": {metric: coeff, ...}?,
    "references": "auto" | {metric: value, ...}?}.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise EvaluationError(f"malformed constraints document: {e}") from None
    if not isinstance(doc, dict):
        raise EvaluationError("constraints document must be an object")
    unknown = set(doc) - {"constraints", "weights", "references"}
    if unknown:
        raise EvaluationError(f"unknown fields in constraints document: {sorted(unknown)}")
    constraints = constraints_from_dict(doc.get("constraints", {}))
    weights = None
    if "weights" in doc:
        refs = doc.get("references", "auto")
        if refs == "auto":
            refs = None
        elif not isinstance(refs, dict):
            raise EvaluationError('references must be "auto" or a metric->value object')
        weights = ObjectiveWeights(entries={k: float(v) for k, v in doc["weights"].items()}, references=refs)
    return constraints, weights
