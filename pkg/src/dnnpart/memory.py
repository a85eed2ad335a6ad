"""Memory footprint of order segments and memory-based feasibility.

A platform executing layers [lo, hi) of the order must hold every parameter
of the segment plus, at the worst step, all live feature maps. On a branch-free
segment the live set at a step is exactly that layer's input plus output, which
reduces to the closed form (sum of params + max(in+out)) * bits/8. With
parallel branches the peak is taken over the per-step live sets instead, where
a tensor stays live from production until its last in-segment consumer, and
boundary tensors (received from or forwarded to other platforms) are pinned for
the receive/send window.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import DnnGraph, GraphError, LayerOrder, branch_subgraphs


@dataclass(frozen=True)
class MemoryReport:
    """Per-platform memory demand for one scheme."""

    per_platform_bytes: tuple[tuple[str, int], ...]
    peak_live_elems: tuple[int, ...]
    schedule_used: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class MinMemoryOrder:
    """Result of min_memory_order: the order, its peak, and whether it is exact."""

    order: tuple[str, ...]
    peak_elems: int
    exact: bool


def bytes_for_elems(elems: int, bits: int) -> int:
    """Element count to bytes at the given width, rounding the last byte up."""
    return (elems * bits + 7) // 8


def peak_live_elems(graph: DnnGraph, order: LayerOrder, lo: int, hi: int) -> int:
    """Worst-step total of live feature-map elements for segment order[lo:hi).

    Live intervals, in segment-step indices:
      - output of an in-segment layer: from its step until its last in-segment
        consumer, or the segment end if any consumer is outside or it has none;
      - tensor produced before the segment and still needed at or after lo:
        from step 0 until its last in-segment consumer, or the segment end if
        consumers remain beyond hi;
      - the external input of a source layer: from step 0 until that layer runs.
    """
    n = graph.num_layers
    if not 0 <= lo <= hi <= n:
        raise GraphError(f"segment [{lo}, {hi}) out of range for {n} layers")
    segment = order.order[lo:hi]
    if not segment:
        return 0
    step = {lid: i for i, lid in enumerate(segment)}
    last = len(segment) - 1
    intervals: list[tuple[int, int, int]] = []  # (start, end, elems)

    for lid in segment:
        layer = graph.layer(lid)
        s = step[lid]
        consumers = graph.successors(lid)
        inside = [step[c] for c in consumers if c in step]
        if len(inside) < len(consumers) or not consumers:
            end = last
        else:
            end = max(inside)
        intervals.append((s, end, layer.out_elems))
        if not graph.predecessors(lid):
            intervals.append((0, s, layer.in_elems))

    producers_before = {
        lid for lid in order.order[:lo] if any(order.index_of(c) >= lo for c in graph.successors(lid))
    }
    for lid in producers_before:
        consumers = graph.successors(lid)
        inside = [step[c] for c in consumers if c in step]
        beyond = any(order.index_of(c) >= hi for c in consumers)
        end = last if beyond else max(inside)
        intervals.append((0, end, graph.layer(lid).out_elems))

    # sweep with a difference array over steps
    diff = [0] * (len(segment) + 1)
    for s, e, elems in intervals:
        diff[s] += elems
        diff[e + 1] -= elems
    peak = 0
    live = 0
    for d in diff[:-1]:
        live += d
        peak = max(peak, live)
    return peak


def segment_memory(graph: DnnGraph, order: LayerOrder, lo: int, hi: int, bits: int) -> int:
    """Bytes needed to execute order[lo:hi) non-pipelined at the given bit width."""
    params = sum(graph.layer(lid).param_count for lid in order.order[lo:hi])
    return bytes_for_elems(params + peak_live_elems(graph, order, lo, hi), bits)


DEFAULT_ORDER_LIMIT = 10_000


def min_memory_order(region: DnnGraph, limit: int = DEFAULT_ORDER_LIMIT) -> MinMemoryOrder:
    """Order of a fork/join region minimizing the peak live element count.

    Enumerates every topological order when there are at most `limit` of them
    (exact); otherwise falls back to a greedy order that grows the live set
    least at each step (ties: smaller out_elems, then id) and is flagged as
    heuristic.
    """
    if region.num_layers > 900:  # enumeration recurses one frame per layer
        greedy = _greedy_order(region)
        return MinMemoryOrder(order=greedy, peak_elems=_region_peak(region, list(greedy)), exact=False)

    best: list = [None, None]  # peak, order
    budget = [limit]
    indeg = {l.id: len(region.predecessors(l.id)) for l in region.layers}
    ready = sorted(lid for lid, d in indeg.items() if d == 0)

    def walk(prefix: list[str], ready: list[str]) -> bool:
        if not ready:
            budget[0] -= 1
            if budget[0] < 0:
                return False
            peak = _region_peak(region, prefix)
            if best[0] is None or peak < best[0]:
                best[0], best[1] = peak, tuple(prefix)
            return True
        for pick in list(ready):
            nxt = [r for r in ready if r != pick]
            opened = []
            for succ in region.successors(pick):
                indeg[succ] -= 1
                if indeg[succ] == 0:
                    opened.append(succ)
            prefix.append(pick)
            ok = walk(prefix, sorted(nxt + opened))
            prefix.pop()
            for succ in region.successors(pick):
                indeg[succ] += 1
            if not ok:
                return False
        return True

    if walk([], ready):
        return MinMemoryOrder(order=best[1], peak_elems=best[0], exact=True)

    greedy = _greedy_order(region)
    return MinMemoryOrder(order=greedy, peak_elems=_region_peak(region, list(greedy)), exact=False)


def _region_peak(region: DnnGraph, seq: list[str]) -> int:
    order = LayerOrder(order=tuple(seq), seed=0)
    return peak_live_elems(region, order, 0, len(seq))


def _greedy_order(region: DnnGraph) -> tuple[str, ...]:
    indeg = {l.id: len(region.predecessors(l.id)) for l in region.layers}
    remaining_uses = {l.id: len(region.successors(l.id)) for l in region.layers}
    ready = sorted(lid for lid, d in indeg.items() if d == 0)
    live: dict[str, int] = {}  # producer id -> live elems
    out: list[str] = []
    while ready:

        def live_after(cand: str) -> int:
            layer = region.layer(cand)
            total = sum(live.values()) + layer.out_elems
            for p in region.predecessors(cand):
                if remaining_uses[p] == 1:
                    total -= live[p]
            return total

        ready.sort(key=lambda c: (live_after(c), region.layer(c).out_elems, c))
        pick = ready.pop(0)
        for p in region.predecessors(pick):
            remaining_uses[p] -= 1
            if remaining_uses[p] == 0:
                del live[p]
        live[pick] = region.layer(pick).out_elems
        out.append(pick)
        for succ in region.successors(pick):
            indeg[succ] -= 1
            if indeg[succ] == 0:
                ready.append(succ)
    return tuple(out)


def memory_feasible(graph: DnnGraph, order: LayerOrder, scheme, platforms) -> tuple[bool, MemoryReport]:
    """Check every platform's segment against its capacity; report always returned."""
    bounds = [0, *scheme.cuts, graph.num_layers]
    per_platform = []
    peaks = []
    feasible = True
    for k, platform in enumerate(platforms):
        lo, hi = bounds[k], bounds[k + 1]
        peak = peak_live_elems(graph, order, lo, hi)
        params = sum(graph.layer(lid).param_count for lid in order.order[lo:hi])
        need = bytes_for_elems(params + peak, platform.bits)
        per_platform.append((platform.name, need))
        peaks.append(peak)
        if need > platform.mem_capacity_bytes:
            feasible = False
    schedules = []
    for region in branch_subgraphs(graph):
        members = {l.id for l in region.layers}
        schedules.append(tuple(lid for lid in order.order if lid in members))
    return feasible, MemoryReport(
        per_platform_bytes=tuple(per_platform),
        peak_live_elems=tuple(peaks),
        schedule_used=tuple(schedules),
    )


def apply_min_memory_orders(
    graph: DnnGraph, order: LayerOrder, limit: int = DEFAULT_ORDER_LIMIT
) -> tuple[LayerOrder, tuple[MinMemoryOrder, ...]]:
    """Rewrite each branch region's slice of the order with its min-memory order.

    Regions are single-entry/single-exit, so splicing a region-internal order
    into the positions its members occupy keeps the overall order topological.
    """
    out = list(order.order)
    results = []
    for region in branch_subgraphs(graph):
        members = {l.id for l in region.layers}
        slots = [i for i, lid in enumerate(out) if lid in members]
        best = min_memory_order(region, limit)
        for i, lid in zip(slots, best.order):
            out[i] = lid
        results.append(best)
    return LayerOrder(order=tuple(out), seed=order.seed), tuple(results)
