"""Workload graph: parse and validate the layer DAG, linearize it, expose cut structure.

The graph is the unit of work being partitioned: layers carry parameter and
feature-map element counts (bit widths are applied later, per platform), edges
carry producer/consumer relations. Everything here is immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache

import networkx as nx


class GraphError(ValueError):
    """A graph document or graph query violated the format or an invariant."""


_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Deterministic 64-bit stream used for tie-breaking.

    SplitMix64 (Steele et al.): state advances by the golden-gamma constant,
    output is the finalizer-mixed state. Chosen over the stdlib generator so
    the exact draw sequence is pinned down by ~10 lines of arithmetic and can
    be reproduced anywhere.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def below(self, n: int) -> int:
        """Uniform draw from [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        threshold = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < threshold:
                return x % n


@dataclass(frozen=True)
class LayerNode:
    """One layer: id, operator label, and its element counts.

    param_count is the number of weight/bias elements, in_elems/out_elems the
    input/output feature-map element counts. Byte sizes are derived at
    evaluation time from the executing platform's bit width.
    """

    id: str
    op: str
    param_count: int
    in_elems: int
    out_elems: int

    def __post_init__(self):
        for name in ("param_count", "in_elems", "out_elems"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise GraphError(f"layer {self.id!r}: {name} must be a non-negative integer, got {v!r}")


@dataclass(frozen=True)
class DnnGraph:
    """Validated DAG of layers.

    Invariants enforced at construction: unique ids, edges between existing
    layers, acyclic, one weakly connected component, and for every non-source
    layer in_elems == sum of out_elems over its direct predecessors.
    """

    name: str
    layers: tuple[LayerNode, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        _validate(self)

    @cached_property
    def _by_id(self) -> dict[str, LayerNode]:
        return {l.id: l for l in self.layers}

    @cached_property
    def _preds(self) -> dict[str, tuple[str, ...]]:
        p: dict[str, list[str]] = {l.id: [] for l in self.layers}
        for u, v in self.edges:
            p[v].append(u)
        return {k: tuple(v) for k, v in p.items()}

    @cached_property
    def _succs(self) -> dict[str, tuple[str, ...]]:
        s: dict[str, list[str]] = {l.id: [] for l in self.layers}
        for u, v in self.edges:
            s[u].append(v)
        return {k: tuple(v) for k, v in s.items()}

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(l.id for l in self.layers if not self._preds[l.id])

    @property
    def sinks(self) -> tuple[str, ...]:
        return tuple(l.id for l in self.layers if not self._succs[l.id])

    def layer(self, layer_id: str) -> LayerNode:
        try:
            return self._by_id[layer_id]
        except KeyError:
            raise GraphError(f"unknown layer id {layer_id!r}") from None

    def predecessors(self, layer_id: str) -> tuple[str, ...]:
        return self._preds[layer_id]

    def successors(self, layer_id: str) -> tuple[str, ...]:
        return self._succs[layer_id]

    def to_nx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(l.id for l in self.layers)
        g.add_edges_from(self.edges)
        return g


@dataclass(frozen=True)
class LayerOrder:
    """A topologically valid linearization of a graph, reproducible from its seed."""

    order: tuple[str, ...]
    seed: int

    def index_of(self, layer_id: str) -> int:
        return self._positions[layer_id]

    @cached_property
    def _positions(self) -> dict[str, int]:
        return {lid: i for i, lid in enumerate(self.order)}


def _validate(graph: DnnGraph) -> None:
    if not graph.layers:
        raise GraphError("graph must contain at least one layer")
    seen: set[str] = set()
    for l in graph.layers:
        if l.id in seen:
            raise GraphError(f"duplicate layer id {l.id!r}")
        seen.add(l.id)
    seen_edges: set[tuple[str, str]] = set()
    for u, v in graph.edges:
        if u not in seen:
            raise GraphError(f"edge ({u!r}, {v!r}): unknown producer {u!r}")
        if v not in seen:
            raise GraphError(f"edge ({u!r}, {v!r}): unknown consumer {v!r}")
        if u == v:
            raise GraphError(f"cycle detected: self-loop on {u!r}")
        if (u, v) in seen_edges:
            raise GraphError(f"duplicate edge ({u!r}, {v!r})")
        seen_edges.add((u, v))

    g = nx.DiGraph()
    g.add_nodes_from(l.id for l in graph.layers)
    g.add_edges_from(graph.edges)
    if not nx.is_directed_acyclic_graph(g):
        cyc = nx.find_cycle(g)
        path = " -> ".join(u for u, _ in cyc) + f" -> {cyc[0][0]}"
        raise GraphError(f"cycle detected: {path}")
    if len(graph.layers) > 1 and not nx.is_weakly_connected(g):
        comp = min(nx.weakly_connected_components(g), key=lambda c: (len(c), sorted(c)))
        raise GraphError(f"graph is not connected: component {sorted(comp)} is isolated")

    preds: dict[str, list[str]] = {l.id: [] for l in graph.layers}
    for u, v in graph.edges:
        preds[v].append(u)
    by_id = {l.id: l for l in graph.layers}
    for l in graph.layers:
        if preds[l.id]:
            expect = sum(by_id[p].out_elems for p in preds[l.id])
            if l.in_elems != expect:
                raise GraphError(
                    f"in_elems mismatch at {l.id!r}: declared {l.in_elems}, "
                    f"predecessors supply {expect}"
                )


_LAYER_KEYS = {"id", "op", "param_count", "in_elems", "out_elems"}
_GRAPH_KEYS = {"name", "layers", "edges"}


def parse_graph(text: str) -> DnnGraph:
    """Parse and validate a graph JSON document.

    Rejected with a GraphError naming the offending layer or edge: malformed
    JSON, unknown fields, bad field types, unknown edge endpoints, cycles,
    disconnected components, and in_elems mismatches.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise GraphError(f"malformed graph document: {e}") from None
    if not isinstance(doc, dict):
        raise GraphError("malformed graph document: top level must be an object")
    unknown = set(doc) - _GRAPH_KEYS
    if unknown:
        raise GraphError(f"unknown graph fields: {sorted(unknown)}")
    for key in _GRAPH_KEYS:
        if key not in doc:
            raise GraphError(f"missing graph field {key!r}")
    if not isinstance(doc["name"], str):
        raise GraphError("graph field 'name' must be a string")
    if not isinstance(doc["layers"], list) or not isinstance(doc["edges"], list):
        raise GraphError("graph fields 'layers' and 'edges' must be arrays")

    layers = []
    for entry in doc["layers"]:
        if not isinstance(entry, dict):
            raise GraphError(f"layer entry must be an object, got {entry!r}")
        unknown = set(entry) - _LAYER_KEYS
        if unknown:
            raise GraphError(f"layer {entry.get('id')!r}: unknown fields {sorted(unknown)}")
        missing = _LAYER_KEYS - set(entry)
        if missing:
            raise GraphError(f"layer {entry.get('id')!r}: missing fields {sorted(missing)}")
        if not isinstance(entry["id"], str) or not isinstance(entry["op"], str):
            raise GraphError(f"layer {entry.get('id')!r}: 'id' and 'op' must be strings")
        layers.append(
            LayerNode(
                id=entry["id"],
                op=entry["op"],
                param_count=entry["param_count"],
                in_elems=entry["in_elems"],
                out_elems=entry["out_elems"],
            )
        )

    edges = []
    for e in doc["edges"]:
        if not isinstance(e, list) or len(e) != 2 or not all(isinstance(x, str) for x in e):
            raise GraphError(f"edge entry must be a [producer, consumer] string pair, got {e!r}")
        edges.append((e[0], e[1]))

    return DnnGraph(name=doc["name"], layers=tuple(layers), edges=tuple(edges))


def serialize_graph(graph: DnnGraph) -> str:
    """Inverse of parse_graph: parse_graph(serialize_graph(g)) == g."""
    doc = {
        "name": graph.name,
        "layers": [
            {
                "id": l.id,
                "op": l.op,
                "param_count": l.param_count,
                "in_elems": l.in_elems,
                "out_elems": l.out_elems,
            }
            for l in graph.layers
        ],
        "edges": [[u, v] for u, v in graph.edges],
    }
    return json.dumps(doc, indent=2)


def topo_order(graph: DnnGraph, seed: int) -> LayerOrder:
    """Topological sort with seeded uniform tie-breaking among ready layers.

    The ready set is kept sorted by layer id and the pick is drawn from a
    SplitMix64 stream, so (graph, seed) pins down the order exactly.
    """
    indeg = {l.id: len(graph.predecessors(l.id)) for l in graph.layers}
    ready = sorted(lid for lid, d in indeg.items() if d == 0)
    rng = SplitMix64(seed)
    out: list[str] = []
    while ready:
        pick = ready.pop(rng.below(len(ready)))
        out.append(pick)
        for succ in graph.successors(pick):
            indeg[succ] -= 1
            if indeg[succ] == 0:
                # insert keeping lexical order
                lo, hi = 0, len(ready)
                while lo < hi:
                    mid = (lo + hi) // 2
                    if ready[mid] < succ:
                        lo = mid + 1
                    else:
                        hi = mid
                ready.insert(lo, succ)
    return LayerOrder(order=tuple(out), seed=seed)


def cut_tensors(graph: DnnGraph, order: LayerOrder, cut: int) -> set[str]:
    """Layer ids in the first `cut` positions whose output crosses the cut.

    A producer crosses when at least one of its consumers sits outside the
    prefix; its whole output tensor must then be transmitted. cut=0 and
    cut=num_layers transmit nothing.
    """
    n = graph.num_layers
    if not 0 <= cut <= n:
        raise GraphError(f"cut {cut} out of range [0, {n}]")
    prefix = set(order.order[:cut])
    crossing: set[str] = set()
    for u, v in graph.edges:
        if u in prefix and v not in prefix:
            crossing.add(u)
    return crossing


def branch_subgraphs(graph: DnnGraph) -> tuple[DnnGraph, ...]:
    """Maximal single-entry/single-exit regions containing parallel paths.

    Each region runs from a fork layer to its matching join (the fork's
    immediate post-dominator), both included. Only regions with no side
    entries are returned, so every region is itself a valid DnnGraph. Nested
    forks stay inside the enclosing region; returned regions overlap at most
    at fork/join layers. A pure chain yields the empty tuple.
    """
    return tuple(_branch_subgraphs_cached(graph))


@lru_cache(maxsize=64)
def _branch_subgraphs_cached(graph: DnnGraph) -> tuple[DnnGraph, ...]:
    g = graph.to_nx()
    exit_node = object()  # sentinel; DnnGraph ids are strings
    rg = g.reverse(copy=True)
    rg.add_node(exit_node)
    for sink in graph.sinks:
        rg.add_edge(exit_node, sink)
    ipdom = nx.immediate_dominators(rg, exit_node)

    layer_pos = {l.id: i for i, l in enumerate(graph.layers)}
    candidates = []
    for l in graph.layers:
        f = l.id
        if len(graph.successors(f)) < 2:
            continue
        j = ipdom.get(f)
        if j is None or j is exit_node:
            continue
        reach_f = nx.descendants(g, f) | {f}
        reach_j = nx.ancestors(g, j) | {j}
        region = reach_f & reach_j
        interior_plus_join = region - {f}
        # side entries would leave the region without a single entry point
        if any(u not in region for v in interior_plus_join for u in graph.predecessors(v)):
            continue
        candidates.append((f, j, frozenset(region)))

    candidates.sort(key=lambda c: (-len(c[2]), layer_pos[c[0]]))
    accepted: list[tuple[str, str, frozenset[str]]] = []
    for f, j, region in candidates:
        interior = region - {f, j}
        ok = True
        for af, aj, aregion in accepted:
            if interior & aregion or region & (aregion - {af, aj}):
                ok = False
                break
        if ok:
            accepted.append((f, j, region))

    accepted.sort(key=lambda c: layer_pos[c[0]])
    out = []
    for f, j, region in accepted:
        layers = tuple(l for l in graph.layers if l.id in region)
        edges = tuple((u, v) for u, v in graph.edges if u in region and v in region)
        out.append(DnnGraph(name=f"{graph.name}[{f}..{j}]", layers=layers, edges=edges))
    return tuple(out)
