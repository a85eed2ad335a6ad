"""Shared builders and independent oracles for the test suite.

The oracle functions here deliberately re-derive results from first principles
(step-wise set scans, permutation filters, O(n^2) domination loops) instead of
calling the library code they are used to check.
"""

from __future__ import annotations

import itertools
import random
from pathlib import Path

import pytest

from dnnpart.cost import AccuracyModel, CostEntry, LinkModel, PlatformModel
from dnnpart.evaluator import Constraints, ObjectiveWeights, SystemSpec
from dnnpart.graph import DnnGraph, LayerNode, topo_order

DEMO_DIR = Path(__file__).resolve().parent.parent / "demo"


# ---------------------------------------------------------------------------
# graph builders
# ---------------------------------------------------------------------------

def make_chain(specs, name="chain"):
    """specs: list of (id, param_count, in_elems, out_elems); consecutive edges."""
    layers = tuple(LayerNode(id=i, op="Conv", param_count=p, in_elems=fi, out_elems=fo) for i, p, fi, fo in specs)
    edges = tuple((specs[k][0], specs[k + 1][0]) for k in range(len(specs) - 1))
    return DnnGraph(name=name, layers=layers, edges=edges)


def random_chain(rng: random.Random, n: int, name="chain"):
    specs = []
    prev_out = rng.randint(1, 500)
    for k in range(n):
        out = rng.randint(1, 500)
        specs.append((f"l{k}", rng.randint(0, 1000), prev_out, out))
        prev_out = out
    return make_chain(specs, name=name)


def diamond_graph(out1=20, out2=30, out3=5, params=(10, 20, 30, 40)):
    """c1 -> {c2, c3} -> c4."""
    layers = (
        LayerNode("c1", "Conv", params[0], 8, out1),
        LayerNode("c2", "Conv", params[1], out1, out2),
        LayerNode("c3", "Conv", params[2], out1, out3),
        LayerNode("c4", "Add", params[3], out2 + out3, 7),
    )
    edges = (("c1", "c2"), ("c1", "c3"), ("c2", "c4"), ("c3", "c4"))
    return DnnGraph(name="diamond", layers=layers, edges=edges)


def random_dag(rng: random.Random, n: int, max_preds=3, name="dag"):
    """Connected random DAG with consistent in_elems (node k links back to earlier nodes)."""
    outs = [rng.randint(1, 300) for _ in range(n)]
    edges = []
    preds: list[list[int]] = [[] for _ in range(n)]
    for k in range(1, n):
        count = rng.randint(1, min(max_preds, k))
        for p in sorted(rng.sample(range(k), count)):
            preds[k].append(p)
            edges.append((f"n{p}", f"n{k}"))
    layers = []
    for k in range(n):
        in_elems = sum(outs[p] for p in preds[k]) if preds[k] else rng.randint(1, 300)
        layers.append(LayerNode(f"n{k}", "Op", rng.randint(0, 500), in_elems, outs[k]))
    return DnnGraph(name=name, layers=tuple(layers), edges=tuple(edges))


def random_fork_join(rng: random.Random, n: int, name="region"):
    """Fork/join region: one source, 2-3 parallel chain branches, one sink. n >= 4."""
    assert n >= 4
    inner = n - 2
    branches = rng.randint(2, min(3, inner))
    sizes = [1] * branches
    for _ in range(inner - branches):
        sizes[rng.randrange(branches)] += 1
    fork_out = rng.randint(1, 200)
    layers = [LayerNode("fork", "Conv", rng.randint(0, 100), rng.randint(1, 100), fork_out)]
    edges = []
    tail_outs = []
    idx = 0
    for b, size in enumerate(sizes):
        prev_id, prev_out = "fork", fork_out
        for s in range(size):
            lid = f"b{b}_{s}"
            out = rng.randint(1, 200)
            layers.append(LayerNode(lid, "Conv", rng.randint(0, 100), prev_out, out))
            edges.append((prev_id, lid))
            prev_id, prev_out = lid, out
            idx += 1
        tail_outs.append((prev_id, prev_out))
    layers.append(LayerNode("join", "Add", rng.randint(0, 100), sum(o for _, o in tail_outs), rng.randint(1, 100)))
    edges.extend((tid, "join") for tid, _ in tail_outs)
    return DnnGraph(name=name, layers=tuple(layers), edges=tuple(edges))


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def oracle_peak_live(graph: DnnGraph, global_order, lo, hi):
    """Step-wise set-scan re-derivation of the segment's peak live elements."""
    seq = list(global_order[lo:hi])
    if not seq:
        return 0
    pos = {lid: i for i, lid in enumerate(global_order)}
    inset = set(seq)
    peak = 0
    for t in range(len(seq)):
        live = 0
        for lid in seq[:t + 1]:
            # output of an executed in-segment layer
            consumers = graph.successors(lid)
            if not consumers or any(c not in inset for c in consumers):
                alive = True  # held until the segment ends
            else:
                alive = max(seq.index(c) for c in consumers) >= t
            if alive:
                live += graph.layer(lid).out_elems
        for lid in seq:
            # external input of a source layer, held until it runs
            if not graph.predecessors(lid) and seq.index(lid) >= t:
                live += graph.layer(lid).in_elems
        for lid in global_order[:lo]:
            consumers = graph.successors(lid)
            if not any(pos[c] >= lo for c in consumers):
                continue
            if any(pos[c] >= hi for c in consumers):
                alive = True
            else:
                alive = max(seq.index(c) for c in consumers if c in inset) >= t
            if alive:
                live += graph.layer(lid).out_elems
        peak = max(peak, live)
    return peak


def oracle_all_topo_orders(graph: DnnGraph):
    """All topological orders by brute permutation filtering (small graphs only)."""
    ids = [l.id for l in graph.layers]
    pos_ok = []
    for perm in itertools.permutations(ids):
        pos = {lid: i for i, lid in enumerate(perm)}
        if all(pos[u] < pos[v] for u, v in graph.edges):
            pos_ok.append(perm)
    return pos_ok


def oracle_front(records, objectives):
    """Non-dominated subset by a direct O(n^2) scan (benefit metrics maximized)."""
    from dnnpart.evaluator import metric_value
    from dnnpart.evaluator import BENEFIT_METRICS

    def vec(r):
        return [(-1 if m in BENEFIT_METRICS else 1) * metric_value(r, m) for m in objectives]

    out = []
    for a in records:
        va = vec(a)
        dominated = False
        for b in records:
            vb = vec(b)
            if all(x <= y for x, y in zip(vb, va)) and any(x < y for x, y in zip(vb, va)):
                dominated = True
                break
        if not dominated:
            out.append(a)
    return out


# ---------------------------------------------------------------------------
# system builders
# ---------------------------------------------------------------------------

def uniform_platform(name, bits, latency, energy, capacity=10**12):
    return PlatformModel(
        name=name,
        bits=bits,
        mem_capacity_bytes=capacity,
        cost_table={},
        default_cost=CostEntry(latency_s=latency, energy_j=energy),
    )


def table_platform(rng: random.Random, name, graph, bits=16, capacity=10**12):
    table = {
        l.id: CostEntry(latency_s=rng.uniform(1e-4, 1e-2), energy_j=rng.uniform(1e-4, 1e-2))
        for l in graph.layers
    }
    return PlatformModel(name=name, bits=bits, mem_capacity_bytes=capacity, cost_table=table)


def simple_system(
    graph,
    platforms,
    links=None,
    accuracy=None,
    constraints=None,
    weights=None,
    seed=0,
):
    order = topo_order(graph, seed)
    if links is None:
        links = tuple(
            LinkModel(name=f"link{k}", bandwidth_bps=1e9) for k in range(len(platforms) - 1)
        )
    if accuracy is None:
        accuracy = AccuracyModel(kind="constant", constant_top1=0.9)
    return SystemSpec(
        graph=graph,
        order=order,
        platforms=tuple(platforms),
        links=tuple(links),
        accuracy=accuracy,
        constraints=constraints or Constraints(),
        weights=weights or ObjectiveWeights(entries={"latency": 1.0}),
    )


def random_system(rng: random.Random, n_layers, n_platforms, chain_only=False, constrained=True):
    """Random workload + chain used by the GA corpus; always keeps >= 1 feasible scheme."""
    if chain_only or rng.random() < 0.5:
        graph = random_chain(rng, n_layers)
    else:
        graph = random_dag(rng, n_layers)
    platforms = [
        table_platform(rng, f"p{k}", graph, bits=rng.choice((8, 16)))
        for k in range(n_platforms)
    ]
    links = [
        LinkModel(
            name=f"link{k}",
            bandwidth_bps=rng.uniform(1e7, 1e9),
            fixed_latency_s=rng.uniform(0, 1e-4),
            energy_per_bit_j=rng.uniform(0, 1e-11),
            fixed_energy_j=rng.uniform(0, 1e-6),
        )
        for k in range(n_platforms - 1)
    ]
    accuracy = AccuracyModel(kind="constant", constant_top1=rng.uniform(0.7, 0.99))
    sys_spec = simple_system(graph, platforms, links=links, accuracy=accuracy, seed=rng.randrange(2**32))
    if not constrained:
        return sys_spec
    # derive loose-but-binding bounds from the actual metric spread so that at
    # least one scheme stays feasible
    from dnnpart.evaluator import PartitionScheme, evaluate_scheme
    from itertools import combinations_with_replacement

    lat, en = [], []
    for cuts in combinations_with_replacement(range(n_layers + 1), n_platforms - 1):
        rec = evaluate_scheme(PartitionScheme(cuts=tuple(cuts)), sys_spec)
        lat.append(rec.latency_s)
        en.append(rec.energy_j)
    lat.sort()
    en.sort()
    q = rng.uniform(0.3, 1.0)
    constraints = Constraints(
        max_latency_s=lat[int(q * (len(lat) - 1))],
        max_energy_j=en[int(rng.uniform(q, 1.0) * (len(en) - 1))],
    )
    return SystemSpec(
        graph=sys_spec.graph,
        order=sys_spec.order,
        platforms=sys_spec.platforms,
        links=sys_spec.links,
        accuracy=sys_spec.accuracy,
        constraints=constraints,
        weights=sys_spec.weights,
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One visible pass/fail line per acceptance criterion."""
    rows = []
    for status in ("passed", "failed"):
        for rep in terminalreporter.stats.get(status, []):
            if getattr(rep, "when", None) == "call" and "test_acceptance" in rep.nodeid:
                rows.append((rep.nodeid.split("::")[-1], status == "passed"))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, ok in sorted(rows):
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")


@pytest.fixture
def demo_paths():
    return {
        "graph": DEMO_DIR / "toynet.json",
        "platform_a": DEMO_DIR / "platform_a.json",
        "platform_b": DEMO_DIR / "platform_b.json",
        "link": DEMO_DIR / "link.json",
        "accuracy": DEMO_DIR / "accuracy.json",
        "objectives": DEMO_DIR / "objectives.json",
    }
