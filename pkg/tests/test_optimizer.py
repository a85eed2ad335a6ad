import math
import random

import pytest

from dnnpart.cost import CostEntry, LinkModel, PlatformModel
from dnnpart.evaluator import (
    EvaluationError,
    ObjectiveWeights,
    PartitionScheme,
    evaluate_scheme,
    resolve_weights,
)
from dnnpart.optimizer import (
    GaParams,
    _unrank_scheme,
    crowding_distance,
    exhaustive_pareto,
    non_dominated_sort,
    nsga2,
    objective_vector,
    scheme_space_size,
    select_final,
)
from dnnpart.graph import topo_order

from conftest import (
    make_chain,
    oracle_front,
    random_system,
    simple_system,
    uniform_platform,
)


def record_with(latency, energy, cuts=(0,)):
    """Synthetic record for sorting tests (other metrics constant)."""
    from dnnpart.evaluator import EvaluationRecord
    from dnnpart.memory import MemoryReport

    return EvaluationRecord(
        cuts=tuple(cuts),
        latency_s=latency,
        energy_j=energy,
        throughput_fps=1.0,
        stage_latencies=(latency,),
        link_latencies=(),
        link_bits=(),
        mem_bytes=(0,),
        top1=0.9,
        feasible=True,
        violated=(),
        partition_count=1,
        memory_report=MemoryReport((), (), ()),
    )


class TestExhaustivePareto:
    def test_two_platform_scheme_count(self):
        sys_spec = simple_system(
            make_chain([("a", 0, 1, 1), ("b", 0, 1, 1), ("c", 0, 1, 1)]),
            (uniform_platform("A", 16, 1e-3, 1e-3), uniform_platform("B", 16, 2e-3, 2e-3)),
        )
        front = exhaustive_pareto(sys_spec, ("latency", "energy"))
        assert front.evaluations == 4

    def test_three_platform_scheme_count(self):
        assert scheme_space_size(3, 3) == 10
        sys_spec = simple_system(
            make_chain([("a", 0, 1, 1), ("b", 0, 1, 1), ("c", 0, 1, 1)]),
            tuple(uniform_platform(n, 16, 1e-3, 1e-3) for n in "ABC"),
            links=tuple(LinkModel(name=f"l{k}", bandwidth_bps=1e9) for k in range(2)),
        )
        front = exhaustive_pareto(sys_spec, ("latency", "energy"))
        assert front.evaluations == 10

    def test_all_infeasible_empty_front(self):
        g = make_chain([("a", 10**9, 1, 1)])
        platforms = (
            PlatformModel(name="A", bits=16, mem_capacity_bytes=1, default_cost=CostEntry(1e-3, 1e-3)),
            PlatformModel(name="B", bits=16, mem_capacity_bytes=1, default_cost=CostEntry(1e-3, 1e-3)),
        )
        front = exhaustive_pareto(simple_system(g, platforms), ("latency", "energy"))
        assert front.members == ()
        assert "mem_capacity" in front.diagnostic

    def test_front_matches_oracle(self):
        rng = random.Random(42)
        for _ in range(10):
            sys_spec = random_system(rng, rng.randint(2, 8), 2, constrained=False)
            front = exhaustive_pareto(sys_spec, ("latency", "energy"))
            expect = oracle_front([r for r in front.evaluated if r.feasible], ("latency", "energy"))
            assert sorted(r.cuts for r in front.members) == sorted(r.cuts for r in expect)

    def test_oversized_space_rejected(self):
        g = make_chain([(f"l{k}", 0, 1, 1) for k in range(2000)])
        platforms = tuple(uniform_platform(f"p{k}", 16, 1e-3, 1e-3) for k in range(4))
        links = tuple(LinkModel(name=f"l{k}", bandwidth_bps=1e9) for k in range(3))
        sys_spec = simple_system(g, platforms, links=links)
        with pytest.raises(EvaluationError, match="exhaustive limit"):
            exhaustive_pareto(sys_spec, ("latency", "energy"))


class TestNonDominatedSort:
    def test_incomparable_share_front(self):
        fronts = non_dominated_sort([record_with(1, 2), record_with(2, 1)], ("latency", "energy"))
        assert len(fronts) == 1 and len(fronts[0]) == 2

    def test_strict_domination_splits(self):
        a, b = record_with(1, 1), record_with(2, 2)
        fronts = non_dominated_sort([b, a], ("latency", "energy"))
        assert fronts[0] == [a]
        assert fronts[1] == [b]

    def test_matches_brute_force_layering(self):
        rng = random.Random(8)
        records = [record_with(rng.uniform(0, 1), rng.uniform(0, 1)) for _ in range(20)]
        fronts = non_dominated_sort(records, ("latency", "energy"))
        remaining = records.copy()
        for front in fronts:
            expect = oracle_front(remaining, ("latency", "energy"))
            assert {id(r) for r in front} == {id(r) for r in expect}
            remaining = [r for r in remaining if id(r) not in {id(x) for x in front}]
        assert not remaining

    def test_benefit_metric_maximized(self):
        hi = record_with(1, 1)
        lo = record_with(1, 1)
        object.__setattr__(hi, "throughput_fps", 100.0)
        object.__setattr__(lo, "throughput_fps", 10.0)
        fronts = non_dominated_sort([lo, hi], ("latency", "throughput"))
        assert fronts[0] == [hi]


class TestCrowdingDistance:
    def test_two_points_both_infinite(self):
        d = crowding_distance([record_with(1, 2), record_with(2, 1)], ("latency", "energy"))
        assert d == [math.inf, math.inf]

    def test_equally_spaced_middle(self):
        recs = [record_with(0.0, 0.0), record_with(0.5, 0.0), record_with(1.0, 0.0)]
        d = crowding_distance(recs, ("latency",))
        assert d[0] == math.inf and d[2] == math.inf
        assert d[1] == pytest.approx(1.0)

    def test_identical_points_zero_interior(self):
        recs = [record_with(1, 1) for _ in range(4)]
        d = crowding_distance(recs, ("latency", "energy"))
        assert d[0] == math.inf and d[-1] == math.inf
        assert d[1] == 0.0 and d[2] == 0.0


class TestUnrank:
    def test_bijective_and_monotone(self):
        for n_layers, genes in ((3, 1), (3, 2), (5, 3), (7, 2)):
            total = scheme_space_size(n_layers, genes + 1)
            seen = set()
            for idx in range(total):
                cuts = _unrank_scheme(idx, n_layers, genes)
                assert len(cuts) == genes
                assert all(0 <= c <= n_layers for c in cuts)
                assert list(cuts) == sorted(cuts)
                seen.add(cuts)
            assert len(seen) == total


class TestNsga2:
    def test_matches_exhaustive_small(self):
        rng = random.Random(1)
        sys_spec = random_system(rng, 8, 2)
        params = GaParams.defaults_for(8, seed=3, objectives=("latency", "energy"))
        ga = nsga2(sys_spec, params)
        ex = exhaustive_pareto(sys_spec, ("latency", "energy"))
        assert sorted(r.cuts for r in ga.members) == sorted(r.cuts for r in ex.members)

    def test_deterministic_for_seed(self):
        rng = random.Random(2)
        sys_spec = random_system(rng, 10, 2)
        params = GaParams.defaults_for(10, seed=9)
        a = nsga2(sys_spec, params)
        b = nsga2(sys_spec, params)
        assert [r.cuts for r in a.members] == [r.cuts for r in b.members]
        assert a.evaluations == b.evaluations
        assert [r.cuts for r in a.evaluated] == [r.cuts for r in b.evaluated]

    def test_thread_cap_does_not_change_results(self, monkeypatch):
        rng = random.Random(12)
        sys_spec = random_system(rng, 9, 3)
        params = GaParams.defaults_for(9, seed=4)
        serial = nsga2(sys_spec, params)
        monkeypatch.setenv("DNNPART_THREADS", "4")
        threaded = nsga2(sys_spec, params)
        assert [r.cuts for r in serial.evaluated] == [r.cuts for r in threaded.evaluated]
        assert [r.cuts for r in serial.members] == [r.cuts for r in threaded.members]

    def test_single_objective_collapses_to_argmin(self):
        rng = random.Random(3)
        sys_spec = random_system(rng, 9, 2, constrained=False)
        params = GaParams.defaults_for(9, seed=1, objectives=("energy",))
        ga = nsga2(sys_spec, params)
        ex = exhaustive_pareto(sys_spec, ("energy",))
        best = min(r.energy_j for r in ex.evaluated if r.feasible)
        assert all(r.energy_j == best for r in ga.members)
        assert sorted(r.cuts for r in ga.members) == sorted(r.cuts for r in ex.members)

    def test_archive_soundness(self):
        rng = random.Random(4)
        for _ in range(5):
            sys_spec = random_system(rng, rng.randint(4, 11), rng.choice((2, 3)))
            params = GaParams.defaults_for(sys_spec.graph.num_layers, seed=rng.randrange(100))
            ga = nsga2(sys_spec, params)
            vecs = [objective_vector(r, ga.objectives) for r in ga.evaluated if r.feasible]
            for member in ga.members:
                mv = objective_vector(member, ga.objectives)
                for v in vecs:
                    assert not (all(x <= y for x, y in zip(v, mv)) and any(x < y for x, y in zip(v, mv)))

    def test_no_feasible_scheme_diagnostic(self):
        g = make_chain([("a", 10**9, 1, 1), ("b", 0, 1, 1)])
        platforms = (
            PlatformModel(name="A", bits=16, mem_capacity_bytes=1, default_cost=CostEntry(1e-3, 1e-3)),
            PlatformModel(name="B", bits=16, mem_capacity_bytes=1, default_cost=CostEntry(1e-3, 1e-3)),
        )
        front = nsga2(simple_system(g, platforms), GaParams.defaults_for(2, seed=0))
        assert front.members == ()
        assert "binding constraints" in front.diagnostic

    def test_population_must_be_even(self):
        with pytest.raises(EvaluationError, match="even"):
            GaParams(population=9, generations=5)

    def test_chromosomes_repaired_before_evaluation(self):
        # every evaluated scheme satisfies the monotone invariant by construction;
        # PartitionScheme would have raised otherwise, so check they all exist
        rng = random.Random(5)
        sys_spec = random_system(rng, 7, 3, constrained=False)
        ga = nsga2(sys_spec, GaParams.defaults_for(7, seed=2))
        for r in ga.evaluated:
            assert list(r.cuts) == sorted(r.cuts)


class TestSelectFinal:
    def sys_and_front(self):
        sys_spec = simple_system(
            make_chain([("a", 0, 1, 1), ("b", 0, 1, 1), ("c", 0, 1, 1)]),
            (uniform_platform("A", 16, 1e-3, 1e-3), uniform_platform("B", 16, 3e-3, 3e-3)),
        )
        front = exhaustive_pareto(sys_spec, ("latency", "energy"))
        return sys_spec, front

    def test_single_member(self):
        sys_spec, front = self.sys_and_front()
        weights = resolve_weights(sys_spec)
        assert len(front.members) == 1
        assert select_final(front, weights) == front.members[0]

    def test_lowest_latency_wins(self):
        rng = random.Random(6)
        sys_spec = random_system(rng, 8, 2, constrained=False)
        front = exhaustive_pareto(sys_spec, ("latency", "energy"))
        weights = ObjectiveWeights(entries={"latency": 1.0}, references={"latency": 1.0})
        best = select_final(front, weights)
        assert best.latency_s == min(r.latency_s for r in front.members)

    def test_tie_prefers_fewer_partitions(self):
        # two identical platforms, free link: every scheme costs the same
        g = make_chain([("a", 0, 8, 8), ("b", 0, 8, 8)])
        platforms = (uniform_platform("A", 16, 1e-3, 1e-3), uniform_platform("B", 16, 1e-3, 1e-3))
        link = LinkModel(name="l", bandwidth_bps=1e30)
        sys_spec = simple_system(g, platforms, links=(link,))
        front = exhaustive_pareto(sys_spec, ("latency", "energy"))
        weights = resolve_weights(sys_spec)
        best = select_final(front, weights)
        assert best.partition_count == 1
        assert best.cuts == (0,)

    def test_empty_front_raises(self):
        from dnnpart.optimizer import ParetoFront

        empty = ParetoFront((), (), (), ("latency",), 0, 0)
        with pytest.raises(EvaluationError, match="empty front"):
            select_final(empty, ObjectiveWeights(entries={"latency": 1.0}, references={"latency": 1.0}))

    def test_winner_not_dominated_on_weighted_metrics(self):
        rng = random.Random(7)
        for _ in range(5):
            sys_spec = random_system(rng, rng.randint(4, 9), 2)
            front = exhaustive_pareto(sys_spec, ("latency", "energy"))
            if not front.members:
                continue
            weights = ObjectiveWeights(
                entries={"latency": 1.0, "energy": 1.0},
                references={"latency": 1.0, "energy": 1.0},
            )
            best = select_final(front, weights)
            for r in front.members:
                assert not (
                    r.latency_s <= best.latency_s
                    and r.energy_j <= best.energy_j
                    and (r.latency_s < best.latency_s or r.energy_j < best.energy_j)
                )
