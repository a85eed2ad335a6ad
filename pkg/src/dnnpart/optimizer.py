"""Search over partitioning schemes: NSGA-II, an exhaustive oracle, final pick.

The chromosome is the monotone cut vector itself. Selection follows the
feasibility-first rule (feasible beats infeasible, then rank, then crowding),
variation is single-point crossover with a sort repair plus per-gene resets
within the neighboring cuts, and survivors are chosen elitistically from
parents plus offspring. Every distinct scheme is evaluated once and kept; the
returned front is the non-dominated feasible subset of everything evaluated,
which makes the result safe against generational drift.
"""

from __future__ import annotations

import logging
import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .evaluator import (
    BENEFIT_METRICS,
    METRICS,
    EvaluationError,
    EvaluationRecord,
    ObjectiveWeights,
    PartitionScheme,
    SystemSpec,
    constraint_violation,
    evaluate_scheme,
    metric_value,
    weighted_cost,
)

EXHAUSTIVE_LIMIT = 1_000_000


@dataclass(frozen=True)
class GaParams:
    """NSGA-II settings; defaults_for derives sizing from the layer count."""

    population: int
    generations: int
    seed: int = 0
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None: 1/(#cuts), at least 0.1
    objectives: tuple[str, ...] = ("latency", "energy")

    def __post_init__(self):
        if self.population < 2 or self.population % 2 != 0:
            raise EvaluationError(f"population must be even and >= 2, got {self.population}")
        if self.generations < 1:
            raise EvaluationError(f"generations must be >= 1, got {self.generations}")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise EvaluationError("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise EvaluationError("mutation_rate must lie in [0, 1]")
        if not self.objectives:
            raise EvaluationError("at least one objective is required")
        for m in self.objectives:
            if m not in METRICS:
                raise EvaluationError(f"unknown objective {m!r}; expected one of {METRICS}")

    @classmethod
    def defaults_for(
        cls,
        num_layers: int,
        seed: int = 0,
        objectives: tuple[str, ...] = ("latency", "energy"),
        population: int | None = None,
        generations: int | None = None,
    ) -> "GaParams":
        if population is None:
            population = max(20, 2 * math.ceil(num_layers / 5))
            population += population % 2
        if generations is None:
            generations = max(25, num_layers)
        return cls(population=population, generations=generations, seed=seed, objectives=objectives)

    def effective_mutation_rate(self, num_genes: int) -> float:
        if self.mutation_rate is not None:
            return self.mutation_rate
        return max(0.1, 1.0 / max(1, num_genes))


@dataclass(frozen=True)
class ParetoFront:
    """Non-dominated feasible schemes plus the full evaluated set behind them."""

    members: tuple[EvaluationRecord, ...]
    evaluated: tuple[EvaluationRecord, ...]
    dominated_flags: tuple[bool, ...]
    objectives: tuple[str, ...]
    evaluations: int
    generations_run: int
    diagnostic: str | None = None


def scheme_space_size(num_layers: int, num_platforms: int) -> int:
    return math.comb(num_layers + num_platforms - 1, num_platforms - 1)


def objective_vector(rec: EvaluationRecord, objectives) -> tuple[float, ...]:
    """Metric tuple with benefit metrics negated, so smaller is better everywhere."""
    return tuple(
        -metric_value(rec, m) if m in BENEFIT_METRICS else metric_value(rec, m) for m in objectives
    )


def _dominates(a: tuple[float, ...], b: tuple[float, ...]) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def non_dominated_sort(records, objectives) -> list[list[EvaluationRecord]]:
    """Partition records into fronts F1, F2, ... by Pareto domination."""
    records = list(records)
    vecs = [objective_vector(r, objectives) for r in records]
    n = len(records)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    dom_count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if _dominates(vecs[i], vecs[j]):
                dominated_by[i].append(j)
                dom_count[j] += 1
            elif _dominates(vecs[j], vecs[i]):
                dominated_by[j].append(i)
                dom_count[i] += 1
    fronts: list[list[int]] = []
    current = [i for i in range(n) if dom_count[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                dom_count[j] -= 1
                if dom_count[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return [[records[i] for i in f] for f in fronts]


def crowding_distance(front, objectives) -> list[float]:
    """Per-record crowding distance within one front.

    Boundary records on any objective get +inf; interior records accumulate the
    normalized gap between their neighbors, with flat objectives contributing 0.
    """
    n = len(front)
    if n == 0:
        return []
    dist = [0.0] * n
    vecs = [objective_vector(r, objectives) for r in front]
    for k in range(len(objectives)):
        idx = sorted(range(n), key=lambda i: vecs[i][k])
        lo, hi = vecs[idx[0]][k], vecs[idx[-1]][k]
        dist[idx[0]] = math.inf
        dist[idx[-1]] = math.inf
        if hi == lo:
            continue
        for pos in range(1, n - 1):
            # inf from an earlier objective stays inf
            dist[idx[pos]] += (vecs[idx[pos + 1]][k] - vecs[idx[pos - 1]][k]) / (hi - lo)
    return dist


def _eval_threads() -> int:
    raw = os.environ.get("DNNPART_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _evaluate_new(sys: SystemSpec, cut_vectors, memo: dict) -> None:
    """Evaluate not-yet-seen schemes into the memo table, deterministically."""
    new = sorted({c for c in cut_vectors if c not in memo})
    if not new:
        return
    threads = _eval_threads()
    if threads > 1 and len(new) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: evaluate_scheme(PartitionScheme(cuts=c), sys), new))
        for c, r in zip(new, results):
            memo[c] = r
    else:
        for c in new:
            memo[c] = evaluate_scheme(PartitionScheme(cuts=c), sys)


def _front_from_memo(sys, memo, objectives, generations_run) -> ParetoFront:
    evaluated = [memo[c] for c in sorted(memo)]
    feasible = [r for r in evaluated if r.feasible]
    members: list[EvaluationRecord] = []
    if feasible:
        members = non_dominated_sort(feasible, objectives)[0]
        members.sort(key=lambda r: r.cuts)
    member_cuts = {r.cuts for r in members}
    feas_vecs = [objective_vector(r, objectives) for r in feasible]
    flags = []
    for r in evaluated:
        v = objective_vector(r, objectives)
        flags.append(any(_dominates(fv, v) for fv in feas_vecs))
    diagnostic = None
    if not members:
        counts: dict[str, int] = {}
        for r in evaluated:
            for name in r.violated:
                counts[name] = counts.get(name, 0) + 1
        binding = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        detail = ", ".join(f"{name} ({cnt}/{len(evaluated)})" for name, cnt in binding)
        diagnostic = f"no feasible scheme; binding constraints: {detail or 'none recorded'}"
        logging.getLogger(__name__).warning(diagnostic)
    return ParetoFront(
        members=tuple(members),
        evaluated=tuple(evaluated),
        dominated_flags=tuple(flags),
        objectives=tuple(objectives),
        evaluations=len(evaluated),
        generations_run=generations_run,
        diagnostic=diagnostic,
    )


def exhaustive_pareto(sys: SystemSpec, objectives) -> ParetoFront:
    """Evaluate every monotone cut vector and return the exact feasible front."""
    n_layers = sys.graph.num_layers
    genes = len(sys.platforms) - 1
    total = scheme_space_size(n_layers, len(sys.platforms))
    if total > EXHAUSTIVE_LIMIT:
        raise EvaluationError(
            f"scheme space has {total} points, above the exhaustive limit {EXHAUSTIVE_LIMIT}"
        )
    memo: dict[tuple[int, ...], EvaluationRecord] = {}
    _evaluate_new(sys, _all_schemes(n_layers, genes), memo)
    return _front_from_memo(sys, memo, objectives, generations_run=0)


def _all_schemes(num_layers: int, genes: int):
    from itertools import combinations_with_replacement

    return [tuple(c) for c in combinations_with_replacement(range(num_layers + 1), genes)]


def _unrank_scheme(index: int, num_layers: int, genes: int) -> tuple[int, ...]:
    """index-th monotone cut vector in lexicographic order (combinatorial unranking)."""
    # monotone vectors over [0, L] correspond to strict combinations of
    # {v_i + i} out of range(L + genes)
    n = num_layers + genes
    combo = []
    x = 0
    for slot in range(genes):
        remaining = genes - slot - 1
        while True:
            count = math.comb(n - x - 1, remaining)
            if index < count:
                combo.append(x)
                x += 1
                break
            index -= count
            x += 1
    return tuple(c - i for i, c in enumerate(combo))


def _index_fronts(vecs: list[tuple[float, ...]], idxs: list[int]) -> list[list[int]]:
    dominated_by: dict[int, list[int]] = {i: [] for i in idxs}
    dom_count = {i: 0 for i in idxs}
    for a in range(len(idxs)):
        for b in range(a + 1, len(idxs)):
            i, j = idxs[a], idxs[b]
            if _dominates(vecs[i], vecs[j]):
                dominated_by[i].append(j)
                dom_count[j] += 1
            elif _dominates(vecs[j], vecs[i]):
                dominated_by[j].append(i)
                dom_count[i] += 1
    fronts = []
    current = [i for i in idxs if dom_count[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                dom_count[j] -= 1
                if dom_count[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


class _SchemeSweep:
    """Deterministic uniform background sampling of not-yet-evaluated schemes.

    Keeps the archive honest on small problems: when the run's nominal budget
    (population x generations) exceeds the scheme space, the sweep visits every
    scheme, so the returned front cannot miss an isolated optimum that the
    population dynamics never reach. On large spaces it degrades to a light
    random-immigrant stream feeding only the archive, never the population.
    """

    _MATERIALIZE_LIMIT = 1_000_000

    def __init__(self, rng: random.Random, num_layers: int, genes: int, population: int, generations: int):
        self._rng = rng
        self._layers = num_layers
        self._genes = genes
        self._total = scheme_space_size(num_layers, genes + 1)
        budget = population * (generations + 1)
        if self._total <= budget:
            self.per_generation = max(2, math.ceil(self._total / generations))
        else:
            self.per_generation = max(2, population // 10)
        self._pool: list[tuple[int, ...]] | None = None
        if self._total <= min(4 * budget, self._MATERIALIZE_LIMIT):
            self._pool = [_unrank_scheme(i, num_layers, genes) for i in range(self._total)]
            rng.shuffle(self._pool)

    def take(self, count: int, visited) -> list[tuple[int, ...]]:
        out: list[tuple[int, ...]] = []
        if self._pool is not None:
            while self._pool and len(out) < count:
                c = self._pool.pop()
                if c not in visited:
                    out.append(c)
            return out
        attempts = 0
        while len(out) < count and attempts < 5 * count:
            attempts += 1
            c = _unrank_scheme(self._rng.randrange(self._total), self._layers, self._genes)
            if c not in visited:
                out.append(c)
        return out


def _constrained_fronts(records, sys, objectives) -> list[list[int]]:
    """Index fronts under feasibility-first domination."""
    vecs = [objective_vector(r, objectives) for r in records]
    feas_idx = [i for i, r in enumerate(records) if r.feasible]
    infeas_idx = [i for i, r in enumerate(records) if not r.feasible]
    fronts = _index_fronts(vecs, feas_idx) if feas_idx else []
    if infeas_idx:
        by_violation: dict[float, list[int]] = {}
        for i in infeas_idx:
            by_violation.setdefault(constraint_violation(records[i], sys), []).append(i)
        for v in sorted(by_violation):
            fronts.append(by_violation[v])
    return fronts


def nsga2(sys: SystemSpec, params: GaParams) -> ParetoFront:
    """NSGA-II over cut vectors; returns the archive front of all evaluations."""
    rng = random.Random(params.seed)
    n_layers = sys.graph.num_layers
    genes = len(sys.platforms) - 1
    total = scheme_space_size(n_layers, len(sys.platforms))
    p_mut = params.effective_mutation_rate(genes)

    memo: dict[tuple[int, ...], EvaluationRecord] = {}

    if genes == 0:
        _evaluate_new(sys, [()], memo)
        return _front_from_memo(sys, memo, params.objectives, generations_run=0)

    population = [_unrank_scheme(rng.randrange(total), n_layers, genes) for _ in range(params.population)]
    _evaluate_new(sys, population, memo)
    sweep = _SchemeSweep(rng, n_layers, genes, params.population, params.generations)

    generations_run = 0
    for _ in range(params.generations):
        records = [memo[c] for c in population]
        fronts = _constrained_fronts(records, sys, params.objectives)
        rank = [0] * len(records)
        crowd = [0.0] * len(records)
        for fi, f in enumerate(fronts):
            dists = crowding_distance([records[i] for i in f], params.objectives)
            for i, d in zip(f, dists):
                rank[i] = fi
                crowd[i] = d

        def pick_parent() -> tuple[int, ...]:
            a = rng.randrange(len(population))
            b = rng.randrange(len(population))
            ra, rb = records[a], records[b]
            if ra.feasible != rb.feasible:
                return population[a if ra.feasible else b]
            if not ra.feasible:
                va, vb = constraint_violation(ra, sys), constraint_violation(rb, sys)
                return population[a if va <= vb else b]
            if rank[a] != rank[b]:
                return population[a if rank[a] < rank[b] else b]
            return population[a if crowd[a] >= crowd[b] else b]

        offspring: list[tuple[int, ...]] = []
        while len(offspring) < params.population:
            p1 = list(pick_parent())
            p2 = list(pick_parent())
            if genes >= 2 and rng.random() < params.crossover_rate:
                point = rng.randrange(1, genes)
                c1 = sorted(p1[:point] + p2[point:])
                c2 = sorted(p2[:point] + p1[point:])
            else:
                c1, c2 = p1.copy(), p2.copy()
            for child in (c1, c2):
                for g in range(genes):
                    if rng.random() < p_mut:
                        lo = child[g - 1] if g > 0 else 0
                        hi = child[g + 1] if g + 1 < genes else n_layers
                        child[g] = rng.randint(lo, hi)
                offspring.append(tuple(child))
        offspring = offspring[: params.population]
        _evaluate_new(sys, offspring, memo)
        _evaluate_new(sys, sweep.take(sweep.per_generation, memo), memo)

        combined = population + offspring
        combined_records = [memo[c] for c in combined]
        fronts = _constrained_fronts(combined_records, sys, params.objectives)
        survivors: list[int] = []
        for f in fronts:
            if len(survivors) + len(f) <= params.population:
                survivors.extend(f)
            else:
                dists = crowding_distance([combined_records[i] for i in f], params.objectives)
                ordered = sorted(zip(f, dists), key=lambda t: (-t[1], t[0]))
                survivors.extend(i for i, _ in ordered[: params.population - len(survivors)])
                break
        population = [combined[i] for i in survivors]
        generations_run += 1

    return _front_from_memo(sys, memo, params.objectives, generations_run=generations_run)


def select_final(front: ParetoFront, weights: ObjectiveWeights) -> EvaluationRecord:
    """Weighted-cost argmin over front members; ties prefer fewer partitions."""
    if not front.members:
        raise EvaluationError("cannot select from an empty front")
    return min(
        front.members,
        key=lambda r: (weighted_cost(r, weights), r.partition_count, r.cuts),
    )
