"""Command-line driver: load inputs, explore, and write result files.

Outputs land in --out: evaluations.csv (every evaluated scheme), pareto.csv
(the front), selected.json (weighted-cost pick plus run stats), and
memory_profile.csv (per-cut memory demand sweep), plus run_manifest.json
recording inputs and effective settings. Exit codes: 0 ok, 1 input error,
2 no feasible scheme.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys as _sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .cost import (
    CostError,
    accuracy_from_json,
    link_from_json,
    platform_from_json,
    AccuracyModel,
)
from .evaluator import (
    Constraints,
    EvaluationError,
    EvaluationRecord,
    ObjectiveWeights,
    PartitionScheme,
    SystemSpec,
    evaluate_scheme,
    objectives_config_from_json,
    resolve_weights,
    weighted_cost,
)
from .graph import GraphError, parse_graph, topo_order
from .memory import apply_min_memory_orders, memory_feasible
from .optimizer import GaParams, ParetoFront, exhaustive_pareto, nsga2, select_final

MODES = ("explore", "exhaustive", "evaluate-one")


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    graph_path: Path
    platform_paths: list[Path]
    link_paths: list[Path]
    accuracy_path: Path | None
    constraints_path: Path | None
    weights_arg: str | None
    objectives: tuple[str, ...]
    seed: int
    population: int | None
    generations: int | None
    output_dir: Path
    mode: str
    cuts_arg: str | None

    def validate(self) -> None:
        if len(self.link_paths) != len(self.platform_paths) - 1:
            raise InputError(
                f"{len(self.platform_paths)} platforms need {len(self.platform_paths) - 1} "
                f"links, got {len(self.link_paths)}"
            )
        for p in [self.graph_path, *self.platform_paths, *self.link_paths]:
            if not p.is_file():
                raise InputError(f"input file not found: {p}")
        for p in (self.accuracy_path, self.constraints_path):
            if p is not None and not p.is_file():
                raise InputError(f"input file not found: {p}")
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "evaluate-one" and self.cuts_arg is None:
            raise InputError("evaluate-one mode requires --cuts")


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from None


def _parse_weights_arg(arg: str) -> dict[str, float]:
    entries = {}
    for part in arg.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise InputError(f"weight {part!r} must look like metric=coefficient")
        name, _, value = part.partition("=")
        try:
            entries[name.strip()] = float(value)
        except ValueError:
            raise InputError(f"weight coefficient {value!r} is not a number") from None
    if not entries:
        raise InputError("--weights given but no entries parsed")
    return entries


def build_system(config: RunConfig) -> SystemSpec:
    try:
        graph = parse_graph(_read(config.graph_path))
    except GraphError as e:
        raise InputError(f"{config.graph_path}: {e}") from None
    platforms = []
    for p in config.platform_paths:
        try:
            platforms.append(platform_from_json(_read(p)))
        except CostError as e:
            raise InputError(f"{p}: {e}") from None
    links = []
    for p in config.link_paths:
        try:
            links.append(link_from_json(_read(p)))
        except CostError as e:
            raise InputError(f"{p}: {e}") from None
    if config.accuracy_path is not None:
        try:
            accuracy = accuracy_from_json(_read(config.accuracy_path))
        except CostError as e:
            raise InputError(f"{config.accuracy_path}: {e}") from None
    else:
        accuracy = AccuracyModel(kind="constant", constant_top1=1.0)

    constraints = Constraints()
    weights = None
    if config.constraints_path is not None:
        try:
            constraints, weights = objectives_config_from_json(_read(config.constraints_path))
        except EvaluationError as e:
            raise InputError(f"{config.constraints_path}: {e}") from None
    if config.weights_arg is not None:
        weights = ObjectiveWeights(entries=_parse_weights_arg(config.weights_arg))
    if weights is None:
        weights = ObjectiveWeights(entries={"latency": 1.0})

    order = topo_order(graph, config.seed)
    order, _ = apply_min_memory_orders(graph, order)
    try:
        return SystemSpec(
            graph=graph,
            order=order,
            platforms=tuple(platforms),
            links=tuple(links),
            accuracy=accuracy,
            constraints=constraints,
            weights=weights,
        )
    except EvaluationError as e:
        raise InputError(str(e)) from None


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def _record_row(rec: EvaluationRecord) -> list[str]:
    return [
        ",".join(str(c) for c in rec.cuts),
        _fmt(rec.latency_s),
        _fmt(rec.energy_j),
        _fmt(rec.throughput_fps),
        _fmt(rec.link_bits_total),
        *[_fmt(b) for b in rec.mem_bytes],
        _fmt(rec.top1),
        _fmt(rec.feasible),
        ",".join(rec.violated),
    ]


def _write_records_csv(path: Path, records, platform_names) -> None:
    header = [
        "cuts",
        "latency_s",
        "energy_j",
        "throughput_fps",
        "link_bits_total",
        *[f"mem_{n}_bytes" for n in platform_names],
        "top1",
        "feasible",
        "violated",
    ]
    lines = [";".join(header)]
    lines += [";".join(_record_row(r)) for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_memory_profile(path: Path, sys_spec: SystemSpec) -> None:
    graph, order = sys_spec.graph, sys_spec.order
    names = [p.name for p in sys_spec.platforms]
    header = ["cut", "layer", *[f"mem_{n}_bytes" for n in names]]
    lines = [";".join(header)]
    genes = len(sys_spec.platforms) - 1
    for cut in range(graph.num_layers + 1):
        scheme = PartitionScheme(cuts=(cut,) * genes)
        _, report = memory_feasible(graph, order, scheme, sys_spec.platforms)
        layer = order.order[cut - 1] if cut > 0 else ""
        lines.append(";".join([str(cut), layer, *[_fmt(b) for _, b in report.per_platform_bytes]]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _manifest(config: RunConfig, params: GaParams | None, front: ParetoFront | None, elapsed: float) -> dict:
    def digest(path: Path) -> str:
        return hashlib.sha256(path.read_bytes()).hexdigest()

    inputs = {
        "graph": {"path": str(config.graph_path), "sha256": digest(config.graph_path)},
        "platforms": [{"path": str(p), "sha256": digest(p)} for p in config.platform_paths],
        "links": [{"path": str(p), "sha256": digest(p)} for p in config.link_paths],
    }
    if config.accuracy_path:
        inputs["accuracy"] = {"path": str(config.accuracy_path), "sha256": digest(config.accuracy_path)}
    if config.constraints_path:
        inputs["constraints"] = {"path": str(config.constraints_path), "sha256": digest(config.constraints_path)}
    doc = {
        "tool_version": __version__,
        "python": _sys.version.split()[0],
        "mode": config.mode,
        "seed": config.seed,
        "objectives": list(config.objectives),
        "inputs": inputs,
        "elapsed_s": elapsed,
    }
    if params is not None:
        doc["ga_params"] = {
            "population": params.population,
            "generations": params.generations,
            "crossover_rate": params.crossover_rate,
            "mutation_rate": params.mutation_rate,
            "seed": params.seed,
        }
    if front is not None:
        doc["evaluations"] = front.evaluations
        doc["generations_run"] = front.generations_run
    return doc


def run(config: RunConfig) -> int:
    """Execute the configured mode; returns the process exit status."""
    started = time.monotonic()
    config.validate()
    sys_spec = build_system(config)
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    names = tuple(p.name for p in sys_spec.platforms)

    params = None
    if config.mode == "exhaustive":
        front = exhaustive_pareto(sys_spec, config.objectives)
    else:
        params = GaParams.defaults_for(
            sys_spec.graph.num_layers,
            seed=config.seed,
            objectives=config.objectives,
            population=config.population,
            generations=config.generations,
        )
        front = nsga2(sys_spec, params)

    _write_records_csv(out / "evaluations.csv", front.evaluated, names)
    _write_records_csv(out / "pareto.csv", front.members, names)
    _write_memory_profile(out / "memory_profile.csv", sys_spec)

    selected_doc: dict = {
        "objectives": list(front.objectives),
        "front": [r.to_dict(names) for r in front.members],
        "evaluations": front.evaluations,
        "generations_run": front.generations_run,
    }
    status = 0
    if front.members:
        weights = resolve_weights(sys_spec)
        best = select_final(front, weights)
        selected_doc["selected"] = best.to_dict(names)
        selected_doc["weighted_cost"] = weighted_cost(best, weights)
    else:
        selected_doc["selected"] = None
        selected_doc["diagnostic"] = front.diagnostic
        status = 2
    (out / "selected.json").write_text(
        json.dumps(selected_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    manifest = _manifest(config, params, front, time.monotonic() - started)
    (out / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    if status == 2:
        print(front.diagnostic, file=_sys.stderr)
    else:
        best = selected_doc["selected"]
        print(f"front: {len(front.members)} schemes, selected cuts: {best['cuts']}")
    return status


def evaluate_one(config: RunConfig, cuts: tuple[int, ...]) -> int:
    """Evaluate a single scheme and print it as JSON."""
    config.validate()
    sys_spec = build_system(config)
    rec = evaluate_scheme(PartitionScheme(cuts=cuts), sys_spec)
    names = tuple(p.name for p in sys_spec.platforms)
    print(json.dumps(rec.to_dict(names), indent=2, sort_keys=True))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dnnpart",
        description="Find Pareto-optimal layer-wise partitionings of a DNN over a platform chain.",
    )
    ap.add_argument("--graph", required=True, help="graph JSON file")
    ap.add_argument("--platform", action="append", required=True, help="platform JSON file (ordered, repeatable)")
    ap.add_argument("--link", action="append", default=[], help="link JSON file (repeatable, one per boundary)")
    ap.add_argument("--accuracy", help="accuracy model JSON file")
    ap.add_argument("--constraints", help="constraints/weights JSON file")
    ap.add_argument("--weights", help="inline weights, e.g. latency=1,energy=0.5 (overrides file)")
    ap.add_argument("--objectives", default="latency,energy", help="comma list of Pareto objectives")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pop", type=int, help="GA population size (default derived from layer count)")
    ap.add_argument("--gens", type=int, help="GA generations (default derived from layer count)")
    ap.add_argument("--out", default="dnnpart-out", help="output directory")
    ap.add_argument("--mode", default="explore", choices=MODES)
    ap.add_argument("--cuts", help="cut vector for evaluate-one, e.g. 2 or 1,3")
    return ap


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        graph_path=Path(args.graph),
        platform_paths=[Path(p) for p in args.platform],
        link_paths=[Path(p) for p in args.link],
        accuracy_path=Path(args.accuracy) if args.accuracy else None,
        constraints_path=Path(args.constraints) if args.constraints else None,
        weights_arg=args.weights,
        objectives=tuple(s.strip() for s in args.objectives.split(",") if s.strip()),
        seed=args.seed,
        population=args.pop,
        generations=args.gens,
        output_dir=Path(args.out),
        mode=args.mode,
        cuts_arg=args.cuts,
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    config = _config_from_args(args)
    try:
        if config.mode == "evaluate-one":
            if config.cuts_arg is None:
                raise InputError("evaluate-one mode requires --cuts")
            raw = [s for s in config.cuts_arg.split(",") if s.strip()]
            try:
                cuts = tuple(int(s) for s in raw)
            except ValueError:
                raise InputError(f"--cuts must be a comma list of integers, got {config.cuts_arg!r}") from None
            return evaluate_one(config, cuts)
        return run(config)
    except (InputError, GraphError, CostError, EvaluationError) as e:
        print(f"error: {e}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
