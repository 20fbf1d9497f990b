"""Command-line entry points.

Subcommands: simulate, solve, bounds, gen-graph, experiment.  All emit JSON
(or CSV paths for experiments) and exit nonzero on any validation error.
Source labels in all output are 1-based.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import build_threshold_digraph, cover_bound, greedy_vertex_cover, lower_bound
from .engine import Instance, SimConfig, instance_from_config, run_simulation
from .experiments import PRESET_NAMES, SCALES, run_experiment
from .model import (
    CorrelationMatrix,
    WeightVector,
    instance_to_json,
    load_instance,
    validate_instance,
)
from .solver import solve_optimal_randomized
from .topology import SourceLayout, TopologySpec


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_config(path: str) -> tuple[SimConfig, Instance | None]:
    obj = json.loads(Path(path).read_text())
    inst_obj = obj.pop("instance", None)
    cfg = SimConfig.from_dict(obj)
    instance = None
    if inst_obj is not None:
        P = CorrelationMatrix(inst_obj["P"])
        w = WeightVector(inst_obj["w"]) if "w" in inst_obj else WeightVector.uniform(P.n)
        layout = None
        if inst_obj.get("layout") is not None:
            layout = SourceLayout(np.asarray(inst_obj["layout"], dtype=np.float64))
        instance = Instance(P, w, layout)
    return cfg, instance


def _cmd_simulate(args) -> int:
    cfg, instance = _load_config(args.config)
    report = run_simulation(cfg, instance)
    _emit(report.to_dict(), args.out)
    return 0


def _cmd_solve(args) -> int:
    P, w, _ = load_instance(args.instance)
    problems = validate_instance(P, w)
    if problems:
        raise ValueError("; ".join(problems))
    report = solve_optimal_randomized(P, w, tol=args.tol, max_iter=args.max_iter)
    _emit(report.to_dict(), args.out)
    return 0 if report.converged else 3


def _cmd_bounds(args) -> int:
    P, w, _ = load_instance(args.instance)
    digraph = build_threshold_digraph(P, args.threshold)
    cover = greedy_vertex_cover(digraph)
    payload = {
        "lower_bound": lower_bound(w, P),
        "solver_objective": solve_optimal_randomized(P, w).objective,
        "threshold": args.threshold,
        "cover": [i + 1 for i in cover.cover],
        "cover_size": cover.size,
        "cover_bound": cover_bound(cover.size, args.threshold),
    }
    _emit(payload, args.out)
    return 0


def _cmd_gen_graph(args) -> int:
    spec = TopologySpec.from_dict(json.loads(Path(args.spec).read_text()))
    layout, P = spec.build()
    w = WeightVector.uniform(P.n)
    text = instance_to_json(P, w, None if layout is None else layout.positions)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_experiment(args) -> int:
    result = run_experiment(args.preset, args.out, scale=args.scale, jobs=args.jobs)
    _emit(result, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corraoi",
        description="Age-of-information scheduling over correlated sources: "
        "simulation, optimal policies, bounds and experiment presets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one simulation from a JSON config")
    p_sim.add_argument("config", help="JSON file with the run description")
    p_sim.add_argument("--out", help="write the report JSON here instead of stdout")
    p_sim.set_defaults(func=_cmd_simulate)

    p_solve = sub.add_parser("solve", help="optimal stationary randomized policy for an instance")
    p_solve.add_argument("instance", help="instance JSON file (fields n, P, w)")
    p_solve.add_argument("--tol", type=float, default=1e-6)
    p_solve.add_argument("--max-iter", type=int, default=100_000)
    p_solve.add_argument("--out", help="write the report JSON here instead of stdout")
    p_solve.set_defaults(func=_cmd_solve)

    p_bounds = sub.add_parser("bounds", help="lower bound and threshold cover bound for an instance")
    p_bounds.add_argument("instance", help="instance JSON file (fields n, P, w)")
    p_bounds.add_argument("--threshold", type=float, required=True)
    p_bounds.add_argument("--out", help="write the JSON here instead of stdout")
    p_bounds.set_defaults(func=_cmd_bounds)

    p_gen = sub.add_parser("gen-graph", help="materialize a topology spec into an instance file")
    p_gen.add_argument("spec", help="topology JSON (kind, n, p, r, gamma, target_avg_degree, seed)")
    p_gen.add_argument("--out", help="write the instance JSON here instead of stdout")
    p_gen.set_defaults(func=_cmd_gen_graph)

    p_exp = sub.add_parser("experiment", help="run a named experiment preset")
    p_exp.add_argument("preset", choices=PRESET_NAMES)
    p_exp.add_argument("--out", required=True, help="directory for CSV outputs")
    p_exp.add_argument("--scale", choices=SCALES, default="desk")
    p_exp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_exp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
