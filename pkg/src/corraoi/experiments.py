"""Experiment presets: expansion into cells, execution, CSV emission.

Summary CSVs carry one row per simulated cell plus one bound row per
distinct static instance (policy column "bound").  Every row's provenance
columns are enough to re-run that cell in isolation; rerun_row does exactly
that.  Output files are written atomically and rows are fully sorted, so
identical invocations produce identical bytes except for the wall_ms
column.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import build_threshold_digraph, cover_bound, greedy_vertex_cover
from .dynamics import BERNOULLI, CONSTANT, UNIFORM_JITTER, CorrelationModel
from .engine import Instance, MobilityConfig, SimConfig, instance_from_config, run_simulation
from .model import WeightVector
from .solver import solve_optimal_randomized
from .topology import TopologySpec

PRESET_NAMES = (
    "fig3_rgg_scaling",
    "fig4_hgg_scaling",
    "fig5_correlation_models",
    "fig6_mobile_ema",
    "thm7_separation",
)
SCALES = ("desk", "paper")

SUMMARY_COLUMNS = (
    "preset",
    "policy",
    "n",
    "p",
    "r",
    "model",
    "seed",
    "T",
    "weighted_avg_aoi",
    "lower_bound",
    "cover_bound",
    "solver_objective",
    "wall_ms",
)
TIMESERIES_COLUMNS = ("preset", "policy", "seed", "t", "window_avg")

_SCALING_POLICIES = (
    {"kind": "uniform_randomized"},
    {"kind": "optimal_randomized"},
    {"kind": "max_aoi_first"},
    {"kind": "linear_max_weight"},
)


def rgg_radius(n: int) -> float:
    """Connectivity-scaled radius 1.1 * sqrt(ln n / n)."""
    return 1.1 * math.sqrt(math.log(n) / n)


def hgg_target_degree(n: int) -> float:
    """Average degree matched to the unit-square geometric graph with the
    connectivity-scaled radius: pi * 1.21 * ln n."""
    return math.pi * 1.21 * math.log(n)


@dataclass(frozen=True, eq=False)
class ExperimentCell:
    """One simulation of the factorial design, plus the bound parameters of
    the instance it runs on."""

    preset: str
    policy_label: str
    cfg: SimConfig
    p: float | None
    r: float | None
    emit_timeseries: bool = False
    bound_guarantee: float | None = None

    @property
    def provenance(self) -> dict:
        return {
            "preset": self.preset,
            "policy": self.policy_label,
            "n": self.cfg.topology.n,
            "p": self.p,
            "r": self.r,
            "model": self.cfg.model.kind,
            "seed": self.cfg.seed,
            "T": self.cfg.horizon,
        }


def _take(overrides: dict, allowed: tuple[str, ...]) -> dict:
    unknown = set(overrides) - set(allowed)
    if unknown:
        raise ValueError(f"unknown override(s) {sorted(unknown)}; allowed: {sorted(allowed)}")
    if "policies" in overrides:
        overrides = dict(overrides)
        overrides["policies"] = tuple(
            p if isinstance(p, dict) else {"kind": p} for p in overrides["policies"]
        )
    return overrides


def _scaling_cells(preset: str, scale: str, o: dict) -> list[ExperimentCell]:
    o = _take(o, ("ns", "instances", "horizon", "p", "policies", "window"))
    ns = o.get("ns", (20, 40, 60, 80, 100))
    instances = o.get("instances", 10)
    horizon = o.get("horizon", 10_000)
    p = o.get("p", 0.7)
    policies = o.get("policies", _SCALING_POLICIES)
    cells = []
    for n in ns:
        if preset == "fig3_rgg_scaling":
            topo_args = {"kind": "rgg", "r": rgg_radius(n)}
        else:
            topo_args = {"kind": "hgg", "gamma": 2.5, "target_avg_degree": min(hgg_target_degree(n), n - 1)}
        for inst in range(instances):
            topo = TopologySpec(n=n, p=p, seed=inst, **topo_args)
            for pol in policies:
                cfg = SimConfig(
                    horizon=horizon,
                    seed=inst,
                    model=CorrelationModel(BERNOULLI),
                    policy=dict(pol),
                    topology=topo,
                    window=o.get("window", 100),
                )
                cells.append(
                    ExperimentCell(preset, pol["kind"], cfg, p=p, r=topo_args.get("r"), bound_guarantee=p)
                )
    return cells


def _fig5_cells(scale: str, o: dict) -> list[ExperimentCell]:
    o = _take(o, ("n", "r", "ps", "instances", "horizon", "policies", "models", "window"))
    n = o.get("n", 90)
    r = o.get("r", 0.25)
    ps = o.get("ps", tuple(round(0.1 * k, 1) for k in range(1, 10)))
    instances = o.get("instances", 10 if scale == "paper" else 1)
    horizon = o.get("horizon", 100_000)
    policies = o.get("policies", ({"kind": "optimal_randomized"}, {"kind": "linear_max_weight"}))
    models = o.get("models", (BERNOULLI, CONSTANT, UNIFORM_JITTER))
    cells = []
    for p in ps:
        for inst in range(instances):
            topo = TopologySpec(kind="rgg", n=n, p=p, r=r, seed=inst)
            for model in models:
                for pol in policies:
                    cfg = SimConfig(
                        horizon=horizon,
                        seed=inst,
                        model=CorrelationModel(model),
                        policy=dict(pol),
                        topology=topo,
                        window=o.get("window", 100),
                    )
                    cells.append(ExperimentCell("fig5_correlation_models", pol["kind"], cfg, p=p, r=r, bound_guarantee=p))
    return cells


def _fig6_cells(scale: str, o: dict) -> list[ExperimentCell]:
    o = _take(o, ("n", "r", "p", "seeds", "horizon", "policies", "window", "v_max", "rebuild_every", "rate"))
    n = o.get("n", 90)
    r = o.get("r", 0.25)
    p = o.get("p", 0.7)
    seeds = o.get("seeds", tuple(range(10)))
    horizon = o.get("horizon", 100_000 if scale == "paper" else 20_000)
    policies = o.get(
        "policies",
        (
            {"kind": "max_aoi_first"},
            {"kind": "ema_max_weight", "rate": o.get("rate", 0.4)},
            {"kind": "oracle_max_weight"},
        ),
    )
    mobility = MobilityConfig(
        enabled=True,
        v_max=o.get("v_max", 0.01),
        rebuild_every=o.get("rebuild_every", 1),
        r=r,
        p=p,
    )
    cells = []
    for seed in seeds:
        topo = TopologySpec(kind="rgg", n=n, p=p, r=r, seed=seed)
        for pol in policies:
            cfg = SimConfig(
                horizon=horizon,
                seed=seed,
                model=CorrelationModel(BERNOULLI),
                policy=dict(pol),
                mobility=mobility,
                topology=topo,
                window=o.get("window", 100),
            )
            cells.append(
                ExperimentCell("fig6_mobile_ema", pol["kind"], cfg, p=p, r=r, emit_timeseries=True)
            )
    return cells


def _thm7_cells(scale: str, o: dict) -> list[ExperimentCell]:
    o = _take(o, ("n", "p", "seeds", "horizon", "policies", "window"))
    n = o.get("n", 100)
    p = o.get("p", 0.5)
    seeds = o.get("seeds", (0,))
    horizon = o.get("horizon", 1_000_000)
    policies = o.get("policies", ({"kind": "linear_max_weight"}, {"kind": "max_aoi_first"}))
    cells = []
    for seed in seeds:
        topo = TopologySpec(kind="star", n=n, p=p, seed=seed)
        for pol in policies:
            cfg = SimConfig(
                horizon=horizon,
                seed=seed,
                model=CorrelationModel(BERNOULLI),
                policy=dict(pol),
                topology=topo,
                window=o.get("window", 100),
                initial_ages="index",
            )
            cells.append(ExperimentCell("thm7_separation", pol["kind"], cfg, p=p, r=None, bound_guarantee=p))
    return cells


def expand_preset(name: str, scale: str = "desk", overrides: dict | None = None) -> list[ExperimentCell]:
    """Full factorial cell list for a preset; overrides shrink or redirect
    single axes (for CI and targeted reruns) without redefining the preset."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; expected one of {SCALES}")
    o = dict(overrides or {})
    if name in ("fig3_rgg_scaling", "fig4_hgg_scaling"):
        return _scaling_cells(name, scale, o)
    if name == "fig5_correlation_models":
        return _fig5_cells(scale, o)
    if name == "fig6_mobile_ema":
        return _fig6_cells(scale, o)
    return _thm7_cells(scale, o)


def _run_cell(cell: ExperimentCell) -> dict:
    report = run_simulation(cell.cfg)
    row = dict(cell.provenance)
    row.update(
        weighted_avg_aoi=report.weighted_avg,
        lower_bound=None,
        cover_bound=None,
        solver_objective=None,
        wall_ms=report.wall_ms,
    )
    series_rows = []
    if cell.emit_timeseries:
        window = cell.cfg.window
        for k, value in enumerate(report.window_series):
            series_rows.append(
                {
                    "preset": cell.preset,
                    "policy": cell.policy_label,
                    "seed": cell.cfg.seed,
                    "t": (k + 1) * window,
                    "window_avg": float(value),
                }
            )
    return {"summary": row, "timeseries": series_rows}


def _bound_row(cell: ExperimentCell) -> dict:
    """Lower bound, greedy cover bound and optimal objective for the
    instance a cell runs on."""
    start = time.perf_counter()
    instance = instance_from_config(cell.cfg)
    report = solve_optimal_randomized(instance.P, instance.w)
    guarantee = cell.bound_guarantee
    cb = None
    if guarantee is not None and 0.0 < guarantee <= 1.0:
        digraph = build_threshold_digraph(instance.P, math.nextafter(guarantee, 0.0))
        cb = cover_bound(greedy_vertex_cover(digraph).size, guarantee)
    row = dict(cell.provenance)
    row.update(
        policy="bound",
        model=None,
        T=None,
        weighted_avg_aoi=None,
        lower_bound=0.5 * float(np.sum(instance.w.values)) + 0.5 * report.objective,
        cover_bound=cb,
        solver_objective=report.objective,
        wall_ms=(time.perf_counter() - start) * 1e3,
    )
    return row


def _instance_key(cell: ExperimentCell) -> str:
    return json.dumps(cell.cfg.topology.to_dict(), sort_keys=True)


def _sort_key(row: dict):
    def num(v, default=-1.0):
        return default if v is None else float(v)

    return (
        row["preset"],
        row["policy"],
        int(row["n"]),
        num(row["p"]),
        num(row["r"]),
        row["model"] or "",
        num(row["seed"]),
        num(row["T"]),
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _canon(value) -> str:
    """Canonical text of a provenance value, whether typed or CSV-sourced."""
    return value if isinstance(value, str) else _fmt(value)


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
    os.replace(tmp, path)


def run_experiment(
    name: str,
    out_dir,
    scale: str = "desk",
    jobs: int = 1,
    overrides: dict | None = None,
) -> dict:
    """Execute a preset and write its CSV outputs.

    Returns the paths written plus row counts.  Partial summary rows are
    flushed to a .partial.csv file as cells complete, so an interrupted run
    leaves usable data behind.
    """
    cells = expand_preset(name, scale, overrides)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "preset": name,
        "scale": scale,
        "cells": [
            {"policy": c.policy_label, "p": c.p, "r": c.r, "config": c.cfg.to_dict(c.cfg.topology.n)}
            for c in cells
        ],
    }
    (out / f"{name}_cells.json").write_text(json.dumps(manifest, indent=2) + "\n")

    summary_rows: list[dict] = []
    series_rows: list[dict] = []
    partial = out / f"{name}_summary.partial.csv"
    with open(partial, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(_run_cell, cells, chunksize=1)
                for result in results:
                    _collect(result, summary_rows, series_rows, writer, fh)
        else:
            for cell in cells:
                _collect(_run_cell(cell), summary_rows, series_rows, writer, fh)

    if name != "fig6_mobile_ema":
        seen: set[str] = set()
        for cell in cells:
            key = _instance_key(cell)
            if key not in seen:
                seen.add(key)
                summary_rows.append(_bound_row(cell))

    summary_rows.sort(key=_sort_key)
    summary_path = out / f"{name}_summary.csv"
    _write_csv(summary_path, SUMMARY_COLUMNS, summary_rows)
    partial.unlink(missing_ok=True)

    timeseries_path = None
    if series_rows:
        series_rows.sort(key=lambda r: (r["preset"], r["policy"], r["seed"], r["t"]))
        timeseries_path = out / f"{name}_timeseries.csv"
        _write_csv(timeseries_path, TIMESERIES_COLUMNS, series_rows)

    return {
        "summary_csv": str(summary_path),
        "timeseries_csv": None if timeseries_path is None else str(timeseries_path),
        "cells": len(cells),
        "summary_rows": len(summary_rows),
        "timeseries_rows": len(series_rows),
    }


def _collect(result: dict, summary_rows, series_rows, writer, fh) -> None:
    summary_rows.append(result["summary"])
    series_rows.extend(result["timeseries"])
    writer.writerow([_fmt(result["summary"].get(c)) for c in SUMMARY_COLUMNS])
    fh.flush()


def rerun_row(row: dict, scale: str = "desk", overrides: dict | None = None) -> dict:
    """Re-execute the single cell a summary row came from and return the
    freshly computed row; provenance columns must match exactly."""
    cells = expand_preset(row["preset"], scale, overrides)
    wanted = {k: _canon(row[k]) for k in ("policy", "n", "p", "r", "model", "seed", "T")}
    for cell in cells:
        have = {k: _fmt(v) for k, v in cell.provenance.items() if k != "preset"}
        if have == wanted:
            return _run_cell(cell)["summary"]
    raise ValueError(f"no cell of {row['preset']} matches the row provenance {wanted}")
