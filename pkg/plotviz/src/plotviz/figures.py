"""Render comparison figures from the experiment runner's CSV files.

The only coupling to the producer is its flat CSV schema.  Summary files
carry the columns (preset, policy, n, p, r, model, seed, T,
weighted_avg_aoi, lower_bound, cover_bound, solver_objective, wall_ms);
time-series files carry (preset, policy, seed, t, window_avg).  Rows with
policy "bound" hold per-instance lower bounds instead of simulation output.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURES = ("fig3", "fig4", "fig5", "fig6")
BOUND_POLICY = "bound"
BOUND_LABEL = "lower bound"

# Columns each figure actually reads; validated against the CSV header
# before any row parsing so schema drift fails loudly.
REQUIRED_COLUMNS = {
    "fig3": ("policy", "n", "seed", "weighted_avg_aoi", "lower_bound"),
    "fig4": ("policy", "n", "seed", "weighted_avg_aoi", "lower_bound"),
    "fig5": ("policy", "model", "p", "seed", "weighted_avg_aoi"),
    "fig6": ("policy", "seed", "t", "window_avg"),
}

_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "font.size": 10.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 9.0,
    # element ids in SVG output are salted hashes; a fixed salt keeps
    # re-renders byte-identical
    "svg.hashsalt": "plotviz",
}

_AXIS_LABELS = {
    "fig3": ("network size N", "weighted average AoI"),
    "fig4": ("network size N", "weighted average AoI"),
    "fig5": ("correlation parameter p", "weighted average AoI"),
    "fig6": ("slot t", "windowed weighted AoI"),
}


@dataclass(frozen=True)
class FigureSpec:
    """One figure to draw: which layout, which CSV, where the image goes."""

    figure: str
    csv_path: str
    out_path: str
    dpi: int = 150
    title: str | None = None

    def __post_init__(self) -> None:
        if self.figure not in FIGURES:
            raise ValueError(f"unknown figure {self.figure!r}; expected one of {FIGURES}")
        if self.dpi < 10:
            raise ValueError(f"dpi must be at least 10, got {self.dpi}")


@dataclass(frozen=True)
class Series:
    """One plotted line after aggregation: means and standard errors over
    the seed/instance replicates at each x."""

    label: str
    x: tuple[float, ...]
    mean: tuple[float, ...]
    se: tuple[float, ...]
    dashed: bool = False


@dataclass(frozen=True)
class RenderReport:
    figure: str
    out_path: str
    series: tuple[Series, ...] = field(default_factory=tuple)
    rows_used: int = 0


def _read_rows(spec: FigureSpec) -> list[dict]:
    if not os.path.isfile(spec.csv_path):
        raise ValueError(f"input CSV not found: {spec.csv_path}")
    with open(spec.csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or ()
        missing = [c for c in REQUIRED_COLUMNS[spec.figure] if c not in header]
        if missing:
            raise ValueError(
                f"{spec.csv_path} is missing column(s) {missing} needed for {spec.figure}"
            )
        rows = list(reader)
    if not rows:
        raise ValueError(f"{spec.csv_path} has a header but no data rows")
    return rows


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


def _aggregate(rows: list[dict], key_cols: tuple[str, ...], x_col: str, y_col: str,
               x_type=float) -> list[Series]:
    """Group rows by key_cols, then reduce the y column to mean +/- SE at
    each x.  Group and x order follow first appearance, which the producer
    already sorts, so output is deterministic."""
    groups: dict[tuple, dict[float, list[float]]] = {}
    for row in rows:
        key = tuple(row[c] for c in key_cols)
        x = float(x_type(row[x_col]))
        groups.setdefault(key, {}).setdefault(x, []).append(float(row[y_col]))
    out = []
    for key, per_x in groups.items():
        xs = sorted(per_x)
        stats = [_mean_se(per_x[x]) for x in xs]
        out.append(
            Series(
                label=" / ".join(key),
                x=tuple(xs),
                mean=tuple(m for m, _ in stats),
                se=tuple(s for _, s in stats),
            )
        )
    return out


def _scaling_series(rows: list[dict]) -> list[Series]:
    policy_rows = [r for r in rows if r["policy"] != BOUND_POLICY]
    bound_rows = [r for r in rows if r["policy"] == BOUND_POLICY]
    if not policy_rows:
        raise ValueError("no policy rows to plot")
    series = _aggregate(policy_rows, ("policy",), "n", "weighted_avg_aoi", x_type=int)
    if bound_rows:
        (bound,) = _aggregate(bound_rows, ("policy",), "n", "lower_bound", x_type=int)
        series.append(Series(BOUND_LABEL, bound.x, bound.mean, bound.se, dashed=True))
    return series


def _fig5_series(rows: list[dict]) -> list[Series]:
    policy_rows = [r for r in rows if r["policy"] != BOUND_POLICY]
    if not policy_rows:
        raise ValueError("no policy rows to plot")
    return _aggregate(policy_rows, ("policy", "model"), "p", "weighted_avg_aoi")


def _fig6_series(rows: list[dict]) -> list[Series]:
    return _aggregate(rows, ("policy",), "t", "window_avg", x_type=int)


_BUILDERS = {
    "fig3": _scaling_series,
    "fig4": _scaling_series,
    "fig5": _fig5_series,
    "fig6": _fig6_series,
}

# Image metadata is pinned per format so re-rendering identical data gives
# identical bytes (PDF and SVG otherwise embed a creation date).
_METADATA = {
    ".png": {"Software": "plotviz"},
    ".svg": {"Date": None},
    ".pdf": {"CreationDate": None},
}


def render(spec: FigureSpec) -> RenderReport:
    """Draw one figure and write it atomically to spec.out_path.

    Returns a report describing the plotted series; nothing is written if
    reading, validation or drawing fails.
    """
    rows = _read_rows(spec)
    series = _BUILDERS[spec.figure](rows)
    xlabel, ylabel = _AXIS_LABELS[spec.figure]
    ext = os.path.splitext(spec.out_path)[1].lower() or ".png"
    tmp_path = spec.out_path + ".tmp"
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        try:
            for s in series:
                ax.errorbar(
                    s.x,
                    s.mean,
                    yerr=s.se,
                    label=s.label,
                    linestyle="--" if s.dashed else "-",
                    color="black" if s.dashed else None,
                    marker="o",
                    markersize=3,
                    capsize=2,
                )
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if spec.title:
                ax.set_title(spec.title)
            ax.legend()
            fig.tight_layout()
            fig.savefig(tmp_path, dpi=spec.dpi, format=ext.lstrip("."),
                        metadata=_METADATA.get(ext))
            os.replace(tmp_path, spec.out_path)
        finally:
            plt.close(fig)
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
    return RenderReport(
        figure=spec.figure,
        out_path=spec.out_path,
        series=tuple(series),
        rows_used=len(rows),
    )
