"""Closed-form performance bounds and the correlation-digraph cover tools.

The lower bound holds for every causal scheduling policy; the cover bound
is achieved by round-robin over any set of senders that jointly reach all
sources with correlation above a threshold.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CorrelationMatrix, WeightVector
from .solver import solve_optimal_randomized


def lower_bound(w: WeightVector, P: CorrelationMatrix, **solver_kwargs) -> float:
    """Value no causal policy can beat: half the total weight plus half the
    optimal stationary objective."""
    report = solve_optimal_randomized(P, w, **solver_kwargs)
    half_weight = 0.5 * float(np.sum(w.values))
    return half_weight + 0.5 * report.objective


def uncorrelated_baseline(n: int) -> float:
    """Optimal equal-weight mean age when sources share nothing: (n + 1) / 2."""
    if n < 1:
        raise ValueError(f"need at least one source, got n = {n}")
    return (n + 1) / 2


@dataclass(frozen=True, eq=False)
class ThresholdDigraph:
    """Directed graph with an edge i -> j whenever p_ij strictly exceeds
    the threshold; self-loops count."""

    adj: np.ndarray
    threshold: float

    def __post_init__(self) -> None:
        arr = np.array(self.adj, dtype=bool)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise ValueError(f"adjacency must be a nonempty square matrix, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "adj", arr)

    @property
    def n(self) -> int:
        return self.adj.shape[0]


def build_threshold_digraph(P: CorrelationMatrix, threshold: float) -> ThresholdDigraph:
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie strictly between 0 and 1, got {threshold}")
    return ThresholdDigraph(P.entries > threshold, threshold)


@dataclass(frozen=True)
class CoverResult:
    """A set of senders whose out-edges reach every source."""

    cover: tuple[int, ...]
    size: int
    threshold: float


def greedy_vertex_cover(g: ThresholdDigraph) -> CoverResult:
    """Greedy directed cover: repeatedly pick the sender reaching the most
    still-uncovered sources, ties toward the smaller index.

    The result is a valid cover, not necessarily a minimum one; the cover
    bound below is valid for any cover.
    """
    uncoverable = np.nonzero(~np.any(g.adj, axis=0))[0]
    if uncoverable.size:
        labels = ", ".join(str(j + 1) for j in uncoverable)
        raise ValueError(f"source(s) {labels} have no in-edge above the threshold; no cover exists")
    covered = np.zeros(g.n, dtype=bool)
    cover: list[int] = []
    while not covered.all():
        gains = (g.adj & ~covered[None, :]).sum(axis=1)
        pick = int(np.argmax(gains))
        cover.append(pick)
        covered |= g.adj[pick]
    return CoverResult(cover=tuple(sorted(cover)), size=len(cover), threshold=g.threshold)


def cover_bound(cover_size: int, p: float) -> float:
    """Weighted mean age achievable by round-robin over a cover whose edges
    all carry correlation at least p (weights summing to 1)."""
    if cover_size < 1:
        raise ValueError(f"cover size must be positive, got {cover_size}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"correlation value must lie in (0, 1], got {p}")
    return cover_size / p


def rgg_bound(p: float, r: float) -> float:
    """Geometric cover bound for any unit-square layout: tiling by boxes of
    side r / sqrt(2) needs at most 2 / r^2 senders, each heard with
    probability p."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"correlation value must lie in (0, 1], got {p}")
    if r <= 0.0:
        raise ValueError(f"radius must be positive, got {r}")
    return 2.0 / (p * r * r)


def maf_star_lower_bound(n: int, p: float) -> float:
    """Floor on the equal-weight mean age of max-age-first on the star
    instance: (n-1)^2 / (2n - (n+1)(1-p)^(n-1)).  Needs p >= 1/(n-1)."""
    if n < 2:
        raise ValueError(f"the star separation needs at least two sources, got n = {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"correlation value must lie in [0, 1], got {p}")
    if p < 1.0 / (n - 1) - 1e-12:
        raise ValueError(f"the bound needs p >= 1/(n-1) = {1.0 / (n - 1):.6g}, got {p}")
    return (n - 1) ** 2 / (2 * n - (n + 1) * (1.0 - p) ** (n - 1))
