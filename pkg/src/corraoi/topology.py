"""Instance generators: geometric graphs, star matrices, and mobility.

Geometric instances place sources in the unit square (or the hyperbolic
disk) and assign correlation p to every pair strictly closer than the
connection radius; the diagonal is always 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import CorrelationMatrix
from .rng import stream_rng

TOPOLOGY_KINDS = ("rgg", "hgg", "star", "identity", "explicit")


@dataclass(frozen=True, eq=False)
class SourceLayout:
    """Source positions in the unit square."""

    positions: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.positions, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
            raise ValueError(f"positions must have shape (n, 2), got {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("positions must lie in the unit square")
        arr.setflags(write=False)
        object.__setattr__(self, "positions", arr)

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def _rgg_entries(positions: np.ndarray, r: float, p: float) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    entries = np.where(dist2 < r * r, p, 0.0)
    np.fill_diagonal(entries, 1.0)
    return entries


def rebuild_rgg(layout: SourceLayout, r: float, p: float) -> CorrelationMatrix:
    """Correlation matrix induced by a layout: pairs strictly closer than r
    get correlation p, everyone keeps diagonal 1."""
    if r <= 0.0:
        raise ValueError(f"radius must be positive, got {r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"correlation value must lie in [0, 1], got {p}")
    return CorrelationMatrix(_rgg_entries(layout.positions, r, p))


def rgg_generate(
    n: int, r: float, p: float, rng: np.random.Generator
) -> tuple[SourceLayout, CorrelationMatrix]:
    """Uniformly random layout in the unit square plus its matrix."""
    if n < 1:
        raise ValueError(f"need at least one source, got n = {n}")
    layout = SourceLayout(rng.random((n, 2)))
    return layout, rebuild_rgg(layout, r, p)


def star_matrix(n: int, p: float) -> CorrelationMatrix:
    """Hub-and-spokes correlation: source 1 overlaps every other source
    with probability p, all other pairs are uncorrelated."""
    if n < 1:
        raise ValueError(f"need at least one source, got n = {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"correlation value must lie in [0, 1], got {p}")
    entries = np.eye(n)
    entries[0, 1:] = p
    entries[1:, 0] = p
    return CorrelationMatrix(entries)


def brownian_step(layout: SourceLayout, v_max: float, rng: np.random.Generator) -> SourceLayout:
    """One mobility slot: Gaussian displacement with std v_max / 2 per axis,
    norm-clamped to v_max, then reflected at the unit-square walls."""
    if v_max < 0.0:
        raise ValueError(f"speed limit must be nonnegative, got {v_max}")
    return SourceLayout(_brownian_kernel(layout.positions, v_max, rng))


def _brownian_kernel(positions: np.ndarray, v_max: float, rng: np.random.Generator) -> np.ndarray:
    step = rng.normal(0.0, v_max / 2.0, positions.shape)
    norms = np.sqrt(np.einsum("ij,ij->i", step, step))
    over = norms > v_max
    if np.any(over):
        step[over] *= (v_max / norms[over])[:, None]
    pos = positions + step
    pos = np.where(pos < 0.0, -pos, pos)
    pos = np.where(pos > 1.0, 2.0 - pos, pos)
    return pos


def hgg_generate(
    n: int,
    target_avg_degree: float,
    gamma: float,
    p: float,
    rng: np.random.Generator,
) -> CorrelationMatrix:
    """Hyperbolic geometric graph with power-law degrees (exponent gamma).

    Sources get quasi-uniform radii on a disk of radius R = 2 ln n + C and
    uniform angles; pairs within hyperbolic distance R are correlated with
    value p.  C is tuned by bisection (with common random numbers) so the
    realized average degree comes close to the target.
    """
    if n < 1:
        raise ValueError(f"need at least one source, got n = {n}")
    if gamma <= 2.0:
        raise ValueError(f"degree exponent must exceed 2, got {gamma}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"correlation value must lie in [0, 1], got {p}")
    if target_avg_degree < 1.0:
        raise ValueError(f"target average degree must be at least 1, got {target_avg_degree}")
    if n == 1:
        return CorrelationMatrix(np.ones((1, 1)))
    alpha = (gamma - 1.0) / 2.0
    u_rad = rng.random(n)
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    cos_dtheta = np.cos(theta[:, None] - theta[None, :])

    def adjacency(c: float) -> np.ndarray:
        R = 2.0 * math.log(n) + c
        radii = np.arccosh(1.0 + u_rad * (math.cosh(alpha * R) - 1.0)) / alpha
        ch, sh = np.cosh(radii), np.sinh(radii)
        cosh_d = np.maximum(ch[:, None] * ch[None, :] - sh[:, None] * sh[None, :] * cos_dtheta, 1.0)
        adj = cosh_d < math.cosh(R)
        np.fill_diagonal(adj, False)
        return adj

    # Average degree falls as the disk grows, so bisect C on a bracket from
    # a near-complete graph to a near-empty one.
    lo, hi = -2.0 * math.log(n) + 1e-6, 12.0
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        if adjacency(mid).sum() / n > target_avg_degree:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi, 0.5 * (lo + hi)), key=lambda c: abs(adjacency(c).sum() / n - target_avg_degree))
    entries = np.where(adjacency(best), p, 0.0)
    np.fill_diagonal(entries, 1.0)
    return CorrelationMatrix(entries)


@dataclass(frozen=True, eq=False)
class TopologySpec:
    """Declarative description of an instance family member.

    kind selects the generator; the seed feeds the instance random stream,
    so equal specs always materialize the same matrix.
    """

    kind: str
    n: int
    p: float | None = None
    r: float | None = None
    gamma: float | None = None
    target_avg_degree: float | None = None
    entries: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in TOPOLOGY_KINDS:
            raise ValueError(f"unknown topology kind {self.kind!r}; expected one of {TOPOLOGY_KINDS}")
        if self.n < 1:
            raise ValueError(f"need at least one source, got n = {self.n}")
        if self.kind in ("rgg", "hgg", "star"):
            if self.p is None:
                raise ValueError(f"{self.kind} topology needs a correlation value p")
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"correlation value must lie in [0, 1], got {self.p}")
        if self.kind == "rgg":
            if self.r is None:
                raise ValueError("rgg topology needs a radius r")
            if self.r <= 0.0:
                raise ValueError(f"radius must be positive, got {self.r}")
        if self.kind == "hgg":
            if self.gamma is None or self.target_avg_degree is None:
                raise ValueError("hgg topology needs gamma and target_avg_degree")
            if self.gamma <= 2.0:
                raise ValueError(f"degree exponent must exceed 2, got {self.gamma}")
            if self.target_avg_degree < 1.0:
                raise ValueError(f"target average degree must be at least 1, got {self.target_avg_degree}")
        if self.kind == "explicit":
            if self.entries is None:
                raise ValueError("explicit topology needs matrix entries")
            object.__setattr__(self, "entries", CorrelationMatrix(self.entries).entries)

    def build(self) -> tuple[SourceLayout | None, CorrelationMatrix]:
        """Materialize the layout (geometric kinds only) and the matrix."""
        rng = stream_rng(self.seed, "instance")
        if self.kind == "rgg":
            return rgg_generate(self.n, self.r, self.p, rng)
        if self.kind == "hgg":
            return None, hgg_generate(self.n, self.target_avg_degree, self.gamma, self.p, rng)
        if self.kind == "star":
            return None, star_matrix(self.n, self.p)
        if self.kind == "identity":
            return None, CorrelationMatrix.identity(self.n)
        return None, CorrelationMatrix(self.entries)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "n": self.n, "seed": self.seed}
        for key in ("p", "r", "gamma", "target_avg_degree"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.entries is not None:
            out["entries"] = np.asarray(self.entries).tolist()
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "TopologySpec":
        known = {"kind", "n", "p", "r", "gamma", "target_avg_degree", "entries", "seed"}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown topology fields: {sorted(unknown)}")
        return cls(**{k: obj[k] for k in known & set(obj)})
