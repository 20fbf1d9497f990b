"""Shared domain types for age scheduling over correlated sources.

Conventions used throughout the package:

* sources are indexed 0..n-1 internally; user-facing text (CLI output,
  CSV columns, diagnostics) labels them 1..n;
* row i of a correlation matrix belongs to sender i, column j to subject j:
  entries[i, j] is the probability that an update transmitted by source i
  also refreshes the receiver's view of source j;
* arrays held by the frozen types are defensive copies with the writeable
  flag cleared, so instances can be shared freely.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SUM_SLACK = 1e-12  # tolerated overshoot of sum(pi) above 1


def _frozen_1d(values, *, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Square matrix of delivery probabilities in [0, 1].

    The diagonal is conventionally 1 (a source always carries its own
    state) but construction never forces that, so partially self-informative
    sources can be modelled.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"correlation matrix must be square, got shape {arr.shape}")
        if arr.shape[0] == 0:
            raise ValueError("correlation matrix needs at least one source")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("correlation entries must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n: int) -> "CorrelationMatrix":
        return cls(np.eye(n))


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Strictly positive per-source importance weights."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen_1d(self.values, name="weights")
        if arr.min() <= 0.0:
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class AoiState:
    """Per-source ages at the start of a slot, plus the slot counter."""

    ages: np.ndarray
    slot: int = 0

    def __post_init__(self) -> None:
        arr = _frozen_1d(self.ages, name="ages")
        if arr.min() < 0.0:
            raise ValueError("ages must be nonnegative")
        if int(self.slot) != self.slot or self.slot < 0:
            raise ValueError(f"slot must be a nonnegative integer, got {self.slot!r}")
        object.__setattr__(self, "ages", arr)
        object.__setattr__(self, "slot", int(self.slot))

    @property
    def n(self) -> int:
        return self.ages.shape[0]

    @classmethod
    def fresh(cls, n: int) -> "AoiState":
        return cls(np.ones(n), 0)


@dataclass(frozen=True)
class ScheduleDecision:
    """Which single source transmits in the current slot."""

    source: int

    def __post_init__(self) -> None:
        if int(self.source) != self.source or self.source < 0:
            raise ValueError(f"scheduled source must be a nonnegative integer, got {self.source!r}")
        object.__setattr__(self, "source", int(self.source))


@dataclass(frozen=True, eq=False)
class CorrelationDraw:
    """Realized per-subject refresh fractions for one transmission.

    Under the Bernoulli model the entries are exactly 0 or 1; other models
    may produce any value in [0, 1].
    """

    x: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen_1d(self.x, name="correlation draw")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("correlation draw entries must lie in [0, 1]")
        object.__setattr__(self, "x", arr)

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True, eq=False)
class PolicyDistribution:
    """Sub-probability vector over sources for stationary randomized policies.

    The total mass may be below 1 (idling allowed); it must never exceed 1
    beyond SUM_SLACK.
    """

    pi: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen_1d(self.pi, name="scheduling distribution")
        if arr.min() < 0.0:
            raise ValueError("scheduling probabilities must be nonnegative")
        if arr.sum() > 1.0 + SUM_SLACK:
            raise ValueError(f"scheduling probabilities sum to {arr.sum()}, above 1")
        object.__setattr__(self, "pi", arr)

    @property
    def n(self) -> int:
        return self.pi.shape[0]

    def is_normalized(self, tol: float = 1e-9) -> bool:
        return abs(float(self.pi.sum()) - 1.0) <= tol

    def normalized(self) -> "PolicyDistribution":
        total = float(self.pi.sum())
        if total <= 0.0:
            raise ValueError("cannot normalize an all-zero scheduling distribution")
        return PolicyDistribution(self.pi / total)

    @classmethod
    def uniform(cls, n: int) -> "PolicyDistribution":
        return cls(np.full(n, 1.0 / n))


def validate_instance(P, w) -> list[str]:
    """Diagnose an instance without raising; returns human-readable findings.

    Accepts the constructed types or raw array-likes, so malformed input can
    be described instead of rejected at construction.  An empty list means
    the instance is well formed and every source is reachable.
    """
    problems: list[str] = []
    p = np.asarray(getattr(P, "entries", P), dtype=np.float64)
    wv = np.asarray(getattr(w, "values", w), dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] == 0:
        problems.append(f"correlation matrix is not square and nonempty: shape {p.shape}")
        return problems
    n = p.shape[0]
    if wv.ndim != 1 or wv.shape[0] != n:
        problems.append(f"weight vector shape {wv.shape} does not match {n} sources")
    bad = ~np.isfinite(p) | (p < 0.0) | (p > 1.0)
    for i, j in np.argwhere(bad):
        problems.append(f"correlation entry ({i + 1},{j + 1}) = {p[i, j]} outside [0, 1]")
    if wv.ndim == 1:
        for (k,) in np.argwhere(~np.isfinite(wv) | (wv <= 0.0)):
            problems.append(f"nonpositive weight at source {k + 1}")
    for (j,) in np.argwhere(~np.any(np.nan_to_num(p) > 0.0, axis=0)):
        problems.append(
            f"source {j + 1} unreachable: column {j + 1} of the correlation matrix"
            " is all zeros, so its average age is unbounded under every policy"
        )
    return problems


def instance_to_json(P: CorrelationMatrix, w: WeightVector, layout: np.ndarray | None = None) -> str:
    """Serialize an instance; floats survive the round trip bit-exactly."""
    payload: dict = {"n": P.n, "P": P.entries.tolist(), "w": w.values.tolist()}
    if layout is not None:
        payload["layout"] = np.asarray(layout, dtype=np.float64).tolist()
    return json.dumps(payload, indent=2)


def instance_from_json(text: str) -> tuple[CorrelationMatrix, WeightVector, np.ndarray | None]:
    obj = json.loads(text)
    try:
        P = CorrelationMatrix(obj["P"])
        w = WeightVector(obj["w"])
    except KeyError as missing:
        raise ValueError(f"instance JSON is missing the {missing} field") from None
    if "n" in obj and obj["n"] != P.n:
        raise ValueError(f"instance JSON claims n = {obj['n']} but P has {P.n} rows")
    if w.n != P.n:
        raise ValueError(f"weight vector has {w.n} entries but P has {P.n} rows")
    layout = None
    if obj.get("layout") is not None:
        layout = np.asarray(obj["layout"], dtype=np.float64)
        if layout.shape != (P.n, 2):
            raise ValueError(f"layout shape {layout.shape} does not match ({P.n}, 2)")
    return P, w, layout


def load_instance(path) -> tuple[CorrelationMatrix, WeightVector, np.ndarray | None]:
    return instance_from_json(Path(path).read_text())


def save_instance(path, P: CorrelationMatrix, w: WeightVector, layout: np.ndarray | None = None) -> None:
    Path(path).write_text(instance_to_json(P, w, layout) + "\n")
