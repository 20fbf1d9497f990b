"""Scheduling policies: pure per-slot decision rules and their stateful
engine-facing wrappers.

All index-valued rules break score ties toward the higher source index.
The decide_* functions are the reference surface; the policy classes reuse
the same score kernels on raw arrays so the two never diverge.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import (
    AoiState,
    CorrelationMatrix,
    PolicyDistribution,
    ScheduleDecision,
    WeightVector,
)
from . import solver as _solver


def _argmax_prefer_high(scores: np.ndarray) -> int:
    """Index of the maximum score, ties resolved toward the larger index."""
    return scores.shape[0] - 1 - int(np.argmax(scores[::-1]))


def _maf_scores(wv: np.ndarray, ages: np.ndarray) -> np.ndarray:
    return np.sqrt(wv) * ages


def _qmw_scores(p: np.ndarray, wv: np.ndarray, ages: np.ndarray) -> np.ndarray:
    # One-slot reduction of the quadratic drift: scheduling i removes
    # sum_j p_ij w_j A_j (A_j + 2) in expectation.
    return p @ (wv * ages * (ages + 2.0))


def _lmw_scores(p: np.ndarray, alpha: np.ndarray, ages: np.ndarray) -> np.ndarray:
    return p @ (alpha * ages)


def _ema_row(row: np.ndarray, rate: float, delivered: np.ndarray) -> np.ndarray:
    return (1.0 - rate) * row + rate * delivered


@dataclass(frozen=True, eq=False)
class LinearMwState:
    """Per-source drift weights alpha_i, normally w_i times the optimal
    stationary average age of source i."""

    alpha: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.alpha, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"alpha must be a nonempty vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() <= 0.0:
            raise ValueError("alpha entries must be finite and strictly positive")
        arr.setflags(write=False)
        object.__setattr__(self, "alpha", arr)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]


@dataclass(frozen=True, eq=False)
class EmaState:
    """Exponentially smoothed estimate of the correlation matrix."""

    p_hat: np.ndarray
    rate: float

    def __post_init__(self) -> None:
        arr = np.array(self.p_hat, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise ValueError(f"estimate must be a nonempty square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("estimate entries must lie in [0, 1]")
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"learning rate must lie in (0, 1], got {self.rate}")
        arr.setflags(write=False)
        object.__setattr__(self, "p_hat", arr)

    @property
    def n(self) -> int:
        return self.p_hat.shape[0]

    @classmethod
    def fresh(cls, n: int, rate: float) -> "EmaState":
        """Opening estimate: the identity, i.e. no assumed correlation."""
        return cls(np.eye(n), rate)


def linear_mw_weights(P: CorrelationMatrix, w: WeightVector, pi_star: PolicyDistribution) -> LinearMwState:
    """Drift weights alpha_i = w_i / sum_j pi*_j p_ji for a reference
    stationary policy, normally the optimal one."""
    if w.n != P.n or pi_star.n != P.n:
        raise ValueError("dimension mismatch between P, w and pi_star")
    d = P.entries.T @ pi_star.pi
    if d.min() <= 0.0:
        raise ValueError("reference policy leaves some source unreachable; alpha undefined")
    return LinearMwState(w.values / d)


def decide_randomized(pi: PolicyDistribution, rng: np.random.Generator) -> ScheduleDecision:
    """Sample a sender from a normalized distribution.  Sources with zero
    probability are never chosen."""
    if not pi.is_normalized():
        raise ValueError("scheduling distribution must sum to 1; call .normalized() first")
    cum = np.cumsum(pi.pi)
    u = rng.random() * cum[-1]
    return ScheduleDecision(int(np.searchsorted(cum, u, side="right")))


def decide_max_aoi_first(w: WeightVector, state: AoiState) -> ScheduleDecision:
    """Schedule the source with the largest sqrt(w_i) * A_i."""
    if w.n != state.n:
        raise ValueError("dimension mismatch between w and ages")
    return ScheduleDecision(_argmax_prefer_high(_maf_scores(w.values, state.ages)))


def decide_quadratic_mw(w: WeightVector, p_used: CorrelationMatrix, state: AoiState) -> ScheduleDecision:
    """Max-weight rule on the quadratic age Lyapunov function, evaluated
    with whatever matrix estimate the caller trusts."""
    if w.n != p_used.n or state.n != p_used.n:
        raise ValueError("dimension mismatch between w, p_used and ages")
    return ScheduleDecision(_argmax_prefer_high(_qmw_scores(p_used.entries, w.values, state.ages)))


def decide_linear_mw(st: LinearMwState, P: CorrelationMatrix, state: AoiState) -> ScheduleDecision:
    """Max-weight rule on the linear age Lyapunov function with fixed
    drift weights alpha."""
    if st.n != P.n or state.n != P.n:
        raise ValueError("dimension mismatch between alpha, P and ages")
    return ScheduleDecision(_argmax_prefer_high(_lmw_scores(P.entries, st.alpha, state.ages)))


def decide_round_robin(order: Sequence[int], slot: int) -> ScheduleDecision:
    """Cycle through `order`, one source per slot."""
    if len(order) == 0:
        raise ValueError("round-robin order must be nonempty")
    if slot < 0:
        raise ValueError(f"slot must be nonnegative, got {slot}")
    return ScheduleDecision(int(order[slot % len(order)]))


def decide_ema_mw(st: EmaState, w: WeightVector, state: AoiState) -> ScheduleDecision:
    """Quadratic max-weight rule on the current smoothed estimate."""
    if st.n != w.n or state.n != w.n:
        raise ValueError("dimension mismatch between estimate, w and ages")
    return ScheduleDecision(_argmax_prefer_high(_qmw_scores(st.p_hat, w.values, state.ages)))


def ema_observe_and_update(st: EmaState, scheduled: int, delivered) -> EmaState:
    """Fold one slot's delivery indicators into the scheduled sender's row;
    every other row is untouched."""
    s = int(scheduled)
    if not 0 <= s < st.n:
        raise ValueError(f"scheduled source {scheduled} out of range for {st.n} sources")
    dvec = np.asarray(delivered, dtype=np.float64)
    if dvec.shape != (st.n,):
        raise ValueError(f"delivered shape {dvec.shape} does not match ({st.n},)")
    if dvec.min() < 0.0 or dvec.max() > 1.0:
        raise ValueError("delivered indicators must lie in [0, 1]")
    p_hat = st.p_hat.copy()
    p_hat[s] = _ema_row(p_hat[s], st.rate, dvec)
    return EmaState(p_hat, st.rate)


class SchedulingPolicy:
    """Engine-facing wrapper around a decision rule.

    Wrappers see raw age arrays (never mutated by them) and hold whatever
    private state the rule needs; observe() and matrix_changed() are no-ops
    unless the rule learns or tracks the live matrix.
    """

    name = "?"

    def decide_index(self, ages: np.ndarray, slot: int, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def observe(self, sender: int, delivered: np.ndarray) -> None:
        pass

    def matrix_changed(self, entries: np.ndarray) -> None:
        pass


class RandomizedPolicy(SchedulingPolicy):
    name = "stationary_randomized"

    def __init__(self, pi: PolicyDistribution):
        if not pi.is_normalized():
            raise ValueError("randomized policy needs a normalized distribution")
        self._cum = np.cumsum(pi.pi)
        self.pi = pi

    def decide_index(self, ages, slot, rng):
        return int(np.searchsorted(self._cum, rng.random() * self._cum[-1], side="right"))


class MaxAoiFirstPolicy(SchedulingPolicy):
    name = "max_aoi_first"

    def __init__(self, w: WeightVector):
        self._sqrt_w = np.sqrt(w.values)

    def decide_index(self, ages, slot, rng):
        return _argmax_prefer_high(self._sqrt_w * ages)


class QuadraticMaxWeightPolicy(SchedulingPolicy):
    name = "quadratic_max_weight"

    def __init__(self, w: WeightVector, p_used: CorrelationMatrix):
        if w.n != p_used.n:
            raise ValueError("dimension mismatch between w and p_used")
        self._w = w.values
        self._p = p_used.entries

    def decide_index(self, ages, slot, rng):
        return _argmax_prefer_high(_qmw_scores(self._p, self._w, ages))


class OracleMaxWeightPolicy(QuadraticMaxWeightPolicy):
    """Quadratic max-weight that always sees the true current matrix."""

    name = "oracle_max_weight"

    def matrix_changed(self, entries):
        self._p = entries


class LinearMaxWeightPolicy(SchedulingPolicy):
    name = "linear_max_weight"

    def __init__(self, st: LinearMwState, P: CorrelationMatrix):
        if st.n != P.n:
            raise ValueError("dimension mismatch between alpha and P")
        self._alpha = st.alpha
        self._p = P.entries

    def decide_index(self, ages, slot, rng):
        return _argmax_prefer_high(_lmw_scores(self._p, self._alpha, ages))


class RoundRobinPolicy(SchedulingPolicy):
    name = "round_robin"

    def __init__(self, order: Sequence[int]):
        if len(order) == 0:
            raise ValueError("round-robin order must be nonempty")
        self._order = tuple(int(i) for i in order)

    def decide_index(self, ages, slot, rng):
        return self._order[slot % len(self._order)]


class EmaMaxWeightPolicy(SchedulingPolicy):
    """Quadratic max-weight on a correlation estimate learned online.

    Starts from the identity and smooths the scheduled row toward each
    slot's delivery indicators; the estimate is private to one simulation.
    """

    name = "ema_max_weight"

    def __init__(self, w: WeightVector, rate: float):
        if not 0.0 < rate <= 1.0:
            raise ValueError(f"learning rate must lie in (0, 1], got {rate}")
        self._w = w.values
        self._rate = rate
        self._p_hat = np.eye(w.n)

    def decide_index(self, ages, slot, rng):
        return _argmax_prefer_high(_qmw_scores(self._p_hat, self._w, ages))

    def observe(self, sender, delivered):
        self._p_hat[sender] = _ema_row(self._p_hat[sender], self._rate, delivered)

    @property
    def estimate(self) -> np.ndarray:
        return self._p_hat.copy()


POLICY_KINDS = (
    "stationary_randomized",
    "uniform_randomized",
    "optimal_randomized",
    "max_aoi_first",
    "quadratic_max_weight",
    "linear_max_weight",
    "round_robin",
    "ema_max_weight",
    "oracle_max_weight",
)


def build_policy(spec: Mapping, P: CorrelationMatrix, w: WeightVector) -> SchedulingPolicy:
    """Construct a policy from its JSON-style description.

    Source lists in the description (round-robin order) use 1-based labels,
    matching all other user-facing text.  Kinds that need the optimal
    stationary policy run the solver here, so setup failures surface before
    the first slot.
    """
    kind = spec.get("kind")
    if kind not in POLICY_KINDS:
        raise ValueError(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")
    if kind == "stationary_randomized":
        if "pi" not in spec:
            raise ValueError("stationary_randomized needs an explicit 'pi' list")
        return RandomizedPolicy(PolicyDistribution(spec["pi"]))
    if kind == "uniform_randomized":
        return RandomizedPolicy(PolicyDistribution.uniform(P.n))
    if kind == "optimal_randomized":
        report = _solve_for(spec, P, w)
        policy = RandomizedPolicy(report.pi_star.normalized())
        policy.name = "optimal_randomized"
        return policy
    if kind == "max_aoi_first":
        return MaxAoiFirstPolicy(w)
    if kind == "quadratic_max_weight":
        p_used = CorrelationMatrix(spec["p_used"]) if spec.get("p_used") is not None else P
        return QuadraticMaxWeightPolicy(w, p_used)
    if kind == "linear_max_weight":
        if spec.get("alpha") is not None:
            st = LinearMwState(spec["alpha"])
        else:
            report = _solve_for(spec, P, w)
            st = linear_mw_weights(P, w, report.pi_star)
        return LinearMaxWeightPolicy(st, P)
    if kind == "round_robin":
        labels = spec.get("order")
        if labels is None:
            order = tuple(range(P.n))
        else:
            order = tuple(int(i) - 1 for i in labels)
            if any(not 0 <= i < P.n for i in order):
                raise ValueError(f"round-robin order entries must lie in 1..{P.n}")
        return RoundRobinPolicy(order)
    if kind == "ema_max_weight":
        return EmaMaxWeightPolicy(w, float(spec.get("rate", 0.4)))
    return OracleMaxWeightPolicy(w, P)


def materialize_policy_spec(spec: Mapping, n: int) -> dict:
    """Copy of a policy description with every output-affecting default
    spelled out, for provenance records."""
    out = dict(spec)
    kind = out.get("kind")
    if kind == "optimal_randomized" or (kind == "linear_max_weight" and out.get("alpha") is None):
        out.setdefault("tol", _solver.DEFAULT_TOL)
        out.setdefault("max_iter", _solver.DEFAULT_MAX_ITER)
    if kind == "ema_max_weight":
        out.setdefault("rate", 0.4)
    if kind == "round_robin":
        out.setdefault("order", list(range(1, n + 1)))
    return out


def _solve_for(spec: Mapping, P: CorrelationMatrix, w: WeightVector) -> "_solver.SolverReport":
    report = _solver.solve_optimal_randomized(
        P,
        w,
        tol=float(spec.get("tol", _solver.DEFAULT_TOL)),
        max_iter=int(spec.get("max_iter", _solver.DEFAULT_MAX_ITER)),
    )
    if not report.converged:
        raise ValueError(
            f"optimal-policy solve did not converge (residual {report.kkt_residual:.3g}); "
            "raise max_iter or loosen tol"
        )
    return report
