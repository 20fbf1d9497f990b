"""Optimal stationary randomized scheduling via projected gradient descent.

The objective sum_i w_i / (P^T pi)_i is convex on the simplex (each term is
a composition of 1/x with an affine map), so projected gradient descent with
a backtracking line search converges to the global optimum.  Convergence is
certified through the stationarity conditions: on the support all scores
sum_j p_ij w_j abar_j^2 agree with the multiplier lambda, off the support
they must not exceed it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CorrelationMatrix, PolicyDistribution, WeightVector

DEFAULT_TOL = 1e-6
DEFAULT_SUPPORT_EPS = 1e-8
DEFAULT_MAX_ITER = 100_000
_DENOM_FLOOR = 1e-12
_MAX_BACKTRACKS = 60
_POLISH_EVERY = 256
_POLISH_STEPS = 40


class InfeasibleInstanceError(ValueError):
    """Raised when some source is unreachable (its matrix column is all
    zeros), which makes the objective infinite under every policy."""


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1}.

    Sort-based algorithm: find the largest k such that keeping the k biggest
    coordinates and shifting them by a common offset stays positive.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a nonempty vector, got shape {v.shape}")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u + (1.0 - css) / ks > 0.0)[0][-1])
    theta = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + theta, 0.0)


def eval_avg_aoi(P: CorrelationMatrix, pi: PolicyDistribution) -> np.ndarray:
    """Long-run average age of each source under a stationary policy:
    1 / sum_j pi_j p_ji, infinite when the source is never refreshed."""
    if pi.n != P.n:
        raise ValueError(f"policy has {pi.n} entries but P has {P.n} sources")
    d = P.entries.T @ pi.pi
    out = np.full(P.n, np.inf)
    np.divide(1.0, d, out=out, where=d > 0.0)
    return out


def objective_value(P: CorrelationMatrix, w: WeightVector, pi: PolicyDistribution) -> float:
    """Weighted-sum average age; +inf if any positively weighted source is
    unreachable under pi."""
    if w.n != P.n:
        raise ValueError(f"weights have {w.n} entries but P has {P.n} sources")
    return float(np.sum(w.values * eval_avg_aoi(P, pi)))


@dataclass(frozen=True, eq=False)
class KktReport:
    """Stationarity diagnostics for a candidate policy.

    lam is the largest on-support score; residual the worst relative score
    deviation across the support; off_support_excess lists sources outside
    the support whose score strictly exceeds lam (none at an optimum).
    """

    lam: float
    residual: float
    scores: np.ndarray
    support: np.ndarray
    off_support_excess: tuple[int, ...]


def check_kkt(
    P: CorrelationMatrix,
    w: WeightVector,
    pi: PolicyDistribution,
    support_eps: float = DEFAULT_SUPPORT_EPS,
) -> KktReport:
    """Evaluate the optimality conditions at pi without modifying it."""
    if w.n != P.n or pi.n != P.n:
        raise ValueError("dimension mismatch between P, w and pi")
    return _check_kkt_raw(P.entries, w.values, pi.pi, support_eps)


def _check_kkt_raw(p: np.ndarray, wv: np.ndarray, x: np.ndarray, support_eps: float) -> KktReport:
    d = p.T @ x
    abar2 = np.full(x.shape[0], np.inf)
    np.divide(1.0, d * d, out=abar2, where=d > 0.0)
    with np.errstate(invalid="ignore"):
        scores = p @ (wv * abar2)
    support = np.nonzero(x > support_eps)[0]
    if support.size == 0:
        lam, residual = np.inf, np.inf
    else:
        on = scores[support]
        lam = float(np.max(on))
        residual = float((lam - np.min(on)) / lam) if np.isfinite(lam) and lam > 0 else np.inf
    off = np.setdiff1d(np.arange(x.shape[0]), support)
    excess = tuple(int(i) for i in off if scores[i] > lam)
    scores.setflags(write=False)
    support.setflags(write=False)
    return KktReport(lam=lam, residual=residual, scores=scores, support=support, off_support_excess=excess)


@dataclass(frozen=True, eq=False)
class SolverReport:
    """Outcome of an optimal-randomized solve.

    When converged is False the fields describe the best iterate reached
    within the iteration budget.
    """

    pi_star: PolicyDistribution
    lam: float
    avg_aoi: np.ndarray
    kkt_residual: float
    iterations: int
    objective: float
    converged: bool

    def to_dict(self) -> dict:
        return {
            "pi_star": self.pi_star.pi.tolist(),
            "lambda": self.lam,
            "avg_aoi": self.avg_aoi.tolist(),
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "objective": self.objective,
            "converged": self.converged,
        }


def _objective_raw(pt: np.ndarray, wv: np.ndarray, x: np.ndarray) -> float:
    d = pt @ x
    if d.min() < _DENOM_FLOOR:
        return np.inf
    return float(np.sum(wv / d))


_CACHE: dict[tuple, SolverReport] = {}
_CACHE_LIMIT = 64


def solve_optimal_randomized(
    P: CorrelationMatrix,
    w: WeightVector,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    support_eps: float = DEFAULT_SUPPORT_EPS,
) -> SolverReport:
    """Minimize the weighted-sum average age over the scheduling simplex.

    Deterministic: no randomness, fixed uniform start, so repeated calls
    return identical reports (recent results are memoized).  Raises
    InfeasibleInstanceError when a zero column makes every policy
    unbounded; plain non-convergence is reported through the converged
    flag instead of an exception.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    if support_eps <= 0.0:
        raise ValueError(f"support_eps must be positive, got {support_eps}")
    key = (P.entries.tobytes(), w.values.tobytes(), tol, max_iter, support_eps)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    report = _solve(P, w, tol, max_iter, support_eps)
    if len(_CACHE) >= _CACHE_LIMIT:
        _CACHE.pop(next(iter(_CACHE)))
    _CACHE[key] = report
    return report


def _solve(
    P: CorrelationMatrix,
    w: WeightVector,
    tol: float,
    max_iter: int,
    support_eps: float,
) -> SolverReport:
    if w.n != P.n:
        raise ValueError(f"weights have {w.n} entries but P has {P.n} sources")
    p = P.entries
    unreachable = np.nonzero(~np.any(p > 0.0, axis=0))[0]
    if unreachable.size:
        labels = ", ".join(str(j + 1) for j in unreachable)
        raise InfeasibleInstanceError(
            f"source(s) {labels} have all-zero correlation columns; the average age is unbounded"
        )
    n = P.n
    wv = w.values
    pt = np.ascontiguousarray(p.T)
    x = np.full(n, 1.0 / n)
    fx = _objective_raw(pt, wv, x)
    if not np.isfinite(fx):
        raise InfeasibleInstanceError(
            "some correlation column is effectively zero; the average age is unbounded"
        )
    eta = 1.0
    it = 0
    kkt = _check_kkt_raw(p, wv, x, support_eps)
    for it in range(1, max_iter + 1):
        d = pt @ x
        grad = -(p @ (wv / (d * d)))
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            cand = project_to_simplex(x - eta * grad)
            fc = _objective_raw(pt, wv, cand)
            dx = cand - x
            if fc <= fx + float(grad @ dx) + float(dx @ dx) / (2.0 * eta) + 1e-12:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break  # step size collapsed: stationary to float precision
        x, fx = cand, fc
        kkt = _check_kkt_raw(p, wv, x, support_eps)
        if _certified(kkt, tol):
            return _report(P, x, kkt, it, fx, True)
        if it % _POLISH_EVERY == 0:
            x, fx, kkt = _try_polish(p, pt, wv, x, fx, kkt, support_eps)
            if _certified(kkt, tol):
                return _report(P, x, kkt, it, fx, True)
        eta = min(eta * 2.0, 1e8)
    x, fx, kkt = _try_polish(p, pt, wv, x, fx, kkt, support_eps)
    return _report(P, x, kkt, it, fx, _certified(kkt, tol))


def _try_polish(
    p: np.ndarray,
    pt: np.ndarray,
    wv: np.ndarray,
    x: np.ndarray,
    fx: float,
    kkt: KktReport,
    support_eps: float,
) -> tuple[np.ndarray, float, KktReport]:
    """Newton refinement of the stationarity system on the current support.

    Gradient steps identify the support quickly but can take ages to equate
    the on-support scores to float precision; solving score_i = lambda,
    sum x = 1 directly finishes the job quadratically.  The polished point
    is kept only if it stays a strictly positive distribution on the same
    support and does not raise the residual, so a mis-identified support
    degrades to a no-op.
    """
    sup = np.nonzero(x > support_eps)[0]
    if sup.size == 0 or not np.isfinite(kkt.lam):
        return x, fx, kkt
    ps = p[sup]
    y = x[sup] / x[sup].sum()
    lam = kkt.lam
    m = sup.size
    for _ in range(_POLISH_STEPS):
        d = ps.T @ y
        if d.min() < _DENOM_FLOOR:
            return x, fx, kkt
        scores = ps @ (wv / (d * d))
        if float(np.max(np.abs(scores - lam))) <= abs(lam) * 1e-13:
            break
        residual = np.concatenate([scores - lam, [y.sum() - 1.0]])
        hess = -2.0 * (ps * (wv / (d * d * d))) @ ps.T
        jac = np.zeros((m + 1, m + 1))
        jac[:m, :m] = hess
        jac[:m, m] = -1.0
        jac[m, :m] = 1.0
        try:
            step = np.linalg.solve(jac, -residual)
        except np.linalg.LinAlgError:
            return x, fx, kkt
        t = 1.0
        while t > 1e-8 and np.any(y + t * step[:m] <= 0.0):
            t *= 0.5
        if t <= 1e-8:
            return x, fx, kkt
        y = y + t * step[:m]
        lam = lam + t * step[m]
    cand = np.zeros_like(x)
    cand[sup] = y / y.sum()
    fc = _objective_raw(pt, wv, cand)
    kc = _check_kkt_raw(p, wv, cand, support_eps)
    if np.isfinite(fc) and not kc.off_support_excess and kc.residual < kkt.residual:
        return cand, fc, kc
    return x, fx, kkt


def _certified(kkt: KktReport, tol: float) -> bool:
    if not np.isfinite(kkt.lam) or kkt.residual > tol:
        return False
    off = np.setdiff1d(np.arange(kkt.scores.shape[0]), kkt.support)
    return off.size == 0 or float(np.max(kkt.scores[off])) <= kkt.lam * (1.0 + tol)


def _report(
    P: CorrelationMatrix, x: np.ndarray, kkt: KktReport, iterations: int, fx: float, converged: bool
) -> SolverReport:
    pi = PolicyDistribution(np.maximum(x, 0.0))
    avg = eval_avg_aoi(P, pi)
    avg.setflags(write=False)
    return SolverReport(
        pi_star=pi,
        lam=kkt.lam,
        avg_aoi=avg,
        kkt_residual=kkt.residual,
        iterations=iterations,
        objective=fx,
        converged=converged,
    )
