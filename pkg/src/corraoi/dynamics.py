"""Per-slot correlation draws and the age update rule.

The realized draw X for a transmission by sender s has mean P[s] under all
three models; by the renewal argument behind the stationary-policy formula,
the long-run ages depend on the draw distribution only through that mean.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AoiState, CorrelationDraw, CorrelationMatrix, ScheduleDecision

BERNOULLI = "bernoulli"
CONSTANT = "constant"
UNIFORM_JITTER = "uniform_jitter"
MODEL_KINDS = (BERNOULLI, CONSTANT, UNIFORM_JITTER)


@dataclass(frozen=True)
class CorrelationModel:
    """How the realized per-slot overlap relates to its mean matrix.

    bernoulli: X_j is 0/1 with success probability p_sj.
    constant: X_j equals p_sj deterministically.
    uniform_jitter: X_j is p_sj plus a uniform offset whose halfwidth is
    min(jitter_halfwidth, p_sj, 1 - p_sj), then clamped to [0, 1].  The
    shrink near the boundary keeps the mean exactly p_sj (so degenerate
    entries 0 and 1 stay fixed) and matches the plain +/- halfwidth rule
    whenever p_sj is at least a halfwidth away from both ends; the clamp is
    a no-op safety net that keeps the operation total.
    """

    kind: str = BERNOULLI
    jitter_halfwidth: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown correlation model {self.kind!r}; expected one of {MODEL_KINDS}")
        if not 0.0 <= self.jitter_halfwidth < np.inf:
            raise ValueError(f"jitter halfwidth must be a finite nonnegative number, got {self.jitter_halfwidth}")


def _jitter_halfwidths(halfwidth: float, p_row: np.ndarray) -> np.ndarray:
    return np.minimum(halfwidth, np.minimum(p_row, 1.0 - p_row))


def _sample_row(kind: str, halfwidth: float, p_row: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if kind == BERNOULLI:
        return (rng.random(p_row.shape[0]) < p_row).astype(np.float64)
    if kind == CONSTANT:
        return p_row
    offsets = rng.uniform(-1.0, 1.0, p_row.shape[0])
    return np.clip(p_row + _jitter_halfwidths(halfwidth, p_row) * offsets, 0.0, 1.0)


def _sample_row_coupled(kind: str, halfwidth: float, p_row: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    # Each entry is nondecreasing in p_sj for fixed uniforms, which is what
    # makes elementwise-larger matrices deliver elementwise-smaller ages
    # under a shared schedule.
    if kind == BERNOULLI:
        return (uniforms <= p_row).astype(np.float64)
    if kind == CONSTANT:
        return p_row
    return np.clip(p_row + _jitter_halfwidths(halfwidth, p_row) * (2.0 * uniforms - 1.0), 0.0, 1.0)


def _check_sender(P: CorrelationMatrix, sender: int) -> int:
    s = int(sender)
    if not 0 <= s < P.n:
        raise ValueError(f"sender index {sender} out of range for {P.n} sources")
    return s


def sample_row(
    model: CorrelationModel, P: CorrelationMatrix, sender: int, rng: np.random.Generator
) -> CorrelationDraw:
    """Draw the realized refresh fractions for a transmission by `sender`."""
    s = _check_sender(P, sender)
    return CorrelationDraw(_sample_row(model.kind, model.jitter_halfwidth, P.entries[s], rng))


def sample_row_coupled(
    model: CorrelationModel, P: CorrelationMatrix, sender: int, uniforms: np.ndarray
) -> CorrelationDraw:
    """Deterministic draw from shared uniforms; monotone in the matrix.

    Feeding the same uniforms while varying P realizes the coupling used to
    compare instances: entrywise larger P never produces a smaller draw.
    """
    s = _check_sender(P, sender)
    u = np.asarray(uniforms, dtype=np.float64)
    if u.shape != (P.n,):
        raise ValueError(f"uniforms shape {u.shape} does not match ({P.n},)")
    if u.min() < 0.0 or u.max() > 1.0:
        raise ValueError("uniforms must lie in [0, 1]")
    return CorrelationDraw(_sample_row_coupled(model.kind, model.jitter_halfwidth, P.entries[s], u))


def step_aoi(state: AoiState, decision: ScheduleDecision, draw: CorrelationDraw) -> AoiState:
    """Advance ages one slot: each age grows by 1 and is pulled down by its
    realized refresh fraction, so a full delivery (x = 1) resets it to 1."""
    if draw.n != state.n:
        raise ValueError(f"draw has {draw.n} entries but state has {state.n} sources")
    if decision.source >= state.n:
        raise ValueError(f"scheduled source {decision.source} out of range for {state.n} sources")
    ages = state.ages
    return AoiState(ages + 1.0 - draw.x * ages, state.slot + 1)
