"""Slot-by-slot simulation of one policy on one instance.

The engine composes the same primitives exposed as public operations
(decide, sample, age step) through their shared kernels; a test pins the
trajectory to the op-by-op composition.  Randomness is split into named
streams, so enabling mobility never perturbs the correlation draws.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import BERNOULLI, UNIFORM_JITTER, CorrelationModel, _sample_row
from .model import CorrelationMatrix, WeightVector
from .policies import build_policy, materialize_policy_spec
from .rng import stream_rng
from .topology import SourceLayout, TopologySpec, _brownian_kernel, _rgg_entries


@dataclass(frozen=True, eq=False)
class Instance:
    """A concrete problem: matrix, weights, and optionally the layout that
    produced the matrix (needed for mobility)."""

    P: CorrelationMatrix
    w: WeightVector
    layout: SourceLayout | None = None

    def __post_init__(self) -> None:
        if self.w.n != self.P.n:
            raise ValueError(f"weights have {self.w.n} entries but P has {self.P.n} sources")
        if self.layout is not None and self.layout.n != self.P.n:
            raise ValueError(f"layout has {self.layout.n} positions but P has {self.P.n} sources")

    @property
    def n(self) -> int:
        return self.P.n


@dataclass(frozen=True)
class MobilityConfig:
    """Brownian source motion with periodic matrix rebuilds.

    r and p may be left unset when the topology is a geometric graph that
    already carries them.
    """

    enabled: bool = False
    v_max: float = 0.01
    rebuild_every: int = 1
    r: float | None = None
    p: float | None = None

    def __post_init__(self) -> None:
        if self.v_max < 0.0:
            raise ValueError(f"speed limit must be nonnegative, got {self.v_max}")
        if self.rebuild_every < 1:
            raise ValueError(f"rebuild period must be at least 1, got {self.rebuild_every}")

    def to_dict(self) -> dict:
        return {
            "enabled": self.enabled,
            "v_max": self.v_max,
            "rebuild_every": self.rebuild_every,
            "r": self.r,
            "p": self.p,
        }


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything one run needs besides the materialized instance.

    The topology and weights fields describe how to generate the instance
    when one is not passed in explicitly; they also serve as provenance.
    initial_ages is "ones", "index" (source i starts at age i, 1-based) or
    an explicit list of values >= 1.
    """

    horizon: int
    seed: int = 0
    model: CorrelationModel = CorrelationModel()
    policy: dict = field(default_factory=lambda: {"kind": "uniform_randomized"})
    mobility: MobilityConfig = MobilityConfig()
    window: int = 100
    initial_ages: object = "ones"
    topology: TopologySpec | None = None
    weights: object = "uniform"

    MAX_HORIZON = 100_000_000  # running float64 age sums stay exact well past this

    def __post_init__(self) -> None:
        if not 1 <= self.horizon <= self.MAX_HORIZON:
            raise ValueError(f"horizon must lie in [1, {self.MAX_HORIZON}], got {self.horizon}")
        if self.window < 1:
            raise ValueError(f"window must be at least 1, got {self.window}")

    def to_dict(self, n: int | None = None) -> dict:
        """Config as plain data with defaults materialized; pass n to also
        expand policy defaults that depend on the source count."""
        policy = dict(self.policy)
        if n is not None:
            policy = materialize_policy_spec(policy, n)
        ages = self.initial_ages
        if not isinstance(ages, str):
            ages = list(np.asarray(ages, dtype=np.float64))
        model: dict = {"kind": self.model.kind}
        if self.model.kind == UNIFORM_JITTER:
            model["jitter_halfwidth"] = self.model.jitter_halfwidth
        return {
            "horizon": self.horizon,
            "seed": self.seed,
            "model": model,
            "policy": policy,
            "mobility": self.mobility.to_dict(),
            "window": self.window,
            "initial_ages": ages,
            "topology": None if self.topology is None else self.topology.to_dict(),
            "weights": self.weights if isinstance(self.weights, str) or self.weights is None
            else list(np.asarray(self.weights, dtype=np.float64)),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SimConfig":
        model = obj.get("model", {})
        if isinstance(model, dict):
            model = CorrelationModel(**model)
        mobility = obj.get("mobility", {})
        if isinstance(mobility, dict):
            mobility = MobilityConfig(**mobility)
        topology = obj.get("topology")
        if isinstance(topology, dict):
            topology = TopologySpec.from_dict(topology)
        return cls(
            horizon=int(obj["horizon"]),
            seed=int(obj.get("seed", 0)),
            model=model,
            policy=dict(obj.get("policy", {"kind": "uniform_randomized"})),
            mobility=mobility,
            window=int(obj.get("window", 100)),
            initial_ages=obj.get("initial_ages", "ones"),
            topology=topology,
            weights=obj.get("weights", "uniform"),
        )


@dataclass(frozen=True, eq=False)
class SimReport:
    """Time averages and bookkeeping for one finished run.

    weighted_se is a batch-means standard error of weighted_avg, suitable
    for the few-standard-errors comparisons used throughout the tests.
    Wall time is the only field exempt from reproducibility guarantees.
    """

    avg_age: np.ndarray
    weighted_avg: float
    weighted_se: float
    window_series: np.ndarray
    sched_fraction: np.ndarray
    delivery_rate: np.ndarray
    slots: int
    wall_ms: float

    def to_dict(self) -> dict:
        return {
            "avg_age": self.avg_age.tolist(),
            "weighted_avg": self.weighted_avg,
            "weighted_se": self.weighted_se,
            "window_series": self.window_series.tolist(),
            "sched_fraction": self.sched_fraction.tolist(),
            "delivery_rate": self.delivery_rate.tolist(),
            "slots": self.slots,
            "wall_ms": self.wall_ms,
        }


def windowed_series(trace, window: int) -> np.ndarray:
    """Means of consecutive nonoverlapping blocks of `window` slots; a
    trailing partial block is dropped."""
    arr = np.asarray(trace, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"trace must be one-dimensional, got shape {arr.shape}")
    if window < 1:
        raise ValueError(f"window must be at least 1, got {window}")
    if window > arr.shape[0]:
        raise ValueError(f"window {window} exceeds trace length {arr.shape[0]}")
    blocks = arr.shape[0] // window
    return arr[: blocks * window].reshape(blocks, window).mean(axis=1)


def batch_means_se(trace, batches: int = 50) -> float:
    """Standard error of the trace mean from nonoverlapping batch means;
    robust to the short-range correlation of age processes."""
    arr = np.asarray(trace, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"trace must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 4:
        return float("nan")
    k = int(min(batches, arr.shape[0] // 2))
    means = windowed_series(arr, arr.shape[0] // k)[:k]
    return float(np.std(means, ddof=1) / np.sqrt(k))


def initial_ages_vector(spec, n: int) -> np.ndarray:
    if spec is None or (isinstance(spec, str) and spec == "ones"):
        return np.ones(n)
    if isinstance(spec, str) and spec == "index":
        return np.arange(1, n + 1, dtype=np.float64)
    if isinstance(spec, str):
        raise ValueError(f"unknown initial-age rule {spec!r}; expected 'ones', 'index' or a list")
    arr = np.array(spec, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"initial ages shape {arr.shape} does not match ({n},)")
    if not np.all(np.isfinite(arr)) or arr.min() < 1.0:
        raise ValueError("initial ages must be finite and at least 1")
    return arr


def instance_from_config(cfg: SimConfig) -> Instance:
    """Materialize the instance described by the config's topology and
    weights fields."""
    if cfg.topology is None:
        raise ValueError("config carries no topology; pass an explicit instance instead")
    layout, P = cfg.topology.build()
    if cfg.weights is None or (isinstance(cfg.weights, str) and cfg.weights == "uniform"):
        w = WeightVector.uniform(P.n)
    elif isinstance(cfg.weights, str):
        raise ValueError(f"unknown weight rule {cfg.weights!r}; expected 'uniform' or a list")
    else:
        w = WeightVector(cfg.weights)
    return Instance(P, w, layout)


def _resolve_mobility(cfg: SimConfig, instance: Instance) -> tuple[float, float]:
    r, p = cfg.mobility.r, cfg.mobility.p
    topo = cfg.topology
    if topo is not None and topo.kind == "rgg":
        r = topo.r if r is None else r
        p = topo.p if p is None else p
    if r is None or p is None:
        raise ValueError("mobility needs the rebuild radius r and correlation p (not derivable from the topology)")
    if instance.layout is None:
        raise ValueError("mobility needs an instance with a source layout")
    return float(r), float(p)


def run_simulation(cfg: SimConfig, instance: Instance | None = None) -> SimReport:
    """Run one policy for cfg.horizon slots and return the time averages.

    Fully reproducible: identical (cfg, instance) give identical reports in
    every field except wall_ms.
    """
    if instance is None:
        instance = instance_from_config(cfg)
    P, w = instance.P, instance.w
    n = P.n
    policy = build_policy(cfg.policy, P, w)
    ages = initial_ages_vector(cfg.initial_ages, n)
    mobile = cfg.mobility.enabled
    if mobile:
        mob_r, mob_p = _resolve_mobility(cfg, instance)
        positions = instance.layout.positions
        mob_rng = stream_rng(cfg.seed, "mobility")
    sched_rng = stream_rng(cfg.seed, "scheduling")
    corr_rng = stream_rng(cfg.seed, "correlation")

    T = cfg.horizon
    kind, halfwidth = cfg.model.kind, cfg.model.jitter_halfwidth
    bernoulli = kind == BERNOULLI
    rebuild_every = cfg.mobility.rebuild_every
    p_current = P.entries
    wv = w.values
    age_sum = np.zeros(n)
    sched_count = np.zeros(n)
    deliver_count = np.zeros(n)
    wtrace = np.empty(T)

    start = time.perf_counter()
    for t in range(T):
        age_sum += ages
        wtrace[t] = wv @ ages
        s = policy.decide_index(ages, t, sched_rng)
        x = _sample_row(kind, halfwidth, p_current[s], corr_rng)
        delivered = x >= 1.0 if bernoulli else x > 0.0
        policy.observe(s, delivered)
        sched_count[s] += 1.0
        deliver_count += delivered
        ages = ages * (1.0 - x) + 1.0
        if mobile and (t + 1) % rebuild_every == 0:
            positions = _brownian_kernel(positions, cfg.mobility.v_max, mob_rng)
            p_current = _rgg_entries(positions, mob_r, mob_p)
            policy.matrix_changed(p_current)
    wall_ms = (time.perf_counter() - start) * 1e3

    avg_age = age_sum / T
    series = windowed_series(wtrace, cfg.window) if cfg.window <= T else np.empty(0)
    sched_fraction = sched_count / T
    delivery_rate = deliver_count / T
    for arr in (avg_age, series, sched_fraction, delivery_rate):
        arr.setflags(write=False)
    return SimReport(
        avg_age=avg_age,
        weighted_avg=float(wtrace.mean()),
        weighted_se=batch_means_se(wtrace),
        window_series=series,
        sched_fraction=sched_fraction,
        delivery_rate=delivery_rate,
        slots=T,
        wall_ms=wall_ms,
    )
