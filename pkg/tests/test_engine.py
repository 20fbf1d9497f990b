import numpy as np
import pytest

from corraoi import (
    AoiState,
    CorrelationMatrix,
    CorrelationModel,
    Instance,
    MobilityConfig,
    ScheduleDecision,
    SimConfig,
    TopologySpec,
    WeightVector,
    batch_means_se,
    build_policy,
    eval_avg_aoi,
    initial_ages_vector,
    instance_from_config,
    lower_bound,
    run_simulation,
    sample_row,
    step_aoi,
    stream_rng,
    windowed_series,
)
from corraoi.dynamics import UNIFORM_JITTER
from tests.conftest import random_instance


def _identity_instance(n):
    return Instance(CorrelationMatrix.identity(n), WeightVector.uniform(n))


class TestWindowedSeries:
    def test_constant_trace(self):
        out = windowed_series(np.full(500, 3.25), 100)
        assert np.array_equal(out, np.full(5, 3.25))

    def test_arithmetic_mean(self):
        out = windowed_series(np.arange(1.0, 101.0), 100)
        assert np.array_equal(out, [50.5])

    def test_matches_direct_recomputation(self, base_rng):
        trace = base_rng.random(1037)
        window = 50
        out = windowed_series(trace, window)
        assert len(out) == 20
        for k, v in enumerate(out):
            assert v == pytest.approx(trace[k * window : (k + 1) * window].mean(), rel=1e-12)

    def test_window_longer_than_trace_rejected(self):
        with pytest.raises(ValueError):
            windowed_series(np.ones(10), 11)


class TestBatchMeansSe:
    def test_iid_noise_matches_classic_estimate(self, base_rng):
        trace = base_rng.normal(0.0, 2.0, 100_000)
        se = batch_means_se(trace)
        assert se == pytest.approx(2.0 / np.sqrt(100_000), rel=0.35)

    def test_short_trace_is_nan(self):
        assert np.isnan(batch_means_se(np.ones(3)))


class TestInitialAges:
    def test_ones(self):
        assert np.array_equal(initial_ages_vector("ones", 3), [1.0, 1.0, 1.0])

    def test_index(self):
        assert np.array_equal(initial_ages_vector("index", 4), [1.0, 2.0, 3.0, 4.0])

    def test_explicit(self):
        assert np.array_equal(initial_ages_vector([2.0, 5.0], 2), [2.0, 5.0])

    def test_rejects_small_ages(self):
        with pytest.raises(ValueError):
            initial_ages_vector([0.5, 1.0], 2)
        with pytest.raises(ValueError):
            initial_ages_vector("zeros", 2)


class TestRunSimulation:
    def test_single_source_age_is_exactly_one(self):
        cfg = SimConfig(horizon=10_000, policy={"kind": "round_robin", "order": [1]})
        rep = run_simulation(cfg, _identity_instance(1))
        assert rep.avg_age[0] == 1.0
        assert rep.weighted_avg == 1.0
        assert rep.slots == 10_000

    def test_round_robin_identity_closed_form(self):
        cfg = SimConfig(horizon=100_000, policy={"kind": "round_robin", "order": [1, 2]})
        rep = run_simulation(cfg, _identity_instance(2))
        assert rep.weighted_avg == pytest.approx(1.5, abs=1e-3)

    def test_stationary_randomized_matches_formula(self, base_rng):
        from corraoi import PolicyDistribution

        P, w = random_instance(base_rng, 4)
        pi = PolicyDistribution(np.array([0.4, 0.3, 0.2, 0.1]))
        cfg = SimConfig(
            horizon=200_000,
            seed=7,
            policy={"kind": "stationary_randomized", "pi": list(pi.pi)},
        )
        rep = run_simulation(cfg, Instance(P, w))
        expect = eval_avg_aoi(P, pi)
        for i in range(4):
            if expect[i] <= 100:
                assert rep.avg_age[i] == pytest.approx(expect[i], rel=0.02)

    def test_reports_are_bit_identical(self, base_rng):
        P, w = random_instance(base_rng, 3)
        cfg = SimConfig(horizon=5_000, seed=3, policy={"kind": "quadratic_max_weight"})
        a = run_simulation(cfg, Instance(P, w))
        b = run_simulation(cfg, Instance(P, w))
        assert np.array_equal(a.avg_age, b.avg_age)
        assert a.weighted_avg == b.weighted_avg
        assert np.array_equal(a.window_series, b.window_series)
        assert np.array_equal(a.sched_fraction, b.sched_fraction)
        assert np.array_equal(a.delivery_rate, b.delivery_rate)

    def test_report_invariants(self, base_rng):
        P, w = random_instance(base_rng, 5)
        cfg = SimConfig(horizon=20_000, seed=1, policy={"kind": "max_aoi_first"})
        rep = run_simulation(cfg, Instance(P, w))
        assert rep.sched_fraction.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(rep.delivery_rate >= rep.sched_fraction - 1e-12)  # p_ii = 1 here
        assert np.all(rep.avg_age >= 1.0)
        assert rep.weighted_avg == pytest.approx(float(w.values @ rep.avg_age), rel=1e-12)

    def test_delivery_rate_identity(self, base_rng):
        # Long-run delivery rate of i approaches sum_j f_j p_ji.
        P, w = random_instance(base_rng, 4)
        cfg = SimConfig(horizon=200_000, seed=2, policy={"kind": "uniform_randomized"})
        rep = run_simulation(cfg, Instance(P, w))
        expect = P.entries.T @ rep.sched_fraction
        se = 3.0 * np.sqrt(expect * (1 - expect) / rep.slots + 1e-12)
        assert np.all(np.abs(rep.delivery_rate - expect) <= se + 1e-3)

    def test_weighted_aoi_respects_lower_bound(self, base_rng):
        for kind in ("uniform_randomized", "max_aoi_first", "quadratic_max_weight", "linear_max_weight"):
            P, w = random_instance(base_rng, 4)
            cfg = SimConfig(horizon=50_000, seed=4, policy={"kind": kind})
            rep = run_simulation(cfg, Instance(P, w))
            lb = lower_bound(w, P)
            assert rep.weighted_avg >= lb - 3 * rep.weighted_se

    def test_linear_mw_beats_optimal_randomized(self, base_rng):
        P, w = random_instance(base_rng, 5)
        lin = run_simulation(
            SimConfig(horizon=100_000, seed=5, policy={"kind": "linear_max_weight"}), Instance(P, w)
        )
        opt = run_simulation(
            SimConfig(horizon=100_000, seed=5, policy={"kind": "optimal_randomized"}), Instance(P, w)
        )
        slack = 3.0 * (lin.weighted_se + opt.weighted_se)
        assert lin.weighted_avg <= opt.weighted_avg + slack

    def test_matches_op_composition(self):
        # The raw-array hot loop must agree step by step with the public
        # typed operations chained by hand.
        entries = np.array([[1.0, 0.35, 0.0], [0.2, 1.0, 0.9], [0.5, 0.1, 1.0]])
        P = CorrelationMatrix(entries)
        w = WeightVector([0.2, 0.5, 0.3])
        seed, horizon = 11, 400
        cfg = SimConfig(horizon=horizon, seed=seed, policy={"kind": "quadratic_max_weight"}, window=50)
        rep = run_simulation(cfg, Instance(P, w))

        model = CorrelationModel()
        policy = build_policy({"kind": "quadratic_max_weight"}, P, w)
        sched = stream_rng(seed, "scheduling")
        corr = stream_rng(seed, "correlation")
        state = AoiState(np.ones(3))
        wtrace = np.empty(horizon)
        age_total = np.zeros(3)
        for t in range(horizon):
            age_total += state.ages
            wtrace[t] = w.values @ state.ages
            s = policy.decide_index(state.ages.copy(), t, sched)
            draw = sample_row(model, P, s, corr)
            delivered = (draw.x >= 1.0).astype(np.float64)
            policy.observe(s, delivered)
            state = step_aoi(state, ScheduleDecision(s), draw)
        assert np.array_equal(rep.avg_age, age_total / horizon)
        assert rep.weighted_avg == wtrace.mean()
        assert np.array_equal(rep.window_series, windowed_series(wtrace, 50))

    def test_errors_reported_before_any_slot(self):
        # Linear max-weight needs the solver; an unreachable source must
        # fail fast rather than midway through a run.
        P = CorrelationMatrix([[1.0, 0.0], [1.0, 0.0]])
        cfg = SimConfig(horizon=100, policy={"kind": "linear_max_weight"})
        with pytest.raises(ValueError):
            run_simulation(cfg, Instance(P, WeightVector.uniform(2)))

    def test_horizon_validation(self):
        with pytest.raises(ValueError):
            SimConfig(horizon=0)
        with pytest.raises(ValueError):
            SimConfig(horizon=200_000_001)

    def test_initial_ages_option_shifts_early_window(self):
        cfg_hot = SimConfig(
            horizon=200, seed=0, policy={"kind": "round_robin", "order": [1, 2, 3]},
            initial_ages="index", window=10,
        )
        cfg_cold = SimConfig(
            horizon=200, seed=0, policy={"kind": "round_robin", "order": [1, 2, 3]},
            initial_ages="ones", window=10,
        )
        inst = _identity_instance(3)
        hot, cold = run_simulation(cfg_hot, inst), run_simulation(cfg_cold, inst)
        assert hot.window_series[0] > cold.window_series[0]


class TestMobility:
    def _mobile_cfg(self, v_max, horizon=3_000, seed=6, rebuild_every=1):
        return SimConfig(
            horizon=horizon,
            seed=seed,
            policy={"kind": "max_aoi_first"},
            topology=TopologySpec(kind="rgg", n=12, p=0.7, r=0.4, seed=6),
            mobility=MobilityConfig(enabled=True, v_max=v_max, rebuild_every=rebuild_every),
        )

    def test_zero_velocity_matches_static_run(self):
        # Stream separation: enabling mobility with v_max = 0 must leave
        # scheduling and correlation draws untouched.
        mobile = run_simulation(self._mobile_cfg(0.0))
        static_cfg = SimConfig(
            horizon=3_000,
            seed=6,
            policy={"kind": "max_aoi_first"},
            topology=TopologySpec(kind="rgg", n=12, p=0.7, r=0.4, seed=6),
        )
        static = run_simulation(static_cfg)
        assert np.array_equal(mobile.avg_age, static.avg_age)
        assert mobile.weighted_avg == static.weighted_avg

    def test_motion_changes_outcome(self):
        a = run_simulation(self._mobile_cfg(0.0))
        b = run_simulation(self._mobile_cfg(0.05))
        assert a.weighted_avg != b.weighted_avg

    def test_rebuild_cadence_matters(self):
        a = run_simulation(self._mobile_cfg(0.05, rebuild_every=1))
        b = run_simulation(self._mobile_cfg(0.05, rebuild_every=500))
        assert a.weighted_avg != b.weighted_avg

    def test_requires_layout(self):
        cfg = SimConfig(
            horizon=100,
            policy={"kind": "max_aoi_first"},
            mobility=MobilityConfig(enabled=True, v_max=0.01, r=0.3, p=0.5),
        )
        with pytest.raises(ValueError):
            run_simulation(cfg, _identity_instance(3))

    def test_oracle_sees_rebuilt_matrix_ema_does_not(self):
        base = dict(
            horizon=20_000,
            seed=8,
            topology=TopologySpec(kind="rgg", n=15, p=0.7, r=0.3, seed=8),
            mobility=MobilityConfig(enabled=True, v_max=0.02, rebuild_every=1),
        )
        oracle = run_simulation(SimConfig(policy={"kind": "oracle_max_weight"}, **base))
        ema = run_simulation(SimConfig(policy={"kind": "ema_max_weight", "rate": 0.4}, **base))
        assert oracle.weighted_avg <= ema.weighted_avg * 1.05


class TestConfigPlumbing:
    def test_instance_from_config(self):
        cfg = SimConfig(horizon=10, topology=TopologySpec(kind="star", n=4, p=0.5))
        inst = instance_from_config(cfg)
        assert inst.P.n == 4
        assert np.allclose(inst.w.values, 0.25)

    def test_explicit_weights(self):
        cfg = SimConfig(
            horizon=10, topology=TopologySpec(kind="identity", n=2), weights=[0.9, 0.1]
        )
        inst = instance_from_config(cfg)
        assert np.array_equal(inst.w.values, [0.9, 0.1])

    def test_to_dict_materializes_defaults(self):
        cfg = SimConfig(horizon=50, topology=TopologySpec(kind="identity", n=3))
        d = cfg.to_dict(3)
        assert d["window"] == 100 and d["initial_ages"] == "ones"
        assert d["model"] == {"kind": "bernoulli"}
        assert d["policy"]["kind"] == "uniform_randomized"
        assert d["mobility"]["enabled"] is False
        again = SimConfig.from_dict(d)
        assert again.to_dict(3) == d

    def test_jitter_model_round_trips(self):
        cfg = SimConfig(
            horizon=50,
            model=CorrelationModel(UNIFORM_JITTER, jitter_halfwidth=0.2),
            topology=TopologySpec(kind="identity", n=2),
        )
        d = cfg.to_dict(2)
        assert d["model"] == {"kind": "uniform_jitter", "jitter_halfwidth": 0.2}
        assert SimConfig.from_dict(d).model.jitter_halfwidth == 0.2
