import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corraoi import (
    AoiState,
    CorrelationDraw,
    CorrelationMatrix,
    PolicyDistribution,
    ScheduleDecision,
    WeightVector,
    instance_from_json,
    instance_to_json,
    validate_instance,
)


class TestCorrelationMatrix:
    def test_identity_constructor(self):
        P = CorrelationMatrix.identity(3)
        assert np.array_equal(P.entries, np.eye(3))
        assert P.n == 3

    def test_diagonal_not_forced(self):
        P = CorrelationMatrix([[0.3, 0.1], [0.0, 0.9]])
        assert P.entries[0, 0] == 0.3

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            CorrelationMatrix([[1.0, 1.2], [0.0, 1.0]])
        with pytest.raises(ValueError):
            CorrelationMatrix([[1.0, -0.1], [0.0, 1.0]])
        with pytest.raises(ValueError):
            CorrelationMatrix([[1.0, np.nan], [0.0, 1.0]])

    def test_rejects_non_square_and_empty(self):
        with pytest.raises(ValueError):
            CorrelationMatrix([[1.0, 0.0]])
        with pytest.raises(ValueError):
            CorrelationMatrix(np.zeros((0, 0)))

    def test_entries_are_readonly_copies(self):
        raw = np.eye(2)
        P = CorrelationMatrix(raw)
        raw[0, 0] = 0.5
        assert P.entries[0, 0] == 1.0
        with pytest.raises(ValueError):
            P.entries[0, 0] = 0.2


class TestWeightVector:
    def test_uniform(self):
        w = WeightVector.uniform(4)
        assert np.allclose(w.values, 0.25)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            WeightVector([1.0, 0.0])
        with pytest.raises(ValueError):
            WeightVector([1.0, -2.0])


class TestAoiState:
    def test_fresh(self):
        st_ = AoiState.fresh(3)
        assert np.array_equal(st_.ages, np.ones(3))
        assert st_.slot == 0

    def test_rejects_negative_age_or_slot(self):
        with pytest.raises(ValueError):
            AoiState([-1.0])
        with pytest.raises(ValueError):
            AoiState([1.0], slot=-1)


class TestSmallTypes:
    def test_schedule_decision(self):
        assert ScheduleDecision(2).source == 2
        with pytest.raises(ValueError):
            ScheduleDecision(-1)

    def test_draw_range(self):
        with pytest.raises(ValueError):
            CorrelationDraw([0.5, 1.1])

    def test_policy_distribution_sum_slack(self):
        PolicyDistribution([0.5, 0.5 + 1e-13])
        with pytest.raises(ValueError):
            PolicyDistribution([0.5, 0.6])
        with pytest.raises(ValueError):
            PolicyDistribution([-0.1, 0.5])

    def test_policy_distribution_normalized(self):
        pi = PolicyDistribution([0.2, 0.2]).normalized()
        assert pi.is_normalized()
        assert np.allclose(pi.pi, [0.5, 0.5])
        with pytest.raises(ValueError):
            PolicyDistribution([0.0, 0.0]).normalized()


class TestValidateInstance:
    def test_clean_instance(self):
        assert validate_instance(CorrelationMatrix.identity(3), WeightVector.uniform(3)) == []

    def test_zero_column_flagged_unreachable(self):
        entries = np.eye(3)
        entries[:, 1] = 0.0  # column 2 in 1-based labels
        problems = validate_instance(entries, np.full(3, 1 / 3))
        assert any("source 2 unreachable" in msg for msg in problems)

    def test_nonpositive_weight_flagged(self):
        problems = validate_instance(np.eye(2), [0.5, 0.0])
        assert any("nonpositive weight" in msg for msg in problems)

    def test_out_of_range_entry_flagged(self):
        problems = validate_instance([[1.0, 1.5], [0.0, 1.0]], [0.5, 0.5])
        assert any("outside [0, 1]" in msg for msg in problems)

    def test_non_square_short_circuits(self):
        problems = validate_instance([[1.0, 0.0]], [1.0])
        assert len(problems) == 1 and "square" in problems[0]

    def test_pure_and_idempotent(self):
        entries = np.eye(2)
        first = validate_instance(entries, [0.5, 0.5])
        second = validate_instance(entries, [0.5, 0.5])
        assert first == second == []
        assert np.array_equal(entries, np.eye(2))

    @given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_never_raises_on_valid_shapes(self, n, seed):
        rng = np.random.default_rng(seed)
        out = validate_instance(rng.random((n, n)), rng.random(n) + 0.01)
        assert isinstance(out, list) and all(isinstance(m, str) for m in out)


class TestInstanceJson:
    def test_round_trip_bit_exact(self):
        rng = np.random.default_rng(7)
        entries = rng.random((5, 5))
        np.fill_diagonal(entries, 1.0)
        entries[0, 1] = np.nextafter(0.7, 1.0)  # awkward float on purpose
        P = CorrelationMatrix(entries)
        w = WeightVector(rng.uniform(0.1, 1.0, 5))
        layout = rng.random((5, 2))
        text = instance_to_json(P, w, layout)
        P2, w2, layout2 = instance_from_json(text)
        assert np.array_equal(P.entries, P2.entries)
        assert np.array_equal(w.values, w2.values)
        assert np.array_equal(layout, layout2)

    def test_schema_fields(self):
        text = instance_to_json(CorrelationMatrix.identity(2), WeightVector.uniform(2))
        obj = json.loads(text)
        assert obj["n"] == 2
        assert obj["P"] == [[1.0, 0.0], [0.0, 1.0]]
        assert obj["w"] == [0.5, 0.5]

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            instance_from_json(json.dumps({"n": 3, "P": [[1.0]], "w": [1.0]}))
        with pytest.raises(ValueError):
            instance_from_json(json.dumps({"P": [[1.0]], "w": [0.5, 0.5]}))
        with pytest.raises(ValueError):
            instance_from_json(json.dumps({"P": [[1.0]]}))
