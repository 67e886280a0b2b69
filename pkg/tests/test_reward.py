import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from timely.reward import (
    RewardParams,
    compute_reward,
    game_accuracy,
    ml_accuracy_component,
    reasoning_accuracy,
    utilization,
)
from timely.timecore import Duration

T = Duration.from_seconds(100)
PARAMS = RewardParams(r_f=0.1, lam=0.4, task_kind="reasoning")


def frac_of(t_max, ratio):
    return Duration(int(t_max.micros * ratio))


class TestUtilization:
    def test_zero(self):
        assert utilization(Duration(0), T) == 0.0

    def test_full(self):
        assert utilization(T, T) == 1.0

    def test_half_is_sqrt2_over_2(self):
        assert utilization(frac_of(T, 0.5), T) == pytest.approx(math.sqrt(2) / 2, abs=1e-6)

    def test_clamps_past_deadline(self):
        assert utilization(frac_of(T, 2), T) == 1.0

    def test_zero_t_max_rejected(self):
        with pytest.raises(ValueError):
            utilization(T, Duration(0))

    def test_monotone_on_grid(self):
        values = [utilization(frac_of(T, i / 1000), T) for i in range(1001)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_concave_increments_before_deadline(self):
        # equal time slices near the deadline add less than early ones
        delta = 1 / 100
        increments = [
            utilization(frac_of(T, (i + 1) * delta), T) - utilization(frac_of(T, i * delta), T)
            for i in range(100)
        ]
        assert all(a >= b - 1e-12 for a, b in zip(increments, increments[1:]))


class TestComputeReward:
    def test_over_budget_is_zero(self):
        outcome = compute_reward(frac_of(T, 1.2), 0.5, T, PARAMS)
        assert outcome.total == 0.0
        assert not outcome.on_time

    def test_on_time_zero_accuracy_gets_format_reward(self):
        outcome = compute_reward(frac_of(T, 0.5), 0.0, T, PARAMS)
        assert outcome.total == pytest.approx(0.1)
        assert outcome.on_time

    def test_full_utilization_at_deadline(self):
        outcome = compute_reward(T, 0.5, T, PARAMS)
        assert outcome.total == pytest.approx(1.0, abs=1e-9)

    def test_half_budget_value(self):
        # 0.1 + 0.5 + 0.4*sin(pi/4), evaluated at high precision
        outcome = compute_reward(frac_of(T, 0.5), 0.5, T, PARAMS)
        assert outcome.total == pytest.approx(0.8828427124746190, abs=1e-6)

    def test_components_sum(self):
        outcome = compute_reward(frac_of(T, 0.7), 0.3, T, PARAMS)
        assert outcome.total == pytest.approx(
            outcome.format + outcome.accuracy + outcome.utilization
        )

    def test_r_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            compute_reward(T, 1.5, T, PARAMS)
        with pytest.raises(ValueError):
            compute_reward(T, -0.1, T, PARAMS)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_monotone_in_r(self, r1, r2):
        lo, hi = sorted([r1, r2])
        t = frac_of(T, 0.5)
        assert compute_reward(t, lo, T, PARAMS).total <= compute_reward(t, hi, T, PARAMS).total + 1e-12

    def test_discontinuity_at_zero_accuracy(self):
        t = frac_of(T, 0.5)
        eps = 1e-9
        jump = compute_reward(t, eps, T, PARAMS).total - compute_reward(t, 0.0, T, PARAMS).total
        expected = eps + PARAMS.lam * utilization(t, T)
        assert jump == pytest.approx(expected, abs=1e-12)

    @given(st.floats(0.0, 1.0))
    def test_over_budget_zero_for_all_r(self, r):
        assert compute_reward(frac_of(T, 1.001), r, T, PARAMS).total == 0.0

    def test_deterministic_repeat(self):
        t = frac_of(T, 0.37)
        values = {compute_reward(t, 0.42, T, PARAMS).total for _ in range(100)}
        assert len(values) == 1


class TestTaskTransforms:
    def test_game_full_score(self):
        assert game_accuracy(350, 350) == 1.0

    def test_game_zero(self):
        assert game_accuracy(0, 360) == 0.0

    def test_game_cube_root(self):
        assert game_accuracy(45, 360) == pytest.approx(0.5)

    def test_game_negative_clamps(self):
        assert game_accuracy(-5, 350) == 0.0

    def test_game_monotone(self):
        values = [game_accuracy(s, 350) for s in range(0, 351, 10)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_game_invalid_max(self):
        with pytest.raises(ValueError):
            game_accuracy(10, 0)

    def test_ml_half(self):
        assert ml_accuracy_component(0.9394) == pytest.approx(0.4697)
        assert ml_accuracy_component(0.0) == 0.0
        assert ml_accuracy_component(1.0) == 0.5

    def test_ml_out_of_range(self):
        with pytest.raises(ValueError):
            ml_accuracy_component(1.2)

    def test_reasoning_values(self):
        assert reasoning_accuracy(True) == 0.5
        assert reasoning_accuracy(False) == 0.0

    def test_reasoning_wrong_composes_to_format_reward(self):
        outcome = compute_reward(frac_of(T, 0.5), reasoning_accuracy(False), T, PARAMS)
        assert outcome.total == pytest.approx(0.1)
