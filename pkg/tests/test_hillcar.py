"""Tests for the valley profile and car dynamics."""

import numpy as np
import numpy.testing as npt
import pytest

from smoothclimb.core.hillcar import (
    CarParams,
    HillProfile,
    make_hillcar_mdp,
    mechanical_energy,
    profile_eval,
    step,
)
from smoothclimb.utils.validators import ValidationError


class TestHillProfile:
    def test_default_topology(self, profile):
        assert profile.x_min < profile.x_peak < profile.x_target < profile.x_max
        assert -1.5 < profile.x_peak < 0.0
        assert 2.0 < profile.x_target < 2.5

    def test_target_is_a_stationary_global_minimum(self, profile):
        _, dh, d2h = profile_eval(profile, profile.x_target)
        assert abs(dh) < 1e-6
        assert d2h > 0
        grid = np.linspace(profile.x_min, profile.x_max, 2001)
        assert profile.h(profile.x_target) <= profile.h(grid).min() + 1e-12

    def test_single_well_rejected(self):
        with pytest.raises(ValidationError, match="two floors"):
            HillProfile.from_coefficients([0.0, 0.0, 1.0])

    def test_start_on_global_floor_rejected(self):
        with pytest.raises(ValidationError, match="x_initial"):
            HillProfile.double_well(params=CarParams(x_initial=2.0))

    def test_coefficients_roundtrip(self, profile):
        rebuilt = HillProfile.from_coefficients(profile.coefficients)
        assert rebuilt.x_target == pytest.approx(profile.x_target, abs=1e-8)

    def test_height_range(self, profile):
        low, high = profile.height_range()
        assert low == pytest.approx(float(profile.h(profile.x_target)))
        assert high >= float(profile.h(profile.x_min))

    def test_slope_at_start(self, profile):
        _, dh, _ = profile_eval(profile, -3.0)
        assert dh == pytest.approx(-0.1, abs=1e-12)

    @pytest.mark.parametrize("x", [-3.7, -3.0, -0.5, 1.1, 2.5, 4.6])
    def test_derivatives_match_finite_differences(self, profile, x):
        step_size = 1e-5
        _, dh, d2h = profile_eval(profile, x)
        above = profile_eval(profile, x + step_size)
        below = profile_eval(profile, x - step_size)
        assert dh == pytest.approx((above[0] - below[0]) / (2 * step_size), rel=1e-6, abs=1e-8)
        assert d2h == pytest.approx((above[1] - below[1]) / (2 * step_size), rel=1e-6, abs=1e-8)

    def test_critical_points_on_grid_nodes(self):
        # h′(x) = x(x + 2)(x − 3) vanishes exactly at the nodes −2, 0 and 3
        profile = HillProfile.from_coefficients([0.0, 0.0, -3.0, -1.0 / 3.0, 0.25])
        assert profile.x_peak == pytest.approx(0.0, abs=1e-12)
        assert profile.x_target == pytest.approx(3.0, abs=1e-6)


class TestCarParams:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"mass": 0.0},
            {"damping": -1.0},
            {"action_min": 1.0, "action_max": -1.0},
            {"x_initial": 10.0},
            {"discount": 1.0},
            {"euler_substeps": 0},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ValidationError):
            CarParams(**overrides)


class TestStep:
    def test_one_step_from_rest(self, quiet_params, profile):
        next_state = step(np.array([-3.0, 0.0]), 0.0, quiet_params, profile, None)
        assert next_state[0] == -3.0
        assert next_state[1] == pytest.approx(0.1 * 9.81 * 0.1 / 1.01)
        assert next_state[1] == pytest.approx(0.0971, abs=1e-4)

    def test_position_is_clamped(self, quiet_params, profile):
        next_state = step(np.array([-3.99, -5.0]), 0.0, quiet_params, profile, None)
        assert next_state[0] == quiet_params.x_min
        assert next_state.shape == (2,)

    def test_force_is_clamped(self, quiet_params, profile):
        state = np.array([[0.0, 0.0]])
        strong = step(state, np.array([100.0]), quiet_params, profile, None)
        limit = step(state, np.array([quiet_params.action_max]), quiet_params, profile, None)
        npt.assert_array_equal(strong, limit)

    def test_rest_at_target(self, quiet_params, profile):
        state = np.array([[profile.x_target, 0.0]])
        next_state = step(state, np.zeros(1), quiet_params, profile, None)
        npt.assert_allclose(next_state, state, atol=1e-6)

    def test_noise_uses_generator(self, car_params, profile):
        state = np.zeros((2, 2))
        a = step(state, np.zeros(2), car_params, profile, np.random.default_rng(0))
        b = step(state, np.zeros(2), car_params, profile, np.random.default_rng(0))
        npt.assert_array_equal(a, b)
        assert not np.array_equal(a[0], a[1])

    def test_energy_drift_shrinks_with_substeps(self, profile):
        def drift(substeps: int) -> float:
            params = CarParams(noise_std=0.0, damping=0.0, euler_substeps=substeps)
            state = np.array([[-1.5, 0.0]])
            energy = mechanical_energy(state, params, profile)[0]
            for _ in range(5):
                state = step(state, np.zeros(1), params, profile, None)
            return abs(mechanical_energy(state, params, profile)[0] - energy)

        assert drift(64) < drift(1)

    def test_energy_at_rest_is_potential(self, car_params, profile):
        energy = mechanical_energy(np.array([1.0, 0.0]), car_params, profile)
        expected = car_params.mass * car_params.gravity * profile.h(1.0)
        npt.assert_allclose(energy, [expected])


class TestHillcarMdp:
    def test_start_and_reward(self, car_params, profile):
        mdp = make_hillcar_mdp(car_params, profile)
        states = mdp.initial_state_sampler(3, np.random.default_rng(0))
        npt.assert_array_equal(states, np.tile([car_params.x_initial, 0.0], (3, 1)))
        rewards = mdp.reward_fn(states, np.zeros((3, 1)))
        npt.assert_allclose(rewards, -profile.h(car_params.x_initial))
        assert mdp.horizon == 100
        assert mdp.discount == 0.99
