"""Tests for histories, rollouts and Monte-Carlo return estimation."""

import numpy as np
import numpy.testing as npt
import pytest

from smoothclimb.core.executor import RolloutExecutor
from smoothclimb.core.hillcar import make_hillcar_mdp
from smoothclimb.core.mdp import (
    History,
    Mdp,
    ReturnEstimate,
    Trajectory,
    discounted_return,
    estimate_return,
    rollout,
    simulate,
    truncation_bias_bound,
)
from smoothclimb.core.policy import ConstantCovariance, GaussianAffinePolicy, k_controller
from smoothclimb.core.rng import RandomStream
from smoothclimb.utils.validators import ValidationError


def idle(mdp: Mdp):
    """Action function that always pushes with zero force."""

    def act(history: History, streams) -> np.ndarray:
        return np.zeros((history.n, mdp.action_dim))

    return act


@pytest.fixture
def constant_reward() -> Mdp:
    """Reward 1 at every step, γ = 0.99, T = 100."""
    return Mdp(
        initial_state_sampler=lambda n, rng: np.zeros((n, 1)),
        transition_sampler=lambda states, actions, rng: states,
        reward_fn=lambda states, actions: np.ones(states.shape[0]),
        discount=0.99,
        horizon=100,
        reward_bound=1.0,
        state_dim=1,
        action_dim=1,
    )


class TestHistory:
    def test_append_and_views(self):
        history = History(np.zeros((3, 2)), horizon=2, action_dim=1)
        history.append(np.ones((3, 1)), np.full((3, 2), 5.0))
        assert history.t == 1
        assert history.states.shape == (3, 2, 2)
        assert history.actions.shape == (3, 1, 1)
        npt.assert_array_equal(history.last_state, np.full((3, 2), 5.0))

    def test_full_history_rejects_append(self):
        history = History(np.zeros((1, 2)), horizon=1, action_dim=1)
        history.append(np.zeros((1, 1)), np.zeros((1, 2)))
        with pytest.raises(ValidationError):
            history.append(np.zeros((1, 1)), np.zeros((1, 2)))

    def test_prefix(self):
        states = np.arange(8, dtype=float).reshape(1, 4, 2)
        actions = np.arange(3, dtype=float).reshape(1, 3, 1)
        history = History.from_arrays(states, actions)
        prefix = history.prefix(1)
        assert prefix.t == 1
        npt.assert_array_equal(prefix.last_state, states[:, 1])
        npt.assert_array_equal(prefix.actions, actions[:, :1])

    def test_from_arrays_needs_one_more_state(self):
        with pytest.raises(ValidationError):
            History.from_arrays(np.zeros((1, 2, 2)), np.zeros((1, 2, 1)))


class TestReturns:
    def test_discounted_return(self):
        traj = Trajectory(history=None, rewards=np.ones((2, 3)))
        npt.assert_allclose(discounted_return(traj, 0.5), [1.75, 1.75])

    def test_discount_must_be_below_one(self):
        traj = Trajectory(history=None, rewards=np.ones((1, 3)))
        with pytest.raises(ValidationError):
            discounted_return(traj, 1.0)

    def test_reward_uses_state_before_transition(self, bandit, linear_mean):
        policy = GaussianAffinePolicy(linear_mean, ConstantCovariance(np.eye(1)), theta=[2.0])
        traj = simulate(bandit, lambda h, s: policy.sample_action(h, s.policy), 4, RandomStream(0))
        npt.assert_array_equal(traj.rewards[:, 0], traj.history.actions[:, 0, 0])

    def test_constant_reward_return(self, constant_reward):
        traj = simulate(constant_reward, idle(constant_reward), 3, RandomStream(0))
        npt.assert_allclose(discounted_return(traj, 0.99), [63.3968] * 3, atol=1e-4)

    def test_truncation_bias_bound_is_tight_for_constant_rewards(self, constant_reward):
        traj = simulate(constant_reward, idle(constant_reward), 1, RandomStream(0))
        infinite = 1.0 / (1.0 - constant_reward.discount)
        gap = infinite - discounted_return(traj, constant_reward.discount)[0]
        assert gap == pytest.approx(truncation_bias_bound(constant_reward))
        assert truncation_bias_bound(constant_reward) == pytest.approx(36.6032, abs=1e-4)

    def test_stderr_shrinks_with_more_rollouts(self, short_hillcar, profile):
        policy = k_controller(-2.0, profile.x_target, sigma_prime=1.0)
        small = estimate_return(short_hillcar, policy, 4000, RandomStream(6))
        large = estimate_return(short_hillcar, policy, 8000, RandomStream(6))
        assert large.stderr / small.stderr == pytest.approx(1.0 / np.sqrt(2.0), abs=0.06)

    def test_single_rollout_length(self, hillcar, profile):
        traj = rollout(hillcar, k_controller(-1.0, profile.x_target), RandomStream(0))
        assert traj.rewards.shape == (1, 100)
        assert traj.history.states.shape == (1, 101, 2)

    def test_one_step_return_is_linear_in_theta(self, bandit, linear_mean):
        policy = GaussianAffinePolicy(linear_mean, ConstantCovariance(np.eye(1)), theta=[0.7])
        estimate = estimate_return(bandit, policy, 20000, RandomStream(3))
        assert abs(estimate.mean - 0.7) <= 4 * estimate.stderr

    def test_reward_scaling(self, make_bandit, linear_mean):
        policy = GaussianAffinePolicy(linear_mean, ConstantCovariance(np.eye(1)), theta=[0.3])
        base = estimate_return(make_bandit(1.0), policy, 500, RandomStream(9))
        doubled = estimate_return(make_bandit(2.0), policy, 500, RandomStream(9))
        assert doubled.mean == 2.0 * base.mean
        assert doubled.stderr == pytest.approx(2.0 * base.stderr, rel=1e-12)

    def test_deterministic_noise_free_rollouts_agree(self, quiet_params, profile):
        mdp = make_hillcar_mdp(quiet_params, profile)
        estimate = estimate_return(mdp, k_controller(-2.0, profile.x_target), 8, RandomStream(0))
        assert estimate.stderr < 1e-12

    def test_needs_two_rollouts(self, hillcar, profile):
        with pytest.raises(ValidationError):
            estimate_return(hillcar, k_controller(0.0, profile.x_target), 1, RandomStream(0))

    def test_independent_of_thread_count(self, short_hillcar, profile):
        policy = k_controller(-1.0, profile.x_target, sigma_prime=1.0)
        one = estimate_return(
            short_hillcar, policy, 100, RandomStream(5), RolloutExecutor(threads=1, block_size=16)
        )
        three = estimate_return(
            short_hillcar, policy, 100, RandomStream(5), RolloutExecutor(threads=3, block_size=16)
        )
        npt.assert_array_equal(one.samples, three.samples)


class TestReturnEstimate:
    def test_from_samples(self):
        estimate = ReturnEstimate.from_samples(np.array([1.0, 2.0, 3.0, 4.0]))
        assert estimate.mean == 2.5
        assert estimate.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2.0)
        assert estimate.n_samples == 4

    def test_agreement(self):
        a = ReturnEstimate(mean=1.0, stderr=0.3, n_samples=10)
        b = ReturnEstimate(mean=2.0, stderr=0.4, n_samples=10)
        assert a.z_score(b) == pytest.approx(2.0)
        assert a.agrees_with(b, k=3.0)
        assert not a.agrees_with(b, k=1.0)
