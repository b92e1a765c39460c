"""Shared fixtures: the default hill-car task, a noise-free variant and one-step MDPs."""

import numpy as np
import pytest

from smoothclimb.core.executor import RolloutExecutor
from smoothclimb.core.hillcar import CarParams, HillProfile, make_hillcar_mdp
from smoothclimb.core.mdp import Mdp
from smoothclimb.core.policy import AffineMean
from smoothclimb.core.rng import RandomStream


@pytest.fixture(scope="session")
def car_params() -> CarParams:
    return CarParams()


@pytest.fixture(scope="session")
def profile(car_params) -> HillProfile:
    return HillProfile.double_well(params=car_params)


@pytest.fixture(scope="session")
def hillcar(car_params, profile) -> Mdp:
    return make_hillcar_mdp(car_params, profile)


@pytest.fixture(scope="session")
def short_hillcar(profile) -> Mdp:
    """Default valley with a 20-step horizon, for fast tests."""
    return make_hillcar_mdp(CarParams(horizon=20), profile)


@pytest.fixture(scope="session")
def quiet_params() -> CarParams:
    return CarParams(noise_std=0.0)


@pytest.fixture
def stream() -> RandomStream:
    return RandomStream(1234)


@pytest.fixture
def executor() -> RolloutExecutor:
    return RolloutExecutor(threads=1, block_size=64)


def _one_step_mdp(reward_scale: float = 1.0) -> Mdp:
    """Single transition from s = 1 with reward scale·a, so J(θ) = scale·E[a]."""

    def initial_states(n: int, rng: np.random.Generator) -> np.ndarray:
        return np.ones((n, 1))

    def transition(states, actions, rng):
        return states

    def reward(states, actions):
        return reward_scale * np.asarray(actions)[:, 0]

    return Mdp(
        initial_state_sampler=initial_states,
        transition_sampler=transition,
        reward_fn=reward,
        discount=0.5,
        horizon=1,
        reward_bound=abs(reward_scale) * 20.0,
        state_dim=1,
        action_dim=1,
    )


@pytest.fixture
def bandit() -> Mdp:
    return _one_step_mdp()


@pytest.fixture
def make_bandit():
    """Factory for one-step MDPs with a given reward scale."""
    return _one_step_mdp


@pytest.fixture
def linear_mean() -> AffineMean:
    """μ_θ(s) = θ·s for scalar s and θ."""
    return AffineMean(feature_fn=lambda s: s.reshape(-1, 1, 1), param_dim=1, action_dim=1)


@pytest.fixture
def tiny_config_dict(tmp_path) -> dict:
    """Configuration small enough to run every command in about a second."""
    return {
        "environment": {"car": {"horizon": 10}},
        "schedule": {"kind": "explicit", "scales": [2.0, 1.0]},
        "optimizer": {"steps_per_stage": 1, "n_rollouts": 8, "n_steps": 2, "stepsize": 0.01},
        "sweep": {
            "theta_min": -1.0,
            "theta_max": 0.0,
            "theta_step": 0.5,
            "sigma_primes": [0.0, 1.0],
            "n_rollouts": 8,
        },
        "basin": {"pitch": 0.5, "n_rollouts": 4, "prominence_se": 0.0},
        "verify": {
            "thetas": [-1.0, 0.5],
            "composition_thetas": [0.0],
            "check_positions": [-2.0, 1.0],
            "n_rollouts": 200,
            "mixture_samples": 500,
            "roundtrip_instances": 5,
            "roundtrip_max_dim": 3,
        },
        "compare": {"seeds": [0, 1]},
        "output_dir": str(tmp_path / "out"),
        "block_size": 4,
    }
