"""Discounted MDPs, batched trajectory rollout and Monte-Carlo return estimation.

States, actions and rewards are handled in batches: a batch of ``n`` rollouts
carries states of shape (n, d_S), actions of shape (n, d_A) and rewards of shape (n,).
A single rollout is simply a batch of one.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from smoothclimb.core.executor import DEFAULT_EXECUTOR, RolloutExecutor
from smoothclimb.core.rng import RandomStream, RolloutStreams
from smoothclimb.utils.validators import ValidationError

if TYPE_CHECKING:
    from smoothclimb.core.policy import Policy

logger = logging.getLogger(__name__)

# (n, env generator) -> initial states (n, d_S)
InitialStateSampler = Callable[[int, np.random.Generator], np.ndarray]
# (states, actions, env generator) -> next states
TransitionSampler = Callable[[np.ndarray, np.ndarray, np.random.Generator], np.ndarray]
# (states, actions) -> rewards (n,)
RewardFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Mdp:
    """A discounted MDP truncated at ``horizon`` transitions."""

    initial_state_sampler: InitialStateSampler
    transition_sampler: TransitionSampler
    reward_fn: RewardFn
    discount: float
    horizon: int
    reward_bound: float
    state_dim: int
    action_dim: int

    def __post_init__(self):
        if not 0.0 <= self.discount < 1.0:
            raise ValidationError(f"discount must lie in [0, 1), got {self.discount}")
        if self.horizon < 1:
            raise ValidationError(f"horizon must be >= 1, got {self.horizon}")
        if self.reward_bound < 0:
            raise ValidationError(f"reward_bound must be >= 0, got {self.reward_bound}")


class History:
    """Batched alternating state/action sequence ending in a state.

    Storage is preallocated for a full rollout; ``append`` is the only mutation
    and views returned by ``states``/``actions`` cover the first t steps.
    """

    def __init__(self, initial_states: np.ndarray, horizon: int, action_dim: int):
        initial_states = np.atleast_2d(np.asarray(initial_states, dtype=float))
        n, state_dim = initial_states.shape
        self._states = np.empty((n, horizon + 1, state_dim))
        self._actions = np.empty((n, horizon, action_dim))
        self._states[:, 0] = initial_states
        self._t = 0

    @classmethod
    def from_arrays(cls, states: np.ndarray, actions: np.ndarray) -> "History":
        """Build a history from complete arrays (n, t+1, d_S) and (n, t, d_A)."""
        states = np.asarray(states, dtype=float)
        actions = np.asarray(actions, dtype=float)
        if states.ndim != 3 or actions.ndim != 3:
            raise ValidationError("states and actions must be 3-D (batch, time, dim)")
        if states.shape[1] != actions.shape[1] + 1:
            raise ValidationError(
                f"need one more state than actions, got {states.shape[1]} and {actions.shape[1]}"
            )
        t = actions.shape[1]
        history = cls(states[:, 0], max(t, 1), actions.shape[2])
        history._states[:, : t + 1] = states
        history._actions[:, :t] = actions
        history._t = t
        return history

    @property
    def t(self) -> int:
        """Number of actions taken so far."""
        return self._t

    @property
    def n(self) -> int:
        return self._states.shape[0]

    @property
    def states(self) -> np.ndarray:
        return self._states[:, : self._t + 1]

    @property
    def actions(self) -> np.ndarray:
        return self._actions[:, : self._t]

    @property
    def last_state(self) -> np.ndarray:
        return self._states[:, self._t]

    def append(self, actions: np.ndarray, next_states: np.ndarray) -> None:
        if self._t >= self._actions.shape[1]:
            raise ValidationError("history is full")
        self._actions[:, self._t] = actions
        self._states[:, self._t + 1] = next_states
        self._t += 1

    def prefix(self, t: int) -> "History":
        """Return the history truncated to its first t actions (a copy)."""
        if not 0 <= t <= self._t:
            raise ValidationError(f"prefix length {t} outside [0, {self._t}]")
        return History.from_arrays(self._states[:, : t + 1], self._actions[:, :t])


@dataclass
class Trajectory:
    """A batch of complete rollouts: history plus per-step rewards (n, T)."""

    history: History
    rewards: np.ndarray

    @property
    def n(self) -> int:
        return self.rewards.shape[0]


@dataclass(frozen=True)
class ReturnEstimate:
    """Monte-Carlo estimate of a (continuation of a) return."""

    mean: float
    stderr: float
    n_samples: int
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "ReturnEstimate":
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        stderr = float(np.std(samples, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(mean=float(np.mean(samples)), stderr=stderr, n_samples=n, samples=samples)

    def z_score(self, other: "ReturnEstimate") -> float:
        """Difference of means in units of the combined standard error."""
        combined = np.hypot(self.stderr, other.stderr)
        gap = abs(self.mean - other.mean)
        if combined == 0.0:
            return 0.0 if gap == 0.0 else float("inf")
        return float(gap / combined)

    def agrees_with(self, other: "ReturnEstimate", k: float = 3.0) -> bool:
        return self.z_score(other) <= k


# history, streams -> actions (n, d_A)
ActionFn = Callable[[History, RolloutStreams], np.ndarray]


def simulate(mdp: Mdp, act: ActionFn, n: int, stream: RandomStream) -> Trajectory:
    """Roll out ``n`` trajectories of exactly ``mdp.horizon`` transitions.

    Args:
        mdp: Environment
        act: Chooses the actions of the batch given the growing history
        n: Number of rollouts in the batch
        stream: Stream of this batch (split into env/policy/perturb sub-streams)

    Returns:
        Trajectory batch with T+1 states, T actions and T rewards per rollout
    """
    streams = RolloutStreams.from_stream(stream)
    states = mdp.initial_state_sampler(n, streams.env)
    history = History(states, mdp.horizon, mdp.action_dim)
    rewards = np.empty((n, mdp.horizon))

    for t in range(mdp.horizon):
        actions = np.asarray(act(history, streams), dtype=float).reshape(n, mdp.action_dim)
        rewards[:, t] = mdp.reward_fn(states, actions)
        states = mdp.transition_sampler(states, actions, streams.env)
        history.append(actions, states)

    return Trajectory(history=history, rewards=rewards)


def policy_actor(policy: "Policy") -> ActionFn:
    """Action function sampling from ``policy`` at its own parameters."""

    def act(history: History, streams: RolloutStreams) -> np.ndarray:
        return policy.sample_action(history, streams.policy)

    return act


def rollout(mdp: Mdp, policy: "Policy", rng: RandomStream) -> Trajectory:
    """Roll out a single trajectory (a batch of one)."""
    return simulate(mdp, policy_actor(policy), 1, rng)


def discounted_return(traj: Trajectory, discount: float) -> np.ndarray:
    """Σ_t γ^t r_t for every rollout of the batch.

    Returns:
        Array of shape (n,)
    """
    if not 0.0 <= discount < 1.0:
        raise ValidationError(f"discount must lie in [0, 1), got {discount}")
    weights = discount ** np.arange(traj.rewards.shape[1], dtype=float)
    return traj.rewards @ weights


def truncation_bias_bound(mdp: Mdp) -> float:
    """Upper bound ρ_max·γ^T/(1−γ) on |truncated return − infinite return|."""
    return mdp.reward_bound * mdp.discount**mdp.horizon / (1.0 - mdp.discount)


def estimate_returns_with(
    mdp: Mdp,
    act: ActionFn,
    n: int,
    rng: RandomStream,
    executor: RolloutExecutor | None = None,
    description: str = "return estimate",
) -> ReturnEstimate:
    """Monte-Carlo mean of discounted returns under an arbitrary action function."""
    if n < 2:
        raise ValidationError(f"need at least 2 rollouts, got {n}")
    executor = executor or DEFAULT_EXECUTOR

    def block(count: int, block_stream: RandomStream) -> np.ndarray:
        return discounted_return(simulate(mdp, act, count, block_stream), mdp.discount)

    returns = np.concatenate(executor.map_blocks(block, n, rng, description))
    return ReturnEstimate.from_samples(returns)


def estimate_return(
    mdp: Mdp,
    policy: "Policy",
    n: int,
    rng: RandomStream,
    executor: RolloutExecutor | None = None,
) -> ReturnEstimate:
    """Estimate J(policy) from ``n`` independent rollouts."""
    return estimate_returns_with(
        mdp, policy_actor(policy), n, rng, executor, description="return estimate"
    )
