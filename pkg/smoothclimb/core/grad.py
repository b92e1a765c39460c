"""Score-function (REINFORCE) and finite-difference gradient estimators."""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from smoothclimb.core.executor import DEFAULT_EXECUTOR, RolloutExecutor
from smoothclimb.core.mdp import Mdp, ReturnEstimate, discounted_return, policy_actor, simulate
from smoothclimb.core.policy import GaussianAffinePolicy, Policy, PolicyError
from smoothclimb.core.rng import RandomStream
from smoothclimb.utils.validators import ValidationError

logger = logging.getLogger(__name__)

MEAN_BASELINE = "mean"
DEFAULT_FD_EPS = 1e-3

Baseline = float | Literal["mean"] | None
Objective = Callable[[np.ndarray, RandomStream], ReturnEstimate]


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    """Gradient vector with per-coordinate standard errors."""

    vector: np.ndarray
    stderr_per_coord: np.ndarray
    n_samples: int
    returns: ReturnEstimate | None = field(default=None, repr=False)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def z_scores(self, other: "GradientEstimate") -> np.ndarray:
        """Per-coordinate gap in units of the combined standard error."""
        combined = np.hypot(self.stderr_per_coord, other.stderr_per_coord)
        gap = np.abs(self.vector - other.vector)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(combined > 0, gap / combined, np.where(gap > 0, np.inf, 0.0))

    def agrees_with(self, other: "GradientEstimate", k: float = 3.0) -> bool:
        return bool(np.all(self.z_scores(other) <= k))


@dataclass
class ScoredRollouts:
    """Per-rollout returns and summed scores Σ_t ∇ log π(a_t|h_t)."""

    returns: np.ndarray
    theta_scores: np.ndarray
    log_std_scores: np.ndarray | None = None


def collect_scores(
    mdp: Mdp,
    policy: Policy,
    n: int,
    rng: RandomStream,
    executor: RolloutExecutor | None = None,
    with_log_std: bool = False,
) -> ScoredRollouts:
    """Roll out a stochastic policy and accumulate its score along every trajectory.

    Raises:
        PolicyError: If the policy is deterministic
    """
    if policy.is_deterministic:
        raise PolicyError("score-function gradients need a stochastic policy")
    if with_log_std and not (
        isinstance(policy, GaussianAffinePolicy) and policy.log_std is not None
    ):
        raise PolicyError("log-std scores need a policy built with free log-std parameters")
    executor = executor or DEFAULT_EXECUTOR

    def block(count: int, block_stream: RandomStream):
        traj = simulate(mdp, policy_actor(policy), count, block_stream)
        history = traj.history
        theta_scores = np.zeros((count, policy.param_dim))
        log_std_scores = np.zeros((count, policy.action_dim)) if with_log_std else None
        for t in range(mdp.horizon):
            prefix = history.prefix(t)
            actions = history.actions[:, t]
            theta_scores += policy.score(prefix, actions)
            if with_log_std:
                log_std_scores += policy.score_log_std(prefix, actions)
        return discounted_return(traj, mdp.discount), theta_scores, log_std_scores

    blocks = executor.map_blocks(block, n, rng, "score-function rollouts")
    return ScoredRollouts(
        returns=np.concatenate([b[0] for b in blocks]),
        theta_scores=np.concatenate([b[1] for b in blocks]),
        log_std_scores=np.concatenate([b[2] for b in blocks]) if with_log_std else None,
    )


def score_gradient_from(
    scores: np.ndarray, returns: np.ndarray, baseline: Baseline
) -> GradientEstimate:
    """Average of score·(G − baseline) over rollouts with its standard errors."""
    n = returns.shape[0]
    if baseline == MEAN_BASELINE:
        offset = float(np.mean(returns))
    elif baseline is None:
        offset = 0.0
    else:
        offset = float(baseline)
    per_rollout = scores * (returns - offset)[:, None]
    return GradientEstimate(
        vector=per_rollout.mean(axis=0),
        stderr_per_coord=per_rollout.std(axis=0, ddof=1) / np.sqrt(n),
        n_samples=n,
        returns=ReturnEstimate.from_samples(returns),
    )


def score_function_gradient(
    mdp: Mdp,
    policy: Policy,
    n: int,
    rng: RandomStream,
    baseline: Baseline = MEAN_BASELINE,
    executor: RolloutExecutor | None = None,
) -> GradientEstimate:
    """REINFORCE estimate of ∇_θ J(policy) from ``n`` rollouts.

    Args:
        mdp: Environment
        policy: Stochastic affine policy
        n: Number of rollouts (>= 2)
        rng: Stream of the estimate
        baseline: Constant subtracted from returns; "mean" uses the batch mean return,
            None disables the baseline

    Raises:
        PolicyError: If the policy is deterministic
    """
    if n < 2:
        raise ValidationError(f"need at least 2 rollouts, got {n}")
    scored = collect_scores(mdp, policy, n, rng, executor)
    estimate = score_gradient_from(scored.theta_scores, scored.returns, baseline)
    logger.debug(
        f"Score-function gradient: |g|={estimate.norm:.4g}, "
        f"J={estimate.returns.mean:.4g} ± {estimate.returns.stderr:.2g} (n={n})"
    )
    return estimate


def finite_difference_gradient(
    objective: Objective,
    theta: np.ndarray,
    eps: float,
    rng: RandomStream,
) -> GradientEstimate:
    """Central differences with common random numbers on both sides.

    Coordinate k uses the step eps·(|θ_k| + 1). When the objective exposes its
    per-rollout samples, standard errors come from the paired differences.
    """
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    vector = np.empty_like(theta)
    stderr = np.empty_like(theta)
    n_samples = None

    for k in range(theta.shape[0]):
        h = eps * (abs(theta[k]) + 1.0)
        shift = np.zeros_like(theta)
        shift[k] = h
        upper = objective(theta + shift, rng)
        lower = objective(theta - shift, rng)
        vector[k] = (upper.mean - lower.mean) / (2.0 * h)

        paired = (
            upper.samples is not None
            and lower.samples is not None
            and upper.samples.shape == lower.samples.shape
            and upper.samples.shape[0] > 1
        )
        if paired:
            diff = upper.samples - lower.samples
            stderr[k] = np.std(diff, ddof=1) / np.sqrt(diff.shape[0]) / (2.0 * h)
        else:
            stderr[k] = np.hypot(upper.stderr, lower.stderr) / (2.0 * h)
        count = min(upper.n_samples, lower.n_samples)
        n_samples = count if n_samples is None else min(n_samples, count)

    return GradientEstimate(vector=vector, stderr_per_coord=stderr, n_samples=n_samples)
