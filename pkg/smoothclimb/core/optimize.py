"""Optimization by continuation and its two baselines.

``optimize_by_continuation`` follows the graduated scheme: a decreasing sequence of
continuation scales, a few stochastic-gradient-ascent steps per scale on the mirror
policy's return, each stage warm-started at the previous stage's final θ.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from smoothclimb.core.continuation import (
    CovarianceFn,
    mirror_of_deterministic,
    mirror_of_deterministic_history,
)
from smoothclimb.core.executor import EstimationError, RolloutExecutor
from smoothclimb.core.grad import (
    DEFAULT_FD_EPS,
    MEAN_BASELINE,
    GradientEstimate,
    collect_scores,
    finite_difference_gradient,
    score_function_gradient,
    score_gradient_from,
)
from smoothclimb.core.mdp import Mdp, ReturnEstimate, estimate_return
from smoothclimb.core.policy import DeterministicAffinePolicy, GaussianAffinePolicy, PolicyError
from smoothclimb.core.rng import RandomStream
from smoothclimb.utils.validators import ValidationError

logger = logging.getLogger(__name__)

METHODS = ("continuation", "entropy_reg", "deterministic")


class DivergenceError(EstimationError):
    """Raised when an optimizer produces non-finite parameters."""
    pass


@dataclass(frozen=True)
class Schedule:
    """Strictly decreasing continuation scales; only the last may be 0."""

    scales: tuple[float, ...]

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        object.__setattr__(self, "scales", scales)
        if not scales:
            raise ValidationError("schedule needs at least one stage")
        if not all(np.isfinite(scales)):
            raise ValidationError("schedule scales must be finite")
        if any(s <= 0 for s in scales[:-1]) or scales[-1] < 0:
            raise ValidationError("schedule scales must be positive (the last may be 0)")
        if any(b >= a for a, b in zip(scales, scales[1:])):
            raise ValidationError("schedule scales must be strictly decreasing")

    @classmethod
    def geometric(cls, scale_0: float, decay: float, stages: int) -> "Schedule":
        """scale_i = scale_0·decay^i for i < stages."""
        if not 0 < decay < 1:
            raise ValidationError(f"decay must lie in (0, 1), got {decay}")
        if stages < 1:
            raise ValidationError(f"stages must be >= 1, got {stages}")
        return cls(tuple(scale_0 * decay**i for i in range(stages)))

    @classmethod
    def explicit(cls, scales: list[float]) -> "Schedule":
        return cls(tuple(scales))

    def __len__(self) -> int:
        return len(self.scales)


@dataclass(frozen=True)
class OptimizerConfig:
    """Stochastic-gradient-ascent settings shared by all optimizers."""

    steps_per_stage: int = 3
    stepsize: float = 0.01
    n_rollouts: int = 1000
    n_steps: int = 20                   # total steps of the baselines
    entropy_coef: float = 0.0           # initial entropy bonus
    entropy_decay: float = 1.0          # bonus multiplier per step (1 = fixed)
    initial_log_std: float = 0.0
    fd_eps: float = DEFAULT_FD_EPS
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.steps_per_stage < 1:
            raise ValidationError(f"steps_per_stage must be >= 1, got {self.steps_per_stage}")
        if self.stepsize < 0 or not np.isfinite(self.stepsize):
            raise ValidationError(f"stepsize must be finite and >= 0, got {self.stepsize}")
        if self.n_rollouts < 2:
            raise ValidationError(f"n_rollouts must be >= 2, got {self.n_rollouts}")
        if self.n_steps < 1:
            raise ValidationError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.entropy_coef < 0:
            raise ValidationError(f"entropy_coef must be >= 0, got {self.entropy_coef}")
        if not 0 < self.entropy_decay <= 1:
            raise ValidationError(f"entropy_decay must lie in (0, 1], got {self.entropy_decay}")
        if self.fd_eps <= 0:
            raise ValidationError(f"fd_eps must be positive, got {self.fd_eps}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")

    def entropy_coef_at(self, step: int) -> float:
        return self.entropy_coef * self.entropy_decay**step


@dataclass(frozen=True)
class RunStep:
    """One executed ascent step."""

    stage: int
    step: int
    scale: float
    theta: tuple[float, ...]
    theta_next: tuple[float, ...]
    return_mean: float
    return_stderr: float
    n_samples: int
    grad_norm: float
    log_std: tuple[float, ...] | None = None
    entropy_coef: float | None = None


@dataclass
class RunRecord:
    """Append-only trace of an optimizer run."""

    method: str
    steps: list[RunStep] = field(default_factory=list)

    def append(self, row: RunStep) -> None:
        self.steps.append(row)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def initial_theta(self) -> np.ndarray:
        return np.array(self.steps[0].theta)

    @property
    def final_theta(self) -> np.ndarray:
        return np.array(self.steps[-1].theta_next)

    def stage_scales(self) -> list[float]:
        """Scale of every stage, in execution order."""
        scales: dict[int, float] = {}
        for row in self.steps:
            scales.setdefault(row.stage, row.scale)
        return [scales[i] for i in sorted(scales)]


def _advance(
    theta: np.ndarray, stepsize: float, grad: GradientEstimate, where: str
) -> np.ndarray:
    theta_next = theta + stepsize * grad.vector
    if not np.all(np.isfinite(theta_next)):
        raise DivergenceError(f"{where}: non-finite parameters {theta_next}")
    return theta_next


def optimize_by_continuation(
    mdp: Mdp,
    original: DeterministicAffinePolicy,
    base_lam: CovarianceFn,
    schedule: Schedule,
    cfg: OptimizerConfig,
    executor: RolloutExecutor | None = None,
) -> RunRecord:
    """Ascend the continuations of the return of ``original`` along ``schedule``.

    Stage i builds the mirror policy of ``original`` under scale_i·Λ and takes
    ``steps_per_stage`` score-function ascent steps on its return.

    A zero-scale stage has a degenerate mirror with no density, so no score exists
    there. That stage is not score-free direct ascent: it estimates the gradient of
    the deterministic return by central finite differences over common random
    numbers, the same estimator as ``deterministic_ascent_baseline``.

    Raises:
        DivergenceError: If θ becomes non-finite
    """
    if not original.is_deterministic:
        raise PolicyError("optimize_by_continuation expects a deterministic original policy")
    root = RandomStream(cfg.seed)
    record = RunRecord(method="continuation")
    theta = np.array(original.theta)

    for stage, scale in enumerate(schedule.scales):
        lam = base_lam.scaled(scale)
        for k in range(cfg.steps_per_stage):
            stream = root.child(stage).child(k)
            current = original.with_theta(theta)
            if lam.is_zero:
                grad, estimate = _deterministic_step(mdp, current, theta, cfg, stream, executor)
            else:
                if lam.state_only:
                    mirror = mirror_of_deterministic(current, lam)
                else:
                    mirror = mirror_of_deterministic_history(current, lam)
                grad = score_function_gradient(
                    mdp, mirror, cfg.n_rollouts, stream, MEAN_BASELINE, executor
                )
                estimate = grad.returns

            theta_next = _advance(theta, cfg.stepsize, grad, f"continuation stage {stage}")
            record.append(
                RunStep(
                    stage=stage,
                    step=k,
                    scale=scale,
                    theta=tuple(theta.tolist()),
                    theta_next=tuple(theta_next.tolist()),
                    return_mean=estimate.mean,
                    return_stderr=estimate.stderr,
                    n_samples=estimate.n_samples,
                    grad_norm=grad.norm,
                )
            )
            theta = theta_next

        logger.info(
            f"  stage {stage + 1}/{len(schedule)}: scale={scale:.4g}, "
            f"θ={np.array2string(theta, precision=4)}, J={record.steps[-1].return_mean:.4f}"
        )

    return record


def _deterministic_step(
    mdp: Mdp,
    policy: DeterministicAffinePolicy,
    theta: np.ndarray,
    cfg: OptimizerConfig,
    stream: RandomStream,
    executor: RolloutExecutor | None,
) -> tuple[GradientEstimate, ReturnEstimate]:
    def objective(params: np.ndarray, rng: RandomStream) -> ReturnEstimate:
        return estimate_return(mdp, policy.with_theta(params), cfg.n_rollouts, rng, executor)

    grad = finite_difference_gradient(objective, theta, cfg.fd_eps, stream)
    return grad, objective(theta, stream)


def deterministic_ascent_baseline(
    mdp: Mdp,
    policy: DeterministicAffinePolicy,
    cfg: OptimizerConfig,
    executor: RolloutExecutor | None = None,
) -> RunRecord:
    """Direct ascent of the deterministic return with finite-difference gradients."""
    if not policy.is_deterministic:
        raise PolicyError("deterministic_ascent_baseline expects a deterministic policy")
    root = RandomStream(cfg.seed)
    record = RunRecord(method="deterministic")
    theta = np.array(policy.theta)

    for k in range(cfg.n_steps):
        grad, estimate = _deterministic_step(mdp, policy, theta, cfg, root.child(k), executor)
        theta_next = _advance(theta, cfg.stepsize, grad, f"deterministic step {k}")
        record.append(
            RunStep(
                stage=0,
                step=k,
                scale=0.0,
                theta=tuple(theta.tolist()),
                theta_next=tuple(theta_next.tolist()),
                return_mean=estimate.mean,
                return_stderr=estimate.stderr,
                n_samples=estimate.n_samples,
                grad_norm=grad.norm,
            )
        )
        theta = theta_next

    logger.info(f"  deterministic ascent: θ={np.array2string(theta, precision=4)}")
    return record


def entropy_regularized_ascent(
    mdp: Mdp,
    policy: GaussianAffinePolicy,
    cfg: OptimizerConfig,
    freeze_std: bool = False,
    executor: RolloutExecutor | None = None,
) -> RunRecord:
    """Joint ascent of (θ, log σ) on J + coef·(mean per-step policy entropy).

    The entropy of N(μ, diag σ²) is Σ_i log σ_i + const, so the bonus adds ``coef``
    to every log-σ gradient coordinate and nothing to the θ gradient.

    Raises:
        PolicyError: If the policy has no free log-std parameters
    """
    if policy.log_std is None:
        raise PolicyError("entropy_regularized_ascent needs a policy built with_log_std")
    root = RandomStream(cfg.seed)
    record = RunRecord(method="entropy_reg")
    theta = np.array(policy.theta)
    log_std = np.array(policy.log_std)

    for k in range(cfg.n_steps):
        coef = cfg.entropy_coef_at(k)
        current = GaussianAffinePolicy.with_log_std(policy.mean, theta, log_std)
        scored = collect_scores(
            mdp, current, cfg.n_rollouts, root.child(k), executor, with_log_std=True
        )
        grad = score_gradient_from(scored.theta_scores, scored.returns, MEAN_BASELINE)
        theta_next = _advance(theta, cfg.stepsize, grad, f"entropy step {k}")

        log_std_next = log_std
        if not freeze_std:
            std_grad = score_gradient_from(scored.log_std_scores, scored.returns, MEAN_BASELINE)
            log_std_next = log_std + cfg.stepsize * (std_grad.vector + coef)
            if not np.all(np.isfinite(log_std_next)):
                raise DivergenceError(f"entropy step {k}: non-finite log-std {log_std_next}")

        record.append(
            RunStep(
                stage=0,
                step=k,
                scale=float(np.exp(2.0 * log_std[0])),
                theta=tuple(theta.tolist()),
                theta_next=tuple(theta_next.tolist()),
                return_mean=grad.returns.mean,
                return_stderr=grad.returns.stderr,
                n_samples=grad.returns.n_samples,
                grad_norm=grad.norm,
                log_std=tuple(log_std.tolist()),
                entropy_coef=coef,
            )
        )
        theta, log_std = theta_next, log_std_next

    logger.info(
        f"  entropy-regularized ascent: θ={np.array2string(theta, precision=4)}, "
        f"σ={np.array2string(np.exp(log_std), precision=4)}"
    )
    return record
