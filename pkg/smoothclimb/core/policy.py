"""Affine policies: deterministic, Gaussian with state covariance, Gaussian with history covariance.

All policies act on batches. Means are affine in θ, μ_θ(s) = φ(s)ᵀθ + b(s), with
features φ(s) of shape (n, d_Θ, d_A), so ∇_θ μ_θ(s) = φ(s) does not depend on θ.
Covariances never depend on θ.
"""

import dataclasses
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np

from smoothclimb.core.executor import EstimationError
from smoothclimb.core.linalg import gaussian_logpdf, psd_sqrt
from smoothclimb.core.mdp import History
from smoothclimb.core.rng import RandomStream
from smoothclimb.utils.validators import ValidationError

# states (n, d_S) -> matrices
StateFn = Callable[[np.ndarray], np.ndarray]
# history -> (n, d_A, d_A)
HistoryCovFn = Callable[[History], np.ndarray]


class PolicyError(EstimationError):
    """Raised for density requests on deterministic policies or singular covariances."""
    pass


@dataclass(frozen=True)
class AffineMean:
    """μ_θ(s) = φ(s)ᵀθ + b(s)."""

    feature_fn: StateFn
    param_dim: int
    action_dim: int
    offset_fn: StateFn | None = None

    def features(self, states: np.ndarray) -> np.ndarray:
        """φ(s) with shape (n, d_Θ, d_A)."""
        states = np.atleast_2d(states)
        phi = np.asarray(self.feature_fn(states), dtype=float)
        return phi.reshape(states.shape[0], self.param_dim, self.action_dim)

    def offset(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        if self.offset_fn is None:
            return np.zeros((states.shape[0], self.action_dim))
        return np.asarray(self.offset_fn(states), dtype=float).reshape(
            states.shape[0], self.action_dim
        )

    def __call__(self, states: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Mean actions (n, d_A) for θ of shape (d_Θ,) or (n, d_Θ)."""
        phi = self.features(states)
        thetas = np.broadcast_to(np.asarray(theta, dtype=float), (phi.shape[0], self.param_dim))
        return np.einsum("nkd,nk->nd", phi, thetas) + self.offset(states)


@dataclass(frozen=True)
class KControllerFeatures:
    """φ(s) = x − x_target for a scalar-force controller on state (x, v)."""

    x_target: float

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return (states[:, 0] - self.x_target).reshape(-1, 1, 1)


@dataclass(frozen=True, eq=False)
class ConstantFeatures:
    """The same φ of shape (d_Θ, d_A) at every state."""

    matrix: np.ndarray

    def __call__(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        matrix = np.asarray(self.matrix, dtype=float)
        return np.broadcast_to(matrix, (states.shape[0],) + matrix.shape)


@dataclass(frozen=True, eq=False)
class ConstantCovariance:
    """State-independent action covariance."""

    matrix: np.ndarray

    def __call__(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        return np.broadcast_to(matrix, (states.shape[0],) + matrix.shape).copy()


class Policy(ABC):
    """Common sampling, density and score logic of the affine policies."""

    mean: AffineMean
    theta: np.ndarray
    origin: Any

    @property
    def param_dim(self) -> int:
        return self.mean.param_dim

    @property
    def action_dim(self) -> int:
        return self.mean.action_dim

    @property
    @abstractmethod
    def is_deterministic(self) -> bool:
        """True when actions are a deterministic function of the history."""

    @abstractmethod
    def action_covariance(self, history: History) -> np.ndarray:
        """Action covariance at the history, shape (n, d_A, d_A)."""

    def with_theta(self, theta: np.ndarray) -> "Policy":
        return dataclasses.replace(self, theta=_as_theta(theta, self.param_dim))

    def mean_action(self, history: History, theta: np.ndarray | None = None) -> np.ndarray:
        return self.mean(history.last_state, self.theta if theta is None else theta)

    def sample_action(
        self, history: History, rng: np.random.Generator, theta: np.ndarray | None = None
    ) -> np.ndarray:
        """Draw one action per history in the batch.

        Args:
            history: Batched history
            rng: Policy-noise generator (not consumed by deterministic policies)
            theta: Parameters, (d_Θ,) or per-rollout (n, d_Θ); defaults to self.theta

        Returns:
            Actions, shape (n, d_A)
        """
        mean = self.mean_action(history, theta)
        if self.is_deterministic:
            return mean
        root = psd_sqrt(self.action_covariance(history))
        noise = rng.standard_normal(mean.shape)
        return mean + np.einsum("nij,nj->ni", root, noise)

    def log_density(
        self, history: History, actions: np.ndarray, theta: np.ndarray | None = None
    ) -> np.ndarray:
        """Gaussian log-density of actions (n, d_A) at the history, shape (n,).

        Raises:
            PolicyError: If the policy is deterministic or its covariance is singular
        """
        if self.is_deterministic:
            raise PolicyError(f"{type(self).__name__} is deterministic and has no density")
        mean = self.mean_action(history, theta)
        actions = np.asarray(actions, dtype=float).reshape(mean.shape)
        try:
            return gaussian_logpdf(actions, mean, self.action_covariance(history))
        except np.linalg.LinAlgError as e:
            raise PolicyError(f"singular action covariance: {e}") from e

    def score(self, history: History, actions: np.ndarray) -> np.ndarray:
        """∇_θ log π_θ(a|h) = φ(s) Σ⁻¹ (a − μ_θ(s)), shape (n, d_Θ).

        Raises:
            PolicyError: If the policy is deterministic or its covariance is singular
        """
        if self.is_deterministic:
            raise PolicyError(f"{type(self).__name__} is deterministic and has no score")
        mean = self.mean_action(history)
        actions = np.asarray(actions, dtype=float).reshape(mean.shape)
        try:
            solved = np.linalg.solve(self.action_covariance(history), (actions - mean)[..., None])
        except np.linalg.LinAlgError as e:
            raise PolicyError(f"singular action covariance: {e}") from e
        return np.einsum("nkd,nd->nk", self.mean.features(history.last_state), solved[..., 0])


@dataclass(frozen=True, eq=False)
class DeterministicAffinePolicy(Policy):
    """a = μ_θ(s)."""

    mean: AffineMean
    theta: np.ndarray
    origin: Any = None

    def __post_init__(self):
        object.__setattr__(self, "theta", _as_theta(self.theta, self.mean.param_dim))

    @property
    def is_deterministic(self) -> bool:
        return True

    def action_covariance(self, history: History) -> np.ndarray:
        return np.zeros((history.n, self.action_dim, self.action_dim))


@dataclass(frozen=True, eq=False)
class GaussianAffinePolicy(Policy):
    """a ~ N(μ_θ(s), Σ(s)) with Σ depending on the state only.

    ``degenerate`` marks a Σ ≡ 0 policy: it samples its mean and has no density.
    ``log_std`` is set for policies whose diagonal standard deviations are free
    parameters (see ``with_log_std``).
    """

    mean: AffineMean
    covariance_fn: StateFn
    theta: np.ndarray
    degenerate: bool = False
    log_std: np.ndarray | None = None
    origin: Any = None

    def __post_init__(self):
        object.__setattr__(self, "theta", _as_theta(self.theta, self.mean.param_dim))

    @classmethod
    def with_log_std(
        cls, mean: AffineMean, theta: np.ndarray, log_std: np.ndarray
    ) -> "GaussianAffinePolicy":
        """Gaussian policy with diagonal covariance diag(exp(2·log_std))."""
        log_std = np.atleast_1d(np.asarray(log_std, dtype=float))
        if log_std.shape != (mean.action_dim,):
            raise ValidationError(f"log_std must have shape ({mean.action_dim},)")
        if not np.all(np.isfinite(log_std)):
            raise ValidationError("log_std must be finite")
        covariance = ConstantCovariance(np.diag(np.exp(2.0 * log_std)))
        return cls(mean=mean, covariance_fn=covariance, theta=theta, log_std=log_std)

    @property
    def is_deterministic(self) -> bool:
        return self.degenerate

    def state_covariance(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        cov = np.asarray(self.covariance_fn(states), dtype=float)
        return cov.reshape(states.shape[0], self.action_dim, self.action_dim)

    def action_covariance(self, history: History) -> np.ndarray:
        return self.state_covariance(history.last_state)

    def score_log_std(self, history: History, actions: np.ndarray) -> np.ndarray:
        """∂ log π / ∂ log σ_i = (a_i − μ_i)²/σ_i² − 1, shape (n, d_A)."""
        if self.log_std is None:
            raise PolicyError("policy has no free log-std parameters")
        mean = self.mean_action(history)
        actions = np.asarray(actions, dtype=float).reshape(mean.shape)
        return (actions - mean) ** 2 * np.exp(-2.0 * self.log_std) - 1.0


@dataclass(frozen=True, eq=False)
class HistoryCovGaussianPolicy(Policy):
    """a ~ N(μ_θ(s_t), Σ′(h_t)) with the covariance a function of the whole history."""

    mean: AffineMean
    covariance_fn: HistoryCovFn
    theta: np.ndarray
    degenerate: bool = False
    origin: Any = None

    def __post_init__(self):
        object.__setattr__(self, "theta", _as_theta(self.theta, self.mean.param_dim))

    @property
    def is_deterministic(self) -> bool:
        return self.degenerate

    def action_covariance(self, history: History) -> np.ndarray:
        cov = np.asarray(self.covariance_fn(history), dtype=float)
        return cov.reshape(history.n, self.action_dim, self.action_dim)


def _as_theta(theta, param_dim: int) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float)).copy()
    if theta.shape != (param_dim,):
        raise ValidationError(f"theta must have shape ({param_dim},), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValidationError(f"theta must be finite, got {theta}")
    theta.setflags(write=False)
    return theta


def k_controller_mean(x_target: float) -> AffineMean:
    return AffineMean(feature_fn=KControllerFeatures(x_target), param_dim=1, action_dim=1)


def k_controller(theta: float, x_target: float, sigma_prime: float = 0.0) -> Policy:
    """Proportional controller a = θ·(x − x_target), plus N(0, σ′²) noise when σ′ > 0."""
    if sigma_prime < 0:
        raise ValidationError(f"sigma_prime must be >= 0, got {sigma_prime}")
    mean = k_controller_mean(x_target)
    if sigma_prime == 0:
        return DeterministicAffinePolicy(mean=mean, theta=theta)
    return GaussianAffinePolicy(
        mean=mean, covariance_fn=ConstantCovariance(np.array([[sigma_prime**2]])), theta=theta
    )


def sample_action(
    policy: Policy, h: History, rng: RandomStream | np.random.Generator
) -> np.ndarray:
    """Draw actions from the policy's conditional distribution at h.

    A RandomStream is read from its start, so equal streams give equal actions.
    """
    if isinstance(rng, RandomStream):
        rng = rng.generator()
    return policy.sample_action(h, rng)


def log_density(policy: Policy, h: History, a: np.ndarray) -> np.ndarray:
    """Log-density of actions at h under the policy."""
    return policy.log_density(h, a)


def mean_jacobian(policy: Policy, s: np.ndarray) -> np.ndarray:
    """∇_θ μ_θ(s) = φ(s), shape (n, d_Θ, d_A)."""
    return policy.mean.features(s)


def gaussian_entropy(policy: GaussianAffinePolicy, s: np.ndarray) -> np.ndarray:
    """½·ln((2πe)^{d_A}·det Σ(s)) per state.

    Raises:
        PolicyError: If Σ(s) is singular
    """
    if policy.is_deterministic:
        raise PolicyError("degenerate Gaussian policy has no entropy")
    cov = policy.state_covariance(s)
    sign, logdet = np.linalg.slogdet(cov)
    if np.any(sign <= 0):
        raise PolicyError("singular action covariance has no entropy")
    return 0.5 * (policy.action_dim * np.log(2.0 * np.pi * np.e) + logdet)
