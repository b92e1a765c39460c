"""Continuation of the return, covariance functions Λ and mirror-policy constructors.

The continuation perturbs the policy parameters independently at every timestep,
θ_t ~ N(θ, Λ(h_t)), and averages the discounted return. A mirror policy is a policy
whose plain return equals that continuation for every θ; for affine means and
Gaussian perturbations it has a closed form.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import logsumexp

from smoothclimb.core.executor import EstimationError, RolloutExecutor
from smoothclimb.core.linalg import gaussian_logpdf, is_psd, psd_sqrt, sandwich, symmetrize
from smoothclimb.core.mdp import (
    History,
    Mdp,
    ReturnEstimate,
    estimate_returns_with,
)
from smoothclimb.core.policy import (
    AffineMean,
    DeterministicAffinePolicy,
    GaussianAffinePolicy,
    HistoryCovGaussianPolicy,
    Policy,
    PolicyError,
    StateFn,
)
from smoothclimb.core.rng import PERTURB, POLICY, RandomStream, RolloutStreams

logger = logging.getLogger(__name__)

RADIAL_EPSILON = 1e-6


class CovarianceError(EstimationError):
    """Raised for non-PSD continuation covariances or rank-deficient features."""
    pass


def ensure_psd(matrices: np.ndarray, what: str) -> np.ndarray:
    if not is_psd(matrices):
        raise CovarianceError(f"{what} is not symmetric positive-semidefinite")
    return matrices


class CovarianceFn(ABC):
    """Λ: history → (d_Θ × d_Θ) PSD matrix, evaluated for a batch of histories."""

    param_dim: int

    variant: str = "custom"

    @property
    def state_only(self) -> bool:
        """True when Λ(h) depends on the last state of h only."""
        return True

    @property
    @abstractmethod
    def is_zero(self) -> bool:
        """True when Λ ≡ 0."""

    def at_states(self, states: np.ndarray) -> np.ndarray:
        """Λ(s) for a batch of states (n, d_Θ, d_Θ); state-only functions only."""
        raise CovarianceError(f"{self.variant} covariance depends on the whole history")

    def evaluate(self, history: History) -> np.ndarray:
        """Λ(h) for a batch of histories, shape (n, d_Θ, d_Θ)."""
        return self.at_states(history.last_state)

    def scaled(self, factor: float) -> "CovarianceFn":
        return ScaledCovariance(self, float(factor))


@dataclass(frozen=True, eq=False)
class ConstantParamCovariance(CovarianceFn):
    """Λ(h) = Λ₀."""

    matrix: np.ndarray
    variant: str = "constant"

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        ensure_psd(matrix, "constant continuation covariance")
        object.__setattr__(self, "matrix", matrix)

    @property
    def param_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    def at_states(self, states: np.ndarray) -> np.ndarray:
        n = np.atleast_2d(states).shape[0]
        return np.broadcast_to(self.matrix, (n,) + self.matrix.shape).copy()


@dataclass(frozen=True, eq=False)
class StateRadialCovariance(CovarianceFn):
    """Λ(s) = σ′²_ref / max((x − x_target)², ε) · I.

    Under a K-controller this makes the mirror policy's action variance σ′²_ref at
    every position farther than √ε from the target.
    """

    sigma_ref: float
    x_target: float
    eps: float = RADIAL_EPSILON
    param_dim: int = 1
    variant: str = "state_radial"

    def __post_init__(self):
        if self.sigma_ref < 0:
            raise CovarianceError(f"sigma_ref must be >= 0, got {self.sigma_ref}")
        if self.eps <= 0:
            raise CovarianceError(f"eps must be positive, got {self.eps}")

    @property
    def is_zero(self) -> bool:
        return self.sigma_ref == 0

    def at_states(self, states: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(states)[:, 0]
        lam = self.sigma_ref**2 / np.maximum((x - self.x_target) ** 2, self.eps)
        return lam[:, None, None] * np.eye(self.param_dim)


@dataclass(frozen=True, eq=False)
class TimeDecayCovariance(CovarianceFn):
    """Λ(h_t) = Λ₀·β^t, t the number of actions in the history."""

    matrix: np.ndarray
    beta: float
    variant: str = "time_decay"

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        ensure_psd(matrix, "time-decay base covariance")
        if not 0 < self.beta <= 1:
            raise CovarianceError(f"beta must lie in (0, 1], got {self.beta}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def param_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def state_only(self) -> bool:
        return self.beta == 1

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    def at_states(self, states: np.ndarray) -> np.ndarray:
        if self.beta != 1:
            return super().at_states(states)
        n = np.atleast_2d(states).shape[0]
        return np.broadcast_to(self.matrix, (n,) + self.matrix.shape).copy()

    def evaluate(self, history: History) -> np.ndarray:
        return np.broadcast_to(
            self.matrix * self.beta**history.t, (history.n,) + self.matrix.shape
        ).copy()


@dataclass(frozen=True, eq=False)
class ScaledCovariance(CovarianceFn):
    """h ↦ factor·Λ(h)."""

    base: CovarianceFn
    factor: float

    def __post_init__(self):
        if self.factor < 0:
            raise CovarianceError(f"covariance scale must be >= 0, got {self.factor}")

    @property
    def variant(self) -> str:
        return self.base.variant

    @property
    def param_dim(self) -> int:
        return self.base.param_dim

    @property
    def state_only(self) -> bool:
        return self.base.state_only

    @property
    def is_zero(self) -> bool:
        return self.factor == 0 or self.base.is_zero

    def at_states(self, states: np.ndarray) -> np.ndarray:
        return self.factor * self.base.at_states(states)

    def evaluate(self, history: History) -> np.ndarray:
        return self.factor * self.base.evaluate(history)

    def scaled(self, factor: float) -> CovarianceFn:
        return ScaledCovariance(self.base, self.factor * float(factor))


@dataclass(frozen=True, eq=False)
class ContinuationDist:
    """Gaussian q(θ_t | θ, Λ(h_t)) for a batch of histories."""

    theta: np.ndarray
    covariance: np.ndarray

    def sample(self, rng: np.random.Generator, size: tuple[int, ...] = ()) -> np.ndarray:
        """Draw parameters of shape size + (n, d_Θ)."""
        cov = ensure_psd(np.asarray(self.covariance, dtype=float), "continuation covariance")
        root = psd_sqrt(cov)
        noise = rng.standard_normal(size + cov.shape[:-1])
        return self.theta + np.einsum("nij,...nj->...ni", root, noise)


@dataclass(frozen=True)
class MirrorOrigin:
    """Provenance of a mirror policy: original policy, kernel family and Λ."""

    original: Any
    covariance: CovarianceFn
    family: str = "gaussian"


@dataclass(frozen=True, eq=False)
class MirrorCovariance:
    """Σ′(s) = φ(s)ᵀ Λ(s) φ(s) + Σ(s), with Σ ≡ 0 for a deterministic original."""

    mean: AffineMean
    lam: CovarianceFn
    base: StateFn | None = None

    def __call__(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        lam = ensure_psd(self.lam.at_states(states), "continuation covariance")
        cov = sandwich(self.mean.features(states), lam)
        if self.base is not None:
            cov = cov + np.asarray(self.base(states), dtype=float).reshape(cov.shape)
        return cov


@dataclass(frozen=True, eq=False)
class HistoryMirrorCovariance:
    """Σ′(h) = φ(s)ᵀ Λ(h) φ(s), s the last state of h."""

    mean: AffineMean
    lam: CovarianceFn

    def __call__(self, history: History) -> np.ndarray:
        lam = ensure_psd(self.lam.evaluate(history), "continuation covariance")
        return sandwich(self.mean.features(history.last_state), lam)


def _check_dims(policy: Policy, lam: CovarianceFn) -> None:
    if lam.param_dim != policy.param_dim:
        raise CovarianceError(
            f"covariance is {lam.param_dim}-dimensional but the policy has "
            f"{policy.param_dim} parameters"
        )


def estimate_continuation(
    mdp: Mdp,
    original: Policy,
    theta: np.ndarray,
    lam: CovarianceFn,
    n: int,
    rng: RandomStream,
    executor: RolloutExecutor | None = None,
) -> ReturnEstimate:
    """Monte-Carlo continuation of the return of ``original`` at θ under Λ.

    At every timestep of every rollout θ_t ~ N(θ, Λ(h_t)) is drawn from the
    perturbation sub-stream and the action is taken by the original policy at θ_t.
    Environment and action noise use the same sub-streams as ``estimate_return``,
    so Λ ≡ 0 reproduces the original return exactly.

    Raises:
        CovarianceError: If Λ returns a non-PSD matrix
    """
    _check_dims(original, lam)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))

    def act(history: History, streams: RolloutStreams) -> np.ndarray:
        dist = ContinuationDist(theta, lam.evaluate(history))
        thetas = dist.sample(streams.perturb)
        return original.sample_action(history, streams.policy, theta=thetas)

    return estimate_returns_with(
        mdp, act, n, rng, executor, description=f"continuation estimate ({lam.variant})"
    )


def mirror_of_deterministic(
    original: DeterministicAffinePolicy, lam: CovarianceFn
) -> GaussianAffinePolicy:
    """Markov mirror N(μ_θ(s), φ(s)ᵀΛ(s)φ(s)) of an affine deterministic policy.

    Raises:
        CovarianceError: If Λ depends on more than the last state
    """
    if not original.is_deterministic:
        raise PolicyError("mirror_of_deterministic expects a deterministic original")
    if not lam.state_only:
        raise CovarianceError("state-only mirror requested for a history-dependent covariance")
    _check_dims(original, lam)
    return GaussianAffinePolicy(
        mean=original.mean,
        covariance_fn=MirrorCovariance(original.mean, lam),
        theta=original.theta,
        degenerate=lam.is_zero,
        origin=MirrorOrigin(original, lam),
    )


def mirror_of_deterministic_history(
    original: DeterministicAffinePolicy, lam: CovarianceFn
) -> HistoryCovGaussianPolicy:
    """History-dependent mirror N(μ_θ(s), φ(s)ᵀΛ(h)φ(s)) of a deterministic affine policy."""
    if not original.is_deterministic:
        raise PolicyError("mirror_of_deterministic_history expects a deterministic original")
    _check_dims(original, lam)
    return HistoryCovGaussianPolicy(
        mean=original.mean,
        covariance_fn=HistoryMirrorCovariance(original.mean, lam),
        theta=original.theta,
        degenerate=lam.is_zero,
        origin=MirrorOrigin(original, lam),
    )


def mirror_of_gaussian(original: GaussianAffinePolicy, lam: CovarianceFn) -> GaussianAffinePolicy:
    """Mirror N(μ_θ(s), Σ(s) + φ(s)ᵀΛ(s)φ(s)) of an affine Gaussian policy.

    Exact because the original covariance does not depend on θ.
    """
    if not isinstance(original, GaussianAffinePolicy):
        raise PolicyError("mirror_of_gaussian expects a GaussianAffinePolicy original")
    if not lam.state_only:
        raise CovarianceError("state-only mirror requested for a history-dependent covariance")
    _check_dims(original, lam)
    return GaussianAffinePolicy(
        mean=original.mean,
        covariance_fn=MirrorCovariance(original.mean, lam, base=original.state_covariance),
        theta=original.theta,
        degenerate=original.degenerate and lam.is_zero,
        origin=MirrorOrigin(original, lam),
    )


def _perturbed_means(
    original: Policy, theta: np.ndarray, lam: CovarianceFn, h: History, m: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Means μ_{θ_j}(s) for θ_j ~ N(θ, Λ(h)), shape (m, n, d_A)."""
    thetas = ContinuationDist(np.atleast_1d(theta), lam.evaluate(h)).sample(rng, size=(m,))
    phi = original.mean.features(h.last_state)
    return np.einsum("nkd,mnk->mnd", phi, thetas) + original.mean.offset(h.last_state)


def sample_mirror_mixture(
    original: Policy,
    theta: np.ndarray,
    lam: CovarianceFn,
    h: History,
    m: int,
    rng: RandomStream,
) -> np.ndarray:
    """Draw m actions per history from the mixture ∫ η_{θ'}(·|h) q(θ'|θ, Λ(h)) dθ'.

    Returns:
        Actions, shape (m, n, d_A)
    """
    _check_dims(original, lam)
    means = _perturbed_means(original, theta, lam, h, m, rng.child(PERTURB).generator())
    if original.is_deterministic:
        return means
    root = psd_sqrt(original.action_covariance(h))
    noise = rng.child(POLICY).generator().standard_normal(means.shape)
    return means + np.einsum("nij,mnj->mni", root, noise)


def mirror_mixture_logdensity(
    original: Policy,
    theta: np.ndarray,
    lam: CovarianceFn,
    h: History,
    a: np.ndarray,
    m: int,
    rng: RandomStream,
) -> np.ndarray:
    """Monte-Carlo log of (1/m)·Σ_j η_{θ_j}(a|h) with θ_j ~ N(θ, Λ(h)), shape (n,).

    Raises:
        PolicyError: If the original policy is deterministic
    """
    if original.is_deterministic:
        raise PolicyError("deterministic original has no mixture density; use the closed forms")
    _check_dims(original, lam)
    if lam.is_zero:
        return original.log_density(h, a, theta=np.atleast_1d(theta))
    means = _perturbed_means(original, theta, lam, h, m, rng.child(PERTURB).generator())
    a = np.asarray(a, dtype=float).reshape(means.shape[1:])
    try:
        log_densities = gaussian_logpdf(a[None], means, original.action_covariance(h))
    except np.linalg.LinAlgError as e:
        raise PolicyError(f"singular action covariance: {e}") from e
    return logsumexp(log_densities, axis=0) - np.log(m)


def min_norm_continuation_cov(phi: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Minimum-Frobenius-norm Λ with φᵀΛφ = target.

    Λ = φ(φᵀφ)⁻¹ target (φᵀφ)⁻¹φᵀ.

    Args:
        phi: Features, shape (n, d_Θ, d_A)
        target: PSD matrices, shape (n, d_A, d_A)

    Raises:
        CovarianceError: If d_A > d_Θ or some φ is rank-deficient
    """
    phi = np.asarray(phi, dtype=float)
    target = np.asarray(target, dtype=float)
    _, param_dim, action_dim = phi.shape
    if action_dim > param_dim:
        raise CovarianceError(f"cannot recover Λ with d_A={action_dim} > d_Θ={param_dim}")
    if np.any(np.linalg.matrix_rank(phi) < action_dim):
        raise CovarianceError("feature matrix φ(s) is rank-deficient")
    # pinv(φ) = (φᵀφ)⁻¹φᵀ for full column rank, computed through the SVD
    left_inverse = np.linalg.pinv(phi)
    return symmetrize(np.swapaxes(left_inverse, -1, -2) @ target @ left_inverse)


def recover_continuation_cov(
    mirror: GaussianAffinePolicy,
    s: np.ndarray,
    original_cov: StateFn | np.ndarray | None = None,
) -> np.ndarray:
    """Recover a Λ(s) for which ``mirror`` mirrors an affine original policy.

    Without ``original_cov`` the original is the deterministic policy μ_θ and
    φᵀΛφ = Σ′. With ``original_cov`` = Σ ⪯ Σ′ the original is Gaussian N(μ_θ, Σ)
    and φᵀΛφ = Σ′ − Σ.

    Returns:
        Λ(s), shape (n, d_Θ, d_Θ)

    Raises:
        CovarianceError: If d_A > d_Θ, φ(s) is rank-deficient or Σ ⪯ Σ′ fails
    """
    states = np.atleast_2d(s)
    sigma_prime = mirror.state_covariance(states)
    target = sigma_prime
    if original_cov is not None:
        sigma = original_cov(states) if callable(original_cov) else original_cov
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), sigma_prime.shape)
        target = sigma_prime - sigma
        ensure_psd(target, "Σ′ − Σ (the original covariance must satisfy Σ ⪯ Σ′)")
    return min_norm_continuation_cov(mirror.mean.features(states), target)


def compose_continuations(lam: CovarianceFn) -> CovarianceFn:
    """h ↦ 2·Λ(h): two successive N(·, Λ) perturbations make one N(·, 2Λ)."""
    return lam.scaled(2.0)
