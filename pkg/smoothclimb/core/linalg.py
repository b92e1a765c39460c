"""Batched Gaussian and covariance helpers shared by policies and continuations."""

import numpy as np

PSD_TOLERANCE = 1e-10


def symmetrize(matrices: np.ndarray) -> np.ndarray:
    """Return (M + Mᵀ)/2 over the last two axes."""
    return 0.5 * (matrices + np.swapaxes(matrices, -1, -2))


def is_psd(matrices: np.ndarray, tol: float = PSD_TOLERANCE) -> bool:
    """Check that every matrix in a batch is symmetric positive-semidefinite.

    The tolerance is relative to the largest eigenvalue magnitude in the batch.
    """
    matrices = np.asarray(matrices, dtype=float)
    if not np.all(np.isfinite(matrices)):
        return False
    if not np.allclose(matrices, np.swapaxes(matrices, -1, -2), atol=tol, rtol=1e-8):
        return False
    eigenvalues = np.linalg.eigvalsh(symmetrize(matrices))
    scale = max(1.0, float(np.max(np.abs(eigenvalues), initial=0.0)))
    return bool(np.all(eigenvalues >= -tol * scale))


def is_loewner_geq(a: np.ndarray, b: np.ndarray, tol: float = PSD_TOLERANCE) -> bool:
    """Loewner order test a ⪰ b (a − b is PSD), batched over leading axes."""
    return is_psd(np.asarray(a) - np.asarray(b), tol=tol)


def psd_sqrt(matrices: np.ndarray) -> np.ndarray:
    """Symmetric square root L of a batch of PSD matrices, L Lᵀ = M.

    Works for singular matrices; a zero matrix maps to a zero root, so sampling
    ``mean + L z`` reproduces ``mean`` exactly.
    """
    eigenvalues, eigenvectors = np.linalg.eigh(symmetrize(matrices))
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (eigenvectors * roots[..., None, :]) @ np.swapaxes(eigenvectors, -1, -2)


def sandwich(phi: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Compute φᵀ Λ φ for batches φ (n, d_Θ, d_A) and Λ (n, d_Θ, d_Θ)."""
    return np.einsum("nki,nkl,nlj->nij", phi, inner, phi)


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log-density of N(mean, cov) at x with numpy broadcasting.

    Args:
        x: Points, shape (..., d)
        mean: Means, broadcastable to x
        cov: Covariances, shape broadcastable to (..., d, d); must be nonsingular

    Returns:
        Log-densities with shape x.shape[:-1]

    Raises:
        numpy.linalg.LinAlgError: If a covariance is singular
    """
    diff = np.asarray(x, dtype=float) - np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = diff.shape[-1]
    sign, logdet = np.linalg.slogdet(cov)
    if np.any(sign <= 0):
        raise np.linalg.LinAlgError("covariance is singular or not positive definite")
    cov_b = np.broadcast_to(cov, diff.shape[:-1] + (d, d))
    solved = np.linalg.solve(cov_b, diff[..., None])[..., 0]
    mahalanobis = np.sum(diff * solved, axis=-1)
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + mahalanobis)
