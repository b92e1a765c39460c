"""Return landscapes of the K-controller over a θ-grid, local maxima and basin labels."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from smoothclimb.core.executor import RolloutExecutor
from smoothclimb.core.mdp import Mdp, estimate_return
from smoothclimb.core.policy import k_controller
from smoothclimb.core.rng import RandomStream
from smoothclimb.utils.validators import ValidationError

logger = logging.getLogger(__name__)

GLOBAL = "global"
LOCAL = "local"


@dataclass(frozen=True)
class LandscapeRow:
    theta: float
    sigma_prime: float
    return_mean: float
    return_stderr: float
    n: int


def theta_grid(theta_min: float, theta_max: float, pitch: float) -> np.ndarray:
    """Inclusive grid from theta_min to theta_max with the given pitch."""
    if pitch <= 0 or theta_max <= theta_min:
        raise ValidationError(
            f"invalid θ-grid [{theta_min}, {theta_max}] with pitch {pitch}"
        )
    count = int(round((theta_max - theta_min) / pitch)) + 1
    return np.linspace(theta_min, theta_max, count)


def sweep_landscape(
    mdp: Mdp,
    x_target: float,
    thetas: np.ndarray,
    sigma_primes: list[float],
    n: int,
    rng: RandomStream,
    executor: RolloutExecutor | None = None,
) -> list[LandscapeRow]:
    """Return of the K-controller N(θ(x − x_target), σ′²) for every (σ′, θ).

    Every grid point reuses ``rng`` (common random numbers across θ and σ′), so the
    curves are smooth in θ and σ′ = 0 rows equal ``estimate_return`` of the
    deterministic controller with the same stream.
    """
    rows = []
    for sigma_prime in sigma_primes:
        for theta in thetas:
            policy = k_controller(float(theta), x_target, float(sigma_prime))
            estimate = estimate_return(mdp, policy, n, rng, executor)
            rows.append(
                LandscapeRow(
                    theta=float(theta),
                    sigma_prime=float(sigma_prime),
                    return_mean=estimate.mean,
                    return_stderr=estimate.stderr,
                    n=estimate.n_samples,
                )
            )
        logger.debug(f"Swept σ′={sigma_prime} over {len(thetas)} θ values")
    return rows


def count_local_maxima(values: np.ndarray, prominence: float = 0.0) -> np.ndarray:
    """Indices of strict local maxima of a curve, grid endpoints included.

    Peaks whose prominence is below ``prominence`` are discarded, which filters
    Monte-Carlo ripples out of estimated landscapes. Flat tops of two or more equal
    values are not strict maxima and are never reported.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.array([], dtype=int)
    floor = float(np.min(values)) - 1.0
    padded = np.concatenate([[floor], values, [floor]])
    peaks, _ = find_peaks(padded, prominence=max(prominence, 0.0), plateau_size=(1, 1))
    return peaks - 1


@dataclass(frozen=True, eq=False)
class BasinOracle:
    """Basins of attraction of the σ′ = 0 landscape on a dense θ-grid.

    Consecutive maxima are separated at the lowest grid point between them; a θ is
    labelled "global" when its basin belongs to the highest maximum.
    """

    thetas: np.ndarray
    values: np.ndarray
    peaks: np.ndarray

    @classmethod
    def from_landscape(
        cls, thetas: np.ndarray, values: np.ndarray, prominence: float = 0.0
    ) -> "BasinOracle":
        thetas = np.asarray(thetas, dtype=float)
        values = np.asarray(values, dtype=float)
        peaks = count_local_maxima(values, prominence)
        if peaks.size == 0:
            raise ValidationError("landscape has no local maximum")
        return cls(thetas=thetas, values=values, peaks=peaks)

    @classmethod
    def build(
        cls,
        mdp: Mdp,
        x_target: float,
        theta_min: float,
        theta_max: float,
        pitch: float,
        n: int,
        rng: RandomStream,
        prominence_se: float = 2.0,
        executor: RolloutExecutor | None = None,
    ) -> "BasinOracle":
        """Estimate the deterministic landscape and derive its basins."""
        thetas = theta_grid(theta_min, theta_max, pitch)
        logger.info(f"Building basin oracle on {len(thetas)} θ values (n={n})")
        rows = sweep_landscape(mdp, x_target, thetas, [0.0], n, rng, executor)
        values = np.array([r.return_mean for r in rows])
        stderr = float(np.median([r.return_stderr for r in rows]))
        return cls.from_landscape(thetas, values, prominence_se * stderr)

    @property
    def global_peak(self) -> int:
        return int(self.peaks[np.argmax(self.values[self.peaks])])

    def _boundaries(self) -> list[int]:
        bounds = []
        for left, right in zip(self.peaks, self.peaks[1:]):
            bounds.append(int(left + np.argmin(self.values[left : right + 1])))
        return bounds

    def peak_of(self, theta: float) -> int:
        """Grid index of the maximum whose basin contains θ."""
        index = int(np.argmin(np.abs(self.thetas - theta)))
        position = int(np.searchsorted(self._boundaries(), index, side="left"))
        return int(self.peaks[position])

    def label(self, theta: float) -> str:
        """'global' or 'local' basin label of θ."""
        return GLOBAL if self.peak_of(theta) == self.global_peak else LOCAL
