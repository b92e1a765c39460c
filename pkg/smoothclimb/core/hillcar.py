"""Car-in-a-valley environment: valley profile, clamped noisy Euler dynamics, depth reward."""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar

from smoothclimb.core.mdp import Mdp
from smoothclimb.utils.validators import ValidationError

logger = logging.getLogger(__name__)

# Grid used to locate critical points of the valley
PROFILE_GRID_POINTS = 9001
TARGET_TOLERANCE = 1e-8


@dataclass(frozen=True)
class CarParams:
    """Physical constants and bounds of the car."""

    mass: float = 0.5
    gravity: float = 9.81
    damping: float = 0.65
    dt: float = 0.1
    action_min: float = -10.0
    action_max: float = 10.0
    x_min: float = -4.0
    x_max: float = 5.0
    x_initial: float = -3.0
    noise_std: float = 1.0              # 0 disables action noise
    euler_substeps: int = 1
    discount: float = 0.99
    horizon: int = 100

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Raise ValidationError on non-physical values or unordered bounds."""
        for name in ("mass", "gravity", "dt"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.damping < 0:
            raise ValidationError(f"damping must be >= 0, got {self.damping}")
        if self.noise_std < 0:
            raise ValidationError(f"noise_std must be >= 0, got {self.noise_std}")
        if self.action_min >= self.action_max:
            raise ValidationError("action bounds must satisfy action_min < action_max")
        if self.x_min >= self.x_max:
            raise ValidationError("position bounds must satisfy x_min < x_max")
        if not self.x_min <= self.x_initial <= self.x_max:
            raise ValidationError(
                f"x_initial {self.x_initial} outside [{self.x_min}, {self.x_max}]"
            )
        if self.euler_substeps < 1:
            raise ValidationError(f"euler_substeps must be >= 1, got {self.euler_substeps}")
        if not 0.0 <= self.discount < 1.0:
            raise ValidationError(f"discount must lie in [0, 1), got {self.discount}")
        if self.horizon < 1:
            raise ValidationError(f"horizon must be >= 1, got {self.horizon}")


@dataclass(frozen=True)
class HillProfile:
    """Polynomial valley h with exact derivatives and its global minimizer.

    Construct through ``double_well`` or ``from_coefficients``; both locate
    ``x_target`` and check the two-floors-one-peak topology on [x_min, x_max].
    """

    h: Polynomial
    x_min: float
    x_max: float
    x_initial: float
    dh: Polynomial = field(init=False, repr=False)
    d2h: Polynomial = field(init=False, repr=False)
    x_target: float = field(init=False)
    x_peak: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dh", self.h.deriv(1))
        object.__setattr__(self, "d2h", self.h.deriv(2))
        peak, target = _locate_critical_points(self)
        object.__setattr__(self, "x_peak", peak)
        object.__setattr__(self, "x_target", target)
        logger.debug(f"Valley profile: peak at {peak:.6f}, x_target at {target:.8f}")

    @classmethod
    def double_well(
        cls,
        scale: float = 0.025,
        left: float = -3.0,
        right: float = 2.0,
        tilt: float = 0.1,
        params: CarParams | None = None,
    ) -> "HillProfile":
        """h(x) = scale·(x − left)²·(x − right)² − tilt·x."""
        params = params or CarParams()
        h = scale * Polynomial.fromroots([left, left, right, right]) - Polynomial([0.0, tilt])
        return cls(h=h, x_min=params.x_min, x_max=params.x_max, x_initial=params.x_initial)

    @classmethod
    def from_coefficients(
        cls, coefficients: list[float], params: CarParams | None = None
    ) -> "HillProfile":
        """Valley from power-series coefficients c₀ + c₁x + c₂x² + …"""
        params = params or CarParams()
        return cls(
            h=Polynomial(coefficients),
            x_min=params.x_min,
            x_max=params.x_max,
            x_initial=params.x_initial,
        )

    @property
    def coefficients(self) -> list[float]:
        return [float(c) for c in self.h.coef]

    def height_range(self) -> tuple[float, float]:
        """(min h, max h) over the position interval."""
        grid = np.linspace(self.x_min, self.x_max, PROFILE_GRID_POINTS)
        values = self.h(grid)
        return float(min(values.min(), self.h(self.x_target))), float(values.max())


def _locate_critical_points(profile: HillProfile) -> tuple[float, float]:
    """Return (peak, global minimizer) after checking the double-well topology.

    Raises:
        ValidationError: If h does not have exactly two strict local minima
            separated by one strict local maximum, or if x_initial already sits in
            the basin of the global minimum
    """
    grid = np.linspace(profile.x_min, profile.x_max, PROFILE_GRID_POINTS)
    slope = np.sign(profile.dh(grid))
    crossings = np.nonzero(slope[:-1] * slope[1:] < 0)[0]
    # h′ vanishing exactly on a grid node, with a sign change across it
    on_node = np.nonzero((slope[1:-1] == 0) & (slope[:-2] * slope[2:] < 0))[0] + 1
    roots = sorted(
        [(float(_bisect_root(profile.dh, grid[i], grid[i + 1])), slope[i]) for i in crossings]
        + [(float(grid[j]), slope[j - 1]) for j in on_node]
    )
    kinds = ["min" if before < 0 else "max" for _, before in roots]
    if kinds != ["min", "max", "min"]:
        raise ValidationError(
            f"valley profile must have two floors separated by one peak, "
            f"found critical points {kinds}"
        )

    left_min, peak, right_min = (root for root, _ in roots)

    # Global minimizer: best grid point, refined by golden-section search
    best = int(np.argmin(profile.h(grid)))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    if lo < grid[best] < hi:
        result = minimize_scalar(
            profile.h, bracket=(lo, grid[best], hi), method="golden",
            options={"xtol": TARGET_TOLERANCE},
        )
        target = float(np.clip(result.x, profile.x_min, profile.x_max))
    else:
        target = float(grid[best])

    if not (abs(target - left_min) < 1e-4 or abs(target - right_min) < 1e-4):
        raise ValidationError("global minimum of the valley lies on the boundary")
    initial_floor = left_min if profile.x_initial < peak else right_min
    if abs(initial_floor - target) < 1e-4:
        raise ValidationError("x_initial must start on the floor that is not the global minimum")

    return peak, target


def _bisect_root(fn: Polynomial, lo: float, hi: float, iterations: int = 80) -> float:
    f_lo = fn(lo)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def profile_eval(profile: HillProfile, x):
    """Evaluate (h, h′, h″) at x (scalar or array)."""
    return profile.h(x), profile.dh(x), profile.d2h(x)


def acceleration(
    x: np.ndarray, v: np.ndarray, force: np.ndarray, params: CarParams, profile: HillProfile
) -> np.ndarray:
    """Acceleration v̇ for a force already clamped to the action bounds.

    Without force and damping the motion conserves ``mechanical_energy``.
    """
    _, dh, d2h = profile_eval(profile, x)
    slope_factor = 1.0 + dh**2
    return (
        force / (params.mass * slope_factor)
        - params.gravity * dh / slope_factor
        - v**2 * dh * d2h / slope_factor
        - params.damping * v * np.abs(v)
    )


def step(
    state: np.ndarray,
    action: np.ndarray,
    params: CarParams,
    profile: HillProfile,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Advance a batch of cars by one discretization time Δ.

    Args:
        state: Positions and speeds, shape (n, 2) (a single (2,) state is accepted)
        action: Forces, shape (n,) or (n, 1)
        params: Car constants; noise_std=0 disables the action noise
        profile: Valley profile
        rng: Environment generator (unused when noise is disabled)

    Returns:
        Next states, shape matching ``state``
    """
    state = np.asarray(state, dtype=float)
    single = state.ndim == 1
    states = np.atleast_2d(state)
    x = states[:, 0].copy()
    v = states[:, 1].copy()

    force = np.asarray(action, dtype=float).reshape(x.shape[0], -1)[:, 0]
    if params.noise_std > 0:
        force = force + params.noise_std * rng.standard_normal(x.shape[0])
    force = np.clip(force, params.action_min, params.action_max)

    h = params.dt / params.euler_substeps
    for _ in range(params.euler_substeps):
        v_dot = acceleration(x, v, force, params, profile)
        x = np.clip(x + h * v, params.x_min, params.x_max)
        v = v + h * v_dot

    next_states = np.stack([x, v], axis=-1)
    return next_states[0] if single else next_states


def mechanical_energy(state: np.ndarray, params: CarParams, profile: HillProfile) -> np.ndarray:
    """½m v²(1 + h′(x)²) + m g h(x) for a batch of states (n, 2)."""
    states = np.atleast_2d(np.asarray(state, dtype=float))
    x, v = states[:, 0], states[:, 1]
    h, dh, _ = profile_eval(profile, x)
    return 0.5 * params.mass * v**2 * (1.0 + dh**2) + params.mass * params.gravity * h


def make_hillcar_mdp(params: CarParams, profile: HillProfile) -> Mdp:
    """Wrap the car dynamics as an Mdp starting at rest at x_initial."""
    low, high = profile.height_range()
    initial = np.array([params.x_initial, 0.0])

    def initial_states(n: int, rng: np.random.Generator) -> np.ndarray:
        return np.tile(initial, (n, 1))

    def transition(states: np.ndarray, actions: np.ndarray, rng: np.random.Generator):
        return step(states, actions, params, profile, rng)

    def reward(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        return -profile.h(states[:, 0])

    return Mdp(
        initial_state_sampler=initial_states,
        transition_sampler=transition,
        reward_fn=reward,
        discount=params.discount,
        horizon=params.horizon,
        reward_bound=max(abs(low), abs(high)),
        state_dim=2,
        action_dim=1,
    )
