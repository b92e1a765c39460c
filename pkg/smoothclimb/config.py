"""Experiment configuration: dataclasses, JSON parsing with field paths, hashing."""

import dataclasses
import hashlib
import json
import types
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Union, get_args, get_origin, get_type_hints

import numpy as np

from smoothclimb.core.continuation import (
    ConstantParamCovariance,
    CovarianceFn,
    StateRadialCovariance,
    TimeDecayCovariance,
)
from smoothclimb.core.hillcar import CarParams, HillProfile
from smoothclimb.core.optimize import METHODS, OptimizerConfig, Schedule
from smoothclimb.utils.validators import ValidationError

# Top-level fields left out of config_hash
UNHASHED_FIELDS = ("output_dir", "threads")


@dataclass
class ProfileConfig:
    """Valley h(x) = scale·(x − left)²(x − right)² − tilt·x, or raw coefficients."""

    scale: float = 0.025
    left: float = -3.0
    right: float = 2.0
    tilt: float = 0.1
    coefficients: list[float] | None = None     # c₀, c₁, … overrides the double well

    def build(self, car: CarParams) -> HillProfile:
        if self.coefficients is not None:
            return HillProfile.from_coefficients(self.coefficients, car)
        return HillProfile.double_well(self.scale, self.left, self.right, self.tilt, car)


@dataclass
class EnvironmentConfig:
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    car: CarParams = field(default_factory=CarParams)


@dataclass
class PolicyConfig:
    """K-controller a = θ·(x − x_target); theta0 is the optimizers' starting point."""

    kind: Literal["k_controller"] = "k_controller"
    theta0: float = 0.5

    def validate(self) -> None:
        if not np.isfinite(self.theta0):
            raise ValidationError("theta0: must be finite")


@dataclass
class CovarianceConfig:
    """Base continuation covariance Λ scaled by the schedule."""

    kind: Literal["state_radial", "constant", "time_decay"] = "state_radial"
    sigma_ref: float = 1.0              # state_radial: mirror action std at scale 1
    value: float = 0.05                 # constant / time_decay: Λ₀ = value·I
    beta: float = 0.97                  # time_decay factor per step
    eps: float = 1e-6                   # state_radial regularizer

    def validate(self) -> None:
        if self.sigma_ref < 0:
            raise ValidationError("sigma_ref: must be >= 0")
        if self.value < 0:
            raise ValidationError("value: must be >= 0")
        if not 0 < self.beta <= 1:
            raise ValidationError("beta: must lie in (0, 1]")
        if self.eps <= 0:
            raise ValidationError("eps: must be positive")

    def build(self, x_target: float, param_dim: int = 1) -> CovarianceFn:
        if self.kind == "state_radial":
            return StateRadialCovariance(self.sigma_ref, x_target, self.eps, param_dim)
        matrix = self.value * np.eye(param_dim)
        if self.kind == "constant":
            return ConstantParamCovariance(matrix)
        return TimeDecayCovariance(matrix, self.beta)


@dataclass
class ScheduleConfig:
    kind: Literal["geometric", "explicit"] = "geometric"
    scale_0: float = 64.0
    decay: float = 0.8
    stages: int = 20
    scales: list[float] | None = None   # explicit schedules only

    def validate(self) -> None:
        self.build()

    def build(self) -> Schedule:
        if self.kind == "explicit":
            if self.scales is None:
                raise ValidationError("scales: required for explicit schedules")
            return Schedule.explicit(self.scales)
        if self.scale_0 <= 0:
            raise ValidationError("scale_0: must be positive")
        return Schedule.geometric(self.scale_0, self.decay, self.stages)


@dataclass
class SweepConfig:
    theta_min: float = -10.0
    theta_max: float = 2.0
    theta_step: float = 0.25
    sigma_primes: list[float] = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 4.0])
    n_rollouts: int = 1000

    def validate(self) -> None:
        if self.theta_step <= 0 or self.theta_max <= self.theta_min:
            raise ValidationError("theta grid: need theta_min < theta_max and theta_step > 0")
        if not self.sigma_primes or any(s < 0 for s in self.sigma_primes):
            raise ValidationError("sigma_primes: need a non-empty list of values >= 0")
        if self.n_rollouts < 2:
            raise ValidationError("n_rollouts: must be >= 2")


@dataclass
class BasinConfig:
    """Dense σ′ = 0 landscape used to label final parameters."""

    theta_min: float = -10.0
    theta_max: float = 2.0
    pitch: float = 0.01
    n_rollouts: int = 200
    prominence_se: float = 2.0

    def validate(self) -> None:
        if self.pitch <= 0 or self.theta_max <= self.theta_min:
            raise ValidationError("grid: need theta_min < theta_max and pitch > 0")
        if self.n_rollouts < 2:
            raise ValidationError("n_rollouts: must be >= 2")
        if self.prominence_se < 0:
            raise ValidationError("prominence_se: must be >= 0")


@dataclass
class VerifyConfig:
    """Sample sizes and tolerances of the identity suite."""

    thetas: list[float] = field(
        default_factory=lambda: [-8.0, -6.0, -4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.5]
    )
    composition_thetas: list[float] = field(default_factory=lambda: [-6.0, -2.0, -0.5, 0.0, 1.0])
    check_positions: list[float] = field(default_factory=lambda: [-3.5, -2.0, 0.0, 1.0, 4.0])
    n_rollouts: int = 10000
    mixture_samples: int = 10000
    tolerance_se: float = 3.0
    moment_tolerance_se: float = 4.0
    ks_alpha: float = 0.01
    roundtrip_instances: int = 100
    roundtrip_max_dim: int = 8
    roundtrip_tolerance: float = 1e-10
    constant_lambda: float = 0.05
    radial_sigma: float = 1.0
    time_decay_lambda: float = 0.05
    time_decay_beta: float = 0.97
    gaussian_sigma: float = 0.5
    lambda_mismatch: float = 1.0        # multiplies Λ on the continuation side only

    def validate(self) -> None:
        if not self.thetas or not self.composition_thetas or not self.check_positions:
            raise ValidationError("thetas, composition_thetas, check_positions: must be non-empty")
        if self.n_rollouts < 2 or self.mixture_samples < 2:
            raise ValidationError("n_rollouts, mixture_samples: must be >= 2")
        if not 0 < self.ks_alpha < 1:
            raise ValidationError("ks_alpha: must lie in (0, 1)")
        if self.roundtrip_instances < 1 or self.roundtrip_max_dim < 1:
            raise ValidationError("roundtrip_instances, roundtrip_max_dim: must be >= 1")
        if min(self.constant_lambda, self.radial_sigma, self.time_decay_lambda) <= 0:
            raise ValidationError("continuation sizes: must be positive")
        if not 0 < self.time_decay_beta <= 1:
            raise ValidationError("time_decay_beta: must lie in (0, 1]")
        if self.gaussian_sigma <= 0 or self.lambda_mismatch <= 0:
            raise ValidationError("gaussian_sigma, lambda_mismatch: must be positive")


@dataclass
class CompareConfig:
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    methods: list[str] = field(default_factory=lambda: ["continuation", "deterministic"])

    def validate(self) -> None:
        if not self.seeds or any(s < 0 for s in self.seeds):
            raise ValidationError("seeds: need a non-empty list of non-negative seeds")
        unknown = set(self.methods) - set(METHODS)
        if not self.methods or unknown:
            raise ValidationError(f"methods: must be a non-empty subset of {list(METHODS)}")


@dataclass
class ExperimentConfig:
    """Complete configuration of one experiment run.

    The master ``seed`` drives every random stream; ``optimizer.seed`` is replaced by
    it (or by the per-run seed of ``compare``) when a command runs.
    """

    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    covariance: CovarianceConfig = field(default_factory=CovarianceConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    basin: BasinConfig = field(default_factory=BasinConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    method: Literal["continuation", "entropy_reg", "deterministic"] = "continuation"
    seed: int = 0
    output_dir: str = "output"
    threads: int = 1
    block_size: int = 1000

    def validate(self) -> None:
        if self.seed < 0:
            raise ValidationError("seed: must be >= 0")
        if self.threads < 1:
            raise ValidationError("threads: must be >= 1")
        if self.block_size < 1:
            raise ValidationError("block_size: must be >= 1")

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)


def _type_name(hint: Any) -> str:
    return getattr(hint, "__name__", str(hint))


def _coerce(value: Any, hint: Any, path: str) -> Any:
    """Convert a JSON value to the annotated type or raise with the field path."""
    origin = get_origin(hint)

    if dataclasses.is_dataclass(hint):
        return _build(hint, value, path)

    if origin in (Union, types.UnionType):
        args = get_args(hint)
        if value is None:
            if type(None) in args:
                return None
            raise ValidationError(f"{path}: must not be null")
        non_null = [a for a in args if a is not type(None)]
        return _coerce(value, non_null[0], path)

    if origin is Literal:
        if value not in get_args(hint):
            raise ValidationError(f"{path}: must be one of {list(get_args(hint))}, got {value!r}")
        return value

    if origin in (list, tuple):
        if not isinstance(value, list):
            raise ValidationError(f"{path}: expected a list, got {type(value).__name__}")
        (item_hint, *_) = get_args(hint) or (Any,)
        items = [_coerce(v, item_hint, f"{path}[{i}]") for i, v in enumerate(value)]
        return items if origin is list else tuple(items)

    if hint is bool:
        if not isinstance(value, bool):
            raise ValidationError(f"{path}: expected a boolean, got {value!r}")
        return value

    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{path}: expected an integer, got {value!r}")
        return value

    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{path}: expected a number, got {value!r}")
        return float(value)

    if hint is str:
        if not isinstance(value, str):
            raise ValidationError(f"{path}: expected a string, got {value!r}")
        return value

    if hint is Any:
        return value

    raise ValidationError(f"{path}: unsupported field type {_type_name(hint)}")


def _build(cls: type, data: Any, path: str) -> Any:
    if not isinstance(data, dict):
        raise ValidationError(f"{path or 'config'}: expected an object, got {type(data).__name__}")

    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}." if path else ""
        raise ValidationError(f"{where}{unknown[0]}: unknown field")

    kwargs = {}
    for name in names & set(data):
        sub_path = f"{path}.{name}" if path else name
        kwargs[name] = _coerce(data[name], hints[name], sub_path)

    try:
        instance = cls(**kwargs)
        if hasattr(instance, "validate"):
            instance.validate()
    except ValidationError as e:
        if path and not str(e).startswith(path):
            raise ValidationError(f"{path}.{e}" if ":" in str(e) else f"{path}: {e}") from e
        raise
    return instance


def config_from_dict(data: dict) -> ExperimentConfig:
    """Parse and validate a configuration document.

    Raises:
        ValidationError: With the dotted path of the first offending field
    """
    return _build(ExperimentConfig, data, "")


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-JSON form of a configuration (tuples become lists)."""
    return json.loads(json.dumps(dataclasses.asdict(config)))


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON serialization of the result-relevant fields.

    ``output_dir`` and ``threads`` never change a result, so runs that differ only
    in where they write or how many threads they use share a hash.
    """
    document = config_to_dict(config)
    for name in UNHASHED_FIELDS:
        document.pop(name)
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: Path | None) -> ExperimentConfig:
    """Read a JSON configuration file; None gives the defaults.

    Raises:
        ValidationError: If the file is unreadable, not JSON or invalid
    """
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ValidationError(f"Cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"Config file {path} is not valid JSON: {e}") from e
    return config_from_dict(data)


def apply_overrides(
    config: ExperimentConfig,
    seed: int | None = None,
    output_dir: Path | None = None,
    threads: int | None = None,
    method: str | None = None,
) -> ExperimentConfig:
    """Return a copy with CLI flag values applied, re-validated."""
    changes: dict[str, Any] = {}
    if seed is not None:
        changes["seed"] = seed
    if output_dir is not None:
        changes["output_dir"] = str(output_dir)
    if threads is not None:
        changes["threads"] = threads
    if method is not None:
        changes["method"] = method
    return config_from_dict({**config_to_dict(config), **changes})
