"""Objects shared by the subcommands: the built environment, basin oracle, method runs."""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from smoothclimb.config import ExperimentConfig, config_hash
from smoothclimb.core.continuation import CovarianceFn
from smoothclimb.core.executor import RolloutExecutor
from smoothclimb.core.hillcar import CarParams, HillProfile, make_hillcar_mdp
from smoothclimb.core.mdp import Mdp, ReturnEstimate, estimate_return
from smoothclimb.core.optimize import (
    RunRecord,
    deterministic_ascent_baseline,
    entropy_regularized_ascent,
    optimize_by_continuation,
)
from smoothclimb.core.policy import (
    DeterministicAffinePolicy,
    GaussianAffinePolicy,
    k_controller,
    k_controller_mean,
)
from smoothclimb.core.rng import RandomStream
from smoothclimb.landscape import BasinOracle
from smoothclimb.utils.results import ResultHeader
from smoothclimb.utils.validators import ValidationError

# Top-level stream indices under the master seed
SWEEP_STREAM = 0
BASIN_STREAM = 1
VERIFY_STREAM = 2
FINAL_RETURN_STREAM = 3


@dataclass
class CommandResult:
    """What a command hands back to the runner."""

    outputs: dict[str, Path] = field(default_factory=dict)
    passed: bool = True
    summary: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Experiment:
    """The hill-car task and executor resolved from a configuration."""

    params: CarParams
    profile: HillProfile
    mdp: Mdp
    executor: RolloutExecutor

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "Experiment":
        params = config.environment.car
        profile = config.environment.profile.build(params)
        return cls(
            params=params,
            profile=profile,
            mdp=make_hillcar_mdp(params, profile),
            executor=RolloutExecutor(threads=config.threads, block_size=config.block_size),
        )

    @property
    def x_target(self) -> float:
        return self.profile.x_target

    def controller(self, theta: float) -> DeterministicAffinePolicy:
        return k_controller(theta, self.x_target)

    def base_lambda(self, config: ExperimentConfig) -> CovarianceFn:
        return config.covariance.build(self.x_target)


def result_header(config: ExperimentConfig, command: str, seed: int | None = None) -> ResultHeader:
    return ResultHeader(
        seed=config.seed if seed is None else seed,
        config_sha256=config_hash(config),
        command=command,
    )


def build_basin_oracle(
    config: ExperimentConfig, experiment: Experiment, logger: logging.Logger
) -> BasinOracle:
    """σ′ = 0 landscape oracle on the configured dense grid, from the master seed."""
    basin = config.basin
    oracle = BasinOracle.build(
        experiment.mdp,
        experiment.x_target,
        basin.theta_min,
        basin.theta_max,
        basin.pitch,
        basin.n_rollouts,
        RandomStream(config.seed).child(BASIN_STREAM),
        prominence_se=basin.prominence_se,
        executor=experiment.executor,
    )
    peaks = ", ".join(f"{oracle.thetas[p]:.2f}" for p in oracle.peaks)
    logger.info(
        f"Basin oracle: {len(oracle.peaks)} maxima at θ = [{peaks}], "
        f"global at θ = {oracle.thetas[oracle.global_peak]:.2f}"
    )
    return oracle


def run_method(
    config: ExperimentConfig, experiment: Experiment, method: str, seed: int
) -> RunRecord:
    """Run one optimizer from ``policy.theta0`` with its streams rooted at ``seed``."""
    cfg = dataclasses.replace(config.optimizer, seed=seed)
    theta0 = config.policy.theta0

    if method == "continuation":
        return optimize_by_continuation(
            experiment.mdp,
            experiment.controller(theta0),
            experiment.base_lambda(config),
            config.schedule.build(),
            cfg,
            experiment.executor,
        )
    if method == "deterministic":
        return deterministic_ascent_baseline(
            experiment.mdp, experiment.controller(theta0), cfg, experiment.executor
        )
    if method == "entropy_reg":
        policy = GaussianAffinePolicy.with_log_std(
            k_controller_mean(experiment.x_target),
            np.array([theta0]),
            np.array([cfg.initial_log_std]),
        )
        return entropy_regularized_ascent(experiment.mdp, policy, cfg, executor=experiment.executor)
    raise ValidationError(f"Unknown method: {method}")


def final_return(
    config: ExperimentConfig, experiment: Experiment, theta: float, seed: int
) -> ReturnEstimate:
    """Return of the deterministic controller at the final θ of a run."""
    return estimate_return(
        experiment.mdp,
        experiment.controller(theta),
        config.optimizer.n_rollouts,
        RandomStream(seed).child(FINAL_RETURN_STREAM),
        experiment.executor,
    )
