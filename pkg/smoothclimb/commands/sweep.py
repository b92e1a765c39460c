"""sweep: return landscape of the K-controller over a θ-grid for several σ′."""

import logging

import numpy as np

from smoothclimb.commands.common import SWEEP_STREAM, CommandResult, Experiment, result_header
from smoothclimb.config import ExperimentConfig
from smoothclimb.core.rng import RandomStream
from smoothclimb.landscape import count_local_maxima, sweep_landscape, theta_grid
from smoothclimb.utils.results import write_csv

LANDSCAPE_COLUMNS = ("theta", "sigma_prime", "return_mean", "return_stderr", "n")


def sweep_command(config: ExperimentConfig, logger: logging.Logger) -> CommandResult:
    """Write landscape.csv with one row per (σ′, θ), σ′ in list order, θ ascending.

    Args:
        config: Experiment configuration
        logger: Logger instance

    Returns:
        Output path and the number of local maxima per σ′
    """
    logger.info("=== Sweep: return landscape ===")
    sweep = config.sweep
    experiment = Experiment.from_config(config)
    thetas = theta_grid(sweep.theta_min, sweep.theta_max, sweep.theta_step)
    logger.info(
        f"θ ∈ [{sweep.theta_min}, {sweep.theta_max}] ({len(thetas)} points), "
        f"σ′ ∈ {sweep.sigma_primes}, n={sweep.n_rollouts}"
    )

    rows = sweep_landscape(
        experiment.mdp,
        experiment.x_target,
        thetas,
        sweep.sigma_primes,
        sweep.n_rollouts,
        RandomStream(config.seed).child(SWEEP_STREAM),
        experiment.executor,
    )

    maxima = {}
    for sigma_prime in sweep.sigma_primes:
        curve = [r for r in rows if r.sigma_prime == sigma_prime]
        values = [r.return_mean for r in curve]
        # same ripple filter as the basin oracle
        stderr = float(np.median([r.return_stderr for r in curve]))
        count = len(count_local_maxima(values, config.basin.prominence_se * stderr))
        maxima[repr(float(sigma_prime))] = count
        best = max(curve, key=lambda r: r.return_mean)
        logger.info(
            f"  σ′={sigma_prime}: {count} local maxima, best θ={best.theta:.2f} "
            f"(J={best.return_mean:.3f})"
        )

    output_path = config.output_path / "landscape.csv"
    write_csv(
        output_path,
        result_header(config, "sweep"),
        LANDSCAPE_COLUMNS,
        ((r.theta, r.sigma_prime, r.return_mean, r.return_stderr, r.n) for r in rows),
    )
    logger.info(f"  ✓ {output_path.name} ({len(rows)} rows)")

    return CommandResult(
        outputs={"landscape": output_path},
        summary={"rows": len(rows), "local_maxima": maxima},
    )
