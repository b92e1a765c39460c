"""compare: several optimizers over several seeds, with basin success rates."""

import logging

from smoothclimb.commands.common import (
    CommandResult,
    Experiment,
    build_basin_oracle,
    final_return,
    result_header,
    run_method,
)
from smoothclimb.config import ExperimentConfig
from smoothclimb.landscape import GLOBAL
from smoothclimb.utils.results import write_csv

COMPARE_COLUMNS = (
    "method",
    "seed",
    "final_theta",
    "final_return_mean",
    "final_return_stderr",
    "basin",
    "success",
)
RATE_COLUMNS = ("method", "runs", "successes", "success_rate")


def success_rates(rows: list[tuple], methods: list[str]) -> list[tuple]:
    """Per-method mean of the per-seed success flags, in ``methods`` order."""
    rates = []
    for method in methods:
        flags = [row[-1] for row in rows if row[0] == method]
        successes = sum(flags)
        rates.append((method, len(flags), successes, successes / len(flags) if flags else 0.0))
    return rates


def compare_command(config: ExperimentConfig, logger: logging.Logger) -> CommandResult:
    """Run every configured method for every seed from the same θ₀.

    A run succeeds when its final θ lies in the global basin of the σ′ = 0
    landscape. The basin oracle is built once from the master seed.

    Args:
        config: Experiment configuration
        logger: Logger instance

    Returns:
        Paths of compare.csv and compare_rates.csv
    """
    methods = config.compare.methods
    seeds = config.compare.seeds
    logger.info(f"=== Compare: {', '.join(methods)} over {len(seeds)} seeds ===")
    experiment = Experiment.from_config(config)
    oracle = build_basin_oracle(config, experiment, logger)

    rows = []
    for method in methods:
        for seed in seeds:
            record = run_method(config, experiment, method, seed)
            theta = float(record.final_theta[0])
            estimate = final_return(config, experiment, theta, seed)
            label = oracle.label(theta)
            rows.append(
                (method, seed, theta, estimate.mean, estimate.stderr, label, int(label == GLOBAL))
            )
            logger.debug(f"{method} seed {seed}: θ={theta:.4f}, basin {label}")

    rates = success_rates(rows, methods)
    for method, runs, successes, rate in rates:
        logger.info(f"  {method}: {successes}/{runs} runs reached the global basin ({rate:.0%})")

    header = result_header(config, "compare")
    runs_path = config.output_path / "compare.csv"
    rates_path = config.output_path / "compare_rates.csv"
    write_csv(runs_path, header, COMPARE_COLUMNS, rows)
    write_csv(rates_path, header, RATE_COLUMNS, rates)
    logger.info(f"  ✓ {runs_path.name} ({len(rows)} rows)")
    logger.info(f"  ✓ {rates_path.name}")

    return CommandResult(
        outputs={"compare": runs_path, "compare_rates": rates_path},
        summary={method: rate for method, _, _, rate in rates},
    )
