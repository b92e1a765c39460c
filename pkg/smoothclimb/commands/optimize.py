"""optimize: one optimizer run, its step record and a basin-labelled summary."""

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
from smoothclimb.core.optimize import RunRecord
from smoothclimb.utils.results import format_vector, write_csv, write_json

RUN_RECORD_COLUMNS = (
    "stage",
    "step",
    "scale",
    "theta",
    "theta_next",
    "return_mean",
    "return_stderr",
    "n_samples",
    "grad_norm",
    "log_std",
    "entropy_coef",
)


def run_record_rows(record: RunRecord) -> list[tuple]:
    """CSV rows in RUN_RECORD_COLUMNS order; vectors are space-separated, missing cells empty."""
    return [
        (
            row.stage,
            row.step,
            row.scale,
            format_vector(row.theta),
            format_vector(row.theta_next),
            row.return_mean,
            row.return_stderr,
            row.n_samples,
            row.grad_norm,
            "" if row.log_std is None else format_vector(row.log_std),
            "" if row.entropy_coef is None else row.entropy_coef,
        )
        for row in record.steps
    ]


def optimize_command(config: ExperimentConfig, logger: logging.Logger) -> CommandResult:
    """Run ``config.method`` from ``policy.theta0`` and label where it ends.

    Args:
        config: Experiment configuration
        logger: Logger instance

    Returns:
        Paths of run_record.csv and optimize_summary.json
    """
    method = config.method
    logger.info(f"=== Optimize: {method} ===")
    logger.info(f"θ₀={config.policy.theta0}, seed={config.seed}")
    experiment = Experiment.from_config(config)

    record = run_method(config, experiment, method, config.seed)
    final_theta = float(record.final_theta[0])
    estimate = final_return(config, experiment, final_theta, config.seed)
    oracle = build_basin_oracle(config, experiment, logger)
    label = oracle.label(final_theta)
    logger.info(
        f"  final θ={final_theta:.4f}, J={estimate.mean:.4f} ± {estimate.stderr:.3f}, "
        f"basin: {label}"
    )

    header = result_header(config, "optimize")
    record_path = config.output_path / "run_record.csv"
    write_csv(record_path, header, RUN_RECORD_COLUMNS, run_record_rows(record))

    summary = {
        "method": method,
        "initial_theta": record.initial_theta.tolist(),
        "final_theta": record.final_theta.tolist(),
        "final_return_mean": estimate.mean,
        "final_return_stderr": estimate.stderr,
        "final_return_n": estimate.n_samples,
        "last_step_return_mean": record.steps[-1].return_mean,
        "basin": label,
        "global_peak_theta": float(oracle.thetas[oracle.global_peak]),
        "steps": len(record),
        "stage_scales": record.stage_scales(),
    }
    summary_path = config.output_path / "optimize_summary.json"
    write_json(summary_path, header, summary)
    logger.info(f"  ✓ {record_path.name} ({len(record)} steps)")
    logger.info(f"  ✓ {summary_path.name}")

    return CommandResult(
        outputs={"run_record": record_path, "optimize_summary": summary_path},
        summary={"basin": label, "final_theta": final_theta},
    )
