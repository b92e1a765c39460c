"""CLI argument parsing and pre-flight validation."""

import argparse
import sys
from pathlib import Path

from smoothclimb.config import ExperimentConfig, apply_overrides, load_config
from smoothclimb.core.optimize import METHODS
from smoothclimb.utils.validators import (
    ValidationError,
    validate_config_file,
    validate_output_directory,
    validate_python_version,
)


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="smoothclimb",
        description="Policy optimization by continuation on a car-in-a-valley task",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Return landscape for the default σ′ list
  smoothclimb sweep --out output/sweep

  # Identity suite with a custom config, 4 worker threads
  smoothclimb verify --config experiment.json --threads 4

  # Continuation from the configured θ₀, seed 7
  smoothclimb optimize --seed 7 --out output/run7

  # 20-seed comparison of continuation against deterministic ascent
  smoothclimb compare --out output/compare
        """,
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON experiment configuration (default: built-in defaults)",
    )
    common.add_argument("--seed", type=int, default=None, help="Master seed (overrides config)")
    common.add_argument(
        "--out", type=Path, default=None, help="Output directory (overrides config)"
    )
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Rollout worker threads; results do not depend on it (overrides config)",
    )

    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    subparsers.add_parser("sweep", parents=[common], help="Return landscape over θ and σ′")
    subparsers.add_parser("verify", parents=[common], help="Mirror-policy identity checks")
    optimize = subparsers.add_parser("optimize", parents=[common], help="Run one optimizer")
    optimize.add_argument(
        "--method", choices=METHODS, default=None, help="Optimizer (overrides config)"
    )
    subparsers.add_parser("compare", parents=[common], help="Methods over several seeds")

    return parser


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        Parsed arguments
    """
    return build_parser().parse_args(argv)


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """Load the config file and apply flag overrides.

    Raises:
        ValidationError: If the file or the resulting configuration is invalid
    """
    validate_config_file(args.config)
    config = load_config(args.config)
    return apply_overrides(
        config,
        seed=args.seed,
        output_dir=args.out,
        threads=args.threads,
        method=getattr(args, "method", None),
    )


def run_preflight_checks(config: ExperimentConfig) -> None:
    """Run all pre-flight validation checks.

    Args:
        config: Experiment configuration

    Raises:
        ValidationError: If any validation fails
    """
    print("Running pre-flight checks...")

    validate_python_version()
    print(f"✓ Python {sys.version_info.major}.{sys.version_info.minor}")

    validate_output_directory(config.output_path)
    print(f"✓ Output directory: {config.output_path}")

    print("All pre-flight checks passed!\n")


def main(argv: list[str] | None = None) -> int:
    """Main CLI entry point.

    Returns:
        Exit code (0=success, 1=validation error, 2=estimation error,
        3=output error, 4=verify checks failed)
    """
    try:
        args = parse_args(argv)
        config = build_config(args)
        run_preflight_checks(config)

        from smoothclimb.runner import ExperimentRunner
        runner = ExperimentRunner(config, args.command)
        return runner.run()

    except ValidationError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"UNEXPECTED ERROR: {e}", file=sys.stderr)
        import traceback
        traceback.print_exc()
        return 2
