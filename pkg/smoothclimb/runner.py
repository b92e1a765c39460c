"""Command orchestration: logging, timing, manifest and exit codes."""

import logging
import time
import traceback
from collections.abc import Callable
from datetime import datetime, timezone
from uuid import uuid4

from smoothclimb.commands.common import CommandResult
from smoothclimb.commands.compare import compare_command
from smoothclimb.commands.optimize import optimize_command
from smoothclimb.commands.sweep import sweep_command
from smoothclimb.commands.verify import verify_command
from smoothclimb.config import ExperimentConfig, config_hash
from smoothclimb.core.executor import EstimationError
from smoothclimb.logging.logger import setup_logger
from smoothclimb.logging.manifest import ManifestBuilder
from smoothclimb.utils.results import OutputError
from smoothclimb.utils.validators import ValidationError

__all__ = ["COMMANDS", "EXIT_CHECKS_FAILED", "ExperimentRunner", "OutputError"]

CommandFn = Callable[[ExperimentConfig, logging.Logger], CommandResult]

COMMANDS: dict[str, CommandFn] = {
    "sweep": sweep_command,
    "verify": verify_command,
    "optimize": optimize_command,
    "compare": compare_command,
}

EXIT_CHECKS_FAILED = 4


class ExperimentRunner:
    """Runs one subcommand end to end."""

    def __init__(self, config: ExperimentConfig, command: str):
        """Initialize runner.

        Args:
            config: Validated experiment configuration
            command: One of COMMANDS

        Raises:
            ValidationError: If the command is unknown
        """
        if command not in COMMANDS:
            raise ValidationError(f"Unknown command: {command}")
        self.config = config
        self.command = command
        self.run_id = str(uuid4())
        self.timestamp = datetime.now(timezone.utc).isoformat()
        self.logger = setup_logger(config.output_path / "run_log.txt")
        self.manifest = ManifestBuilder(config, command, self.run_id, self.timestamp)

    def run(self) -> int:
        """Run the command.

        Returns:
            Exit code (0=success, 1=validation error, 2=estimation error,
            3=output error, 4=verify checks failed)
        """
        self.logger.info("=" * 60)
        self.logger.info(f"Smoothclimb - {self.command}")
        self.logger.info("=" * 60)
        self.logger.info(f"Run ID: {self.run_id}")
        self.logger.info(f"Seed: {self.config.seed}, threads: {self.config.threads}")
        self.logger.info(f"Config SHA-256: {config_hash(self.config)}")
        self.logger.info("")

        start_time = time.time()
        try:
            result = COMMANDS[self.command](self.config, self.logger)
            duration = time.time() - start_time

            for name, path in result.outputs.items():
                self.manifest.add_output(name, path)
            status = "success" if result.passed else "failed_checks"
            if not result.passed:
                self.manifest.add_warning(f"{self.command} finished with failed checks")
            self.manifest.add_command_result(status, duration, **result.summary)

            manifest_path = self.config.output_path / "manifest.json"
            self.manifest.write(manifest_path)
            self.logger.info("")
            self.logger.info(f"Manifest written to {manifest_path}")

            self.logger.info("")
            self.logger.info("=" * 60)
            if result.passed:
                self.logger.info(f"{self.command} completed successfully in {duration:.1f}s")
            else:
                self.logger.error(f"{self.command} finished with failed checks")
            self.logger.info("=" * 60)
            self.logger.info(f"Output directory: {self.config.output_path}")
            self.logger.info("Outputs:")
            for data in self.manifest.data["outputs"].values():
                self.logger.info(f"  ✓ {data['path']} ({data['size_bytes']} bytes)")

            return 0 if result.passed else EXIT_CHECKS_FAILED

        except ValidationError as e:
            return self._fail("Validation error", e, 1, start_time)

        except EstimationError as e:
            return self._fail(f"Estimation error ({type(e).__name__})", e, 2, start_time)

        except OutputError as e:
            return self._fail("Output error", e, 3, start_time)

        except Exception as e:
            traceback.print_exc()
            return self._fail("Unexpected error", e, 2, start_time)

    def _fail(self, kind: str, error: Exception, code: int, start_time: float) -> int:
        self.logger.error(f"{kind}: {error}")
        self.manifest.add_error(f"{kind}: {error}")
        self.manifest.add_command_result("error", time.time() - start_time, exit_code=code)
        self._write_manifest_on_error()
        return code

    def _write_manifest_on_error(self):
        """Write manifest even on error (for debugging)."""
        try:
            manifest_path = self.config.output_path / "manifest.json"
            self.manifest.write(manifest_path)
            self.logger.info(f"Partial manifest written to {manifest_path}")
        except Exception as e:
            self.logger.error(f"Failed to write manifest: {e}")
