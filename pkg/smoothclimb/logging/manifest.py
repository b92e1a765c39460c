"""Manifest generation for auditability."""

import hashlib
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from smoothclimb.config import ExperimentConfig, config_hash, config_to_dict


@dataclass
class ManifestBuilder:
    """Builds and manages the manifest.json for one command run."""

    config: ExperimentConfig
    command: str
    run_id: str
    timestamp: str
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        """Initialize manifest structure."""
        self.data = {
            "run_id": self.run_id,
            "timestamp": self.timestamp,
            "command": self.command,
            "seed": self.config.seed,
            "threads": self.config.threads,
            "python_version": (
                f"{sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}"
            ),
            "numpy_version": np.__version__,
            "scipy_version": scipy.__version__,
            "platform": platform.system(),
            "config_sha256": config_hash(self.config),
            "config": config_to_dict(self.config),
            "outputs": {},
            "results": {},
            "warnings": [],
            "errors": [],
        }

    def add_output(self, name: str, path: Path):
        """Add output file to manifest with size and checksum.

        Args:
            name: Output name (landscape, verify_report, run_record, ...)
            path: Path to output file
        """
        if not path.exists():
            return

        self.data["outputs"][name] = {
            "path": str(path),
            "size_bytes": path.stat().st_size,
            "sha256": self._compute_sha256(path),
        }

    def add_command_result(self, status: str, duration_s: float, **extras):
        """Record how the command ended.

        Args:
            status: success, failed_checks or error
            duration_s: Wall-clock time of the command
            **extras: Command-specific summary values
        """
        self.data["results"] = {"status": status, "duration_s": round(duration_s, 2), **extras}

    def add_warning(self, message: str):
        self.data["warnings"].append(message)

    def add_error(self, message: str):
        self.data["errors"].append(message)

    def write(self, output_path: Path):
        """Write manifest to JSON file.

        Args:
            output_path: Path to manifest.json
        """
        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(self.data, f, indent=2, default=str)

    @staticmethod
    def _compute_sha256(file_path: Path) -> str:
        """Compute SHA256 hash of a file."""
        sha256_hash = hashlib.sha256()

        with open(file_path, "rb") as f:
            for byte_block in iter(lambda: f.read(4096), b""):
                sha256_hash.update(byte_block)

        return sha256_hash.hexdigest()
