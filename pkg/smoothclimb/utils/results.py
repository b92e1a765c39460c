"""Result files: CSV tables and JSON reports stamped with seed and config hash."""

import csv
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any


class OutputError(Exception):
    """Raised when result files cannot be written (exit code 3)."""
    pass


@dataclass(frozen=True)
class ResultHeader:
    """Provenance embedded in every result file."""

    seed: int
    config_sha256: str
    command: str

    def comment(self) -> str:
        return (
            f"# smoothclimb command={self.command} seed={self.seed} "
            f"config_sha256={self.config_sha256}"
        )

    def as_dict(self) -> dict:
        return {"command": self.command, "seed": self.seed, "config_sha256": self.config_sha256}


def format_vector(values: Sequence[float]) -> str:
    """Space-separated parameter vector for a single CSV cell."""
    return " ".join(repr(float(v)) for v in values)


def write_csv(
    path: Path,
    header: ResultHeader,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> Path:
    """Write a header comment line, the column names and the rows.

    Floats are written with ``repr`` so identical runs give identical bytes.

    Raises:
        OutputError: If the file cannot be written
    """
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(header.comment() + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                if len(row) != len(columns):
                    raise OutputError(
                        f"{path.name}: row has {len(row)} cells, expected {len(columns)}"
                    )
                writer.writerow(row)
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}") from e
    return path


def write_json(path: Path, header: ResultHeader, payload: dict) -> Path:
    """Write a JSON report whose first key is the provenance header.

    Raises:
        OutputError: If the file cannot be written
    """
    document = {"header": header.as_dict(), **payload}
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2, sort_keys=False)
            f.write("\n")
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}") from e
    except (TypeError, ValueError) as e:
        raise OutputError(f"Cannot serialize {path.name}: {e}") from e
    return path


def read_csv(path: Path) -> tuple[str, list[dict[str, str]]]:
    """Read a result CSV back as (header comment, rows keyed by column)."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        comment = f.readline().rstrip("\n")
        return comment, list(csv.DictReader(f))
