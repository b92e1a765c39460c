"""Logging setup for human-readable run logs."""

import logging
import sys
from pathlib import Path


def setup_logger(log_file: Path) -> logging.Logger:
    """Setup logger that writes to console (INFO) and file (DEBUG).

    Library modules log through children of the ``smoothclimb`` logger, so their
    messages reach both handlers.

    Args:
        log_file: Path to write log file

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger("smoothclimb")
    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    for handler in list(logger.handlers):
        handler.close()
    logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))

    log_file.parent.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(log_file, mode="w", encoding="utf-8")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(
        logging.Formatter(
            "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
    )

    logger.addHandler(console_handler)
    logger.addHandler(file_handler)

    return logger
