"""Block-parallel execution of Monte-Carlo rollouts with logging."""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TypeVar

from smoothclimb.core.rng import RandomStream
from smoothclimb.utils.validators import ValidationError

logger = logging.getLogger(__name__)

T = TypeVar("T")


class EstimationError(Exception):
    """Raised when a numerical estimate cannot be produced (exit code 2)."""
    pass


@dataclass(frozen=True)
class RolloutExecutor:
    """Runs rollout blocks on a worker pool in a fixed, seed-determined layout.

    Rollouts are cut into blocks of ``block_size``; block ``b`` always consumes
    ``stream.child(b)`` and results are returned in block order. The worker count
    therefore changes wall-clock time only, never the numbers.
    """

    threads: int = 1
    block_size: int = 250

    def __post_init__(self):
        if self.threads < 1:
            raise ValidationError(f"threads must be >= 1, got {self.threads}")
        if self.block_size < 1:
            raise ValidationError(f"block_size must be >= 1, got {self.block_size}")

    def block_counts(self, n: int) -> list[int]:
        """Split ``n`` rollouts into block sizes (the last block may be short)."""
        full, rest = divmod(n, self.block_size)
        counts = [self.block_size] * full
        if rest:
            counts.append(rest)
        return counts

    def map_blocks(
        self,
        fn: Callable[[int, RandomStream], T],
        n: int,
        stream: RandomStream,
        description: str,
    ) -> list[T]:
        """Apply ``fn(count, block_stream)`` to every block of ``n`` rollouts.

        Args:
            fn: Block worker, called with the block's rollout count and stream
            n: Total number of rollouts
            stream: Parent stream; block b uses ``stream.child(b)``
            description: Human-readable description for the log

        Returns:
            Block results in block order

        Raises:
            EstimationError: If a block fails numerically
        """
        counts = self.block_counts(n)
        logger.debug(
            f"{description}: {n} rollout(s) in {len(counts)} block(s), "
            f"{self.threads} thread(s)"
        )
        jobs = [(count, stream.child(b)) for b, count in enumerate(counts)]

        try:
            if self.threads == 1 or len(jobs) == 1:
                return [fn(count, block_stream) for count, block_stream in jobs]

            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                futures = [pool.submit(fn, count, block_stream) for count, block_stream in jobs]
                return [future.result() for future in futures]

        except EstimationError:
            logger.error(f"Estimation failed: {description}")
            raise
        except (FloatingPointError, ArithmeticError, ValueError) as e:
            logger.error(f"Estimation failed: {description}: {e}")
            raise EstimationError(f"{description}: {e}") from e


DEFAULT_EXECUTOR = RolloutExecutor()
