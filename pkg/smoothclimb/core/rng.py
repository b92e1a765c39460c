"""Splittable counter-based random streams."""

from dataclasses import dataclass

import numpy as np

from smoothclimb.utils.validators import ValidationError

# Sub-stream indices used inside one rollout block
ENV = 0
POLICY = 1
PERTURB = 2


@dataclass(frozen=True)
class RandomStream:
    """A reproducible random stream addressed by (seed, path).

    Streams never share state: ``child(i)`` derives a new independent stream from
    the path, so the draws of stream ``(seed, (3, 1))`` do not depend on how many
    other streams were used before it.

    Example:
        >>> root = RandomStream(42)
        >>> a = root.child(0).generator().normal()
        >>> b = RandomStream(42).child(0).generator().normal()
        >>> a == b
        True
    """

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")

    def child(self, index: int) -> "RandomStream":
        """Return the independent sub-stream at ``index``."""
        return RandomStream(self.seed, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        """Build a fresh Philox generator positioned at the start of this stream."""
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(sequence))


@dataclass
class RolloutStreams:
    """Generators consumed by one block of rollouts."""

    env: np.random.Generator
    policy: np.random.Generator
    perturb: np.random.Generator

    @classmethod
    def from_stream(cls, stream: RandomStream) -> "RolloutStreams":
        return cls(
            env=stream.child(ENV).generator(),
            policy=stream.child(POLICY).generator(),
            perturb=stream.child(PERTURB).generator(),
        )
