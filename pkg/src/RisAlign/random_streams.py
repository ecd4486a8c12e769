"""
Random Streams Module
Counter-based random streams addressed by (seed, substream, lineage, chunk)
"""

from dataclasses import dataclass

import numpy as np

from .error_handler import DomainError

SEED_LIMIT = 2**64


@dataclass(frozen=True)
class RandomStream:
    """
    Reproducible Philox stream

    A generator is keyed by (seed, substream_id, *lineage, chunk_id), so chunk i of a
    Monte Carlo run draws the same numbers whichever worker runs it.
    """

    seed: int
    substream_id: int = 0
    lineage: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.seed < SEED_LIMIT:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.substream_id < 0 or any(i < 0 for i in self.lineage):
            raise DomainError("substream ids must be nonnegative")

    def generator(self, chunk_id: int = 0) -> np.random.Generator:
        """Generator for one chunk of this stream"""
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.substream_id, *self.lineage, chunk_id))
        return np.random.Generator(np.random.Philox(sequence))

    def spawn(self, child_id: int) -> "RandomStream":
        """Independent child stream, e.g. one per sweep point"""
        return RandomStream(self.seed, self.substream_id, (*self.lineage, child_id))


def as_generator(stream: "RandomStream | np.random.Generator") -> np.random.Generator:
    if isinstance(stream, RandomStream):
        return stream.generator(0)
    return stream
