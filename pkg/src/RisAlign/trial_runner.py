"""
Trial Runner Module
Splits a Monte Carlo budget into fixed chunks and runs them on a thread pool

Chunk sizes depend only on the trial count and M, chunk i always draws from
stream.generator(i), and results are merged in chunk order, so the merged
output is bit-identical for any worker count.
"""

import time
from collections.abc import Callable
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt

from . import config, logger
from .error_handler import DomainError, SimulationError
from .random_streams import RandomStream

ChunkTask = Callable[[int, np.random.Generator], npt.NDArray[np.generic]]


class ChunkStatus(Enum):
    """Status of chunk processing"""

    PENDING = "pending"
    PROCESSING = "processing"
    COMPLETED = "completed"
    ERROR = "error"
    CANCELLED = "cancelled"


@dataclass
class ChunkResult:
    """Result of one chunk"""

    chunk_id: int
    trials: int
    status: ChunkStatus = ChunkStatus.PENDING
    values: npt.NDArray[np.generic] | None = None
    error: str | None = None
    elapsed: float = 0.0


class TrialRunner:
    """Runs a chunked Monte Carlo task in parallel with a deterministic merge"""

    def __init__(self, max_workers: int | None = None, chunk_elements: int = config.CHUNK_ELEMENTS):
        """
        Initialize trial runner

        Args:
            max_workers: Maximum parallel workers (defaults to RISALIGN_WORKERS)
            chunk_elements: Branch draws per chunk; a chunk holds chunk_elements // M trials
        """
        self.max_workers = max_workers or config.default_workers()
        if self.max_workers < 1:
            raise DomainError(f"max_workers must be >= 1, got {self.max_workers}")
        self.chunk_elements = chunk_elements
        self.cancel_flag = False
        self.chunk_results: dict[int, ChunkResult] = {}

    def chunk_sizes(self, trials: int, M: int) -> list[int]:
        """Trial count of each chunk"""
        if trials < 1:
            raise DomainError(f"trials must be >= 1, got {trials}")
        per_chunk = max(1, self.chunk_elements // max(1, M))
        full, remainder = divmod(trials, per_chunk)
        return [per_chunk] * full + ([remainder] if remainder else [])

    def run(self, trials: int, M: int, stream: RandomStream, task: ChunkTask) -> npt.NDArray[np.generic]:
        """
        Run task over all chunks and sum the results

        Args:
            trials: Total number of trials
            M: Branch count, sets the chunk size
            stream: Stream whose generator(i) feeds chunk i
            task: Callable (chunk_trials, generator) -> array of counts or sums

        Returns:
            Element-wise sum of chunk results in chunk order
        """
        sizes = self.chunk_sizes(trials, M)
        self.cancel_flag = False
        self.chunk_results = {i: ChunkResult(chunk_id=i, trials=n) for i, n in enumerate(sizes)}
        logger.logger.info(f"Running {trials} trials in {len(sizes)} chunks on {self.max_workers} workers")

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            futures: list[Future[ChunkResult]] = [
                executor.submit(self._run_chunk, i, stream, task) for i in range(len(sizes))
            ]
            results = [future.result() for future in futures]

        failed = [r for r in results if r.status != ChunkStatus.COMPLETED]
        if failed:
            first = failed[0]
            if first.status == ChunkStatus.CANCELLED:
                raise SimulationError("Monte Carlo run cancelled", details={"cancelled_chunks": len(failed)})
            raise SimulationError(
                f"chunk {first.chunk_id} failed: {first.error}",
                details={"failed_chunks": [r.chunk_id for r in failed]},
            )

        total = results[0].values
        assert total is not None
        total = total.copy()
        for result in results[1:]:
            assert result.values is not None
            total += result.values
        return total

    def _run_chunk(self, chunk_id: int, stream: RandomStream, task: ChunkTask) -> ChunkResult:
        """Process a single chunk (runs in thread pool)"""
        result = self.chunk_results[chunk_id]
        if self.cancel_flag:
            result.status = ChunkStatus.CANCELLED
            return result

        result.status = ChunkStatus.PROCESSING
        start = time.perf_counter()
        try:
            result.values = np.asarray(task(result.trials, stream.generator(chunk_id)))
            result.status = ChunkStatus.COMPLETED
        except Exception as e:
            logger.logger.error(f"Error in chunk {chunk_id}: {e}")
            result.status = ChunkStatus.ERROR
            result.error = str(e)
        result.elapsed = time.perf_counter() - start
        logger.logger.debug(f"Chunk {chunk_id} {result.status.value} in {result.elapsed:.3f}s")
        return result

    def cancel(self) -> None:
        """Skip every chunk that has not started yet"""
        self.cancel_flag = True
        logger.logger.info("Trial runner cancellation requested")

    def get_stats(self) -> dict[str, int]:
        """Chunk counts by status for the last run"""
        stats: dict[str, int] = {status.value: 0 for status in ChunkStatus}
        for result in self.chunk_results.values():
            stats[result.status.value] += 1
        return stats
