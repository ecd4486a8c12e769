"""
Tests for the chunked trial runner and random streams
"""

import threading

import numpy as np
import pytest

from RisAlign.error_handler import DomainError, SimulationError
from RisAlign.random_streams import RandomStream, as_generator
from RisAlign.trial_runner import ChunkStatus, TrialRunner


def normal_sum(n, gen):
    draws = gen.standard_normal(n)
    return np.array([draws.sum(), np.square(draws).sum()])


class TestRandomStream:
    def test_seed_range(self):
        with pytest.raises(DomainError):
            RandomStream(-1)
        with pytest.raises(DomainError):
            RandomStream(2**64)
        RandomStream(2**64 - 1)

    def test_negative_substream(self):
        with pytest.raises(DomainError):
            RandomStream(1, -1)

    def test_chunks_are_reproducible_and_distinct(self):
        stream = RandomStream(42)
        assert stream.generator(3).random(4).tobytes() == stream.generator(3).random(4).tobytes()
        assert not np.array_equal(stream.generator(3).random(4), stream.generator(4).random(4))

    def test_spawn(self):
        parent = RandomStream(42, 1)
        child = parent.spawn(5)
        assert child.lineage == (5,)
        assert child.spawn(2).lineage == (5, 2)
        assert not np.array_equal(parent.generator().random(4), child.generator().random(4))

    def test_as_generator(self):
        gen = np.random.default_rng(0)
        assert as_generator(gen) is gen
        assert as_generator(RandomStream(9)).random() == RandomStream(9).generator(0).random()


class TestChunkSizes:
    def test_default_chunk_holds_a_million_draws(self):
        runner = TrialRunner(max_workers=1)
        assert runner.chunk_sizes(3 * 2**20, 1) == [2**20] * 3
        assert runner.chunk_sizes(10, 4) == [10]

    def test_remainder_chunk(self):
        runner = TrialRunner(max_workers=1, chunk_elements=100)
        assert runner.chunk_sizes(250, 4) == [25] * 10
        assert runner.chunk_sizes(260, 4) == [25] * 10 + [10]

    def test_huge_m_still_draws_one_trial_per_chunk(self):
        assert TrialRunner(max_workers=1, chunk_elements=8).chunk_sizes(3, 100) == [1, 1, 1]

    def test_invalid(self):
        with pytest.raises(DomainError):
            TrialRunner(max_workers=1).chunk_sizes(0, 1)
        with pytest.raises(DomainError):
            TrialRunner(max_workers=-1)


class TestRun:
    def test_worker_count_does_not_change_results(self):
        stream = RandomStream(2024)
        results = [
            TrialRunner(max_workers=w, chunk_elements=1000).run(10_500, 2, stream, normal_sum) for w in (1, 2, 7)
        ]
        assert results[0].tobytes() == results[1].tobytes() == results[2].tobytes()

    def test_sum_over_chunks(self):
        runner = TrialRunner(max_workers=3, chunk_elements=64)
        counts = runner.run(1000, 1, RandomStream(1), lambda n, gen: np.array([n]))
        assert counts.tolist() == [1000]
        assert runner.get_stats()["completed"] == len(runner.chunk_sizes(1000, 1))

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv("RISALIGN_WORKERS", "3")
        assert TrialRunner().max_workers == 3

    def test_failed_chunk(self):
        def task(n, gen):
            if n < 10:
                raise RuntimeError("boom")
            return np.array([n])

        runner = TrialRunner(max_workers=2, chunk_elements=10)
        with pytest.raises(SimulationError) as excinfo:
            runner.run(25, 1, RandomStream(1), task)
        assert "boom" in str(excinfo.value)
        assert excinfo.value.details["failed_chunks"] == [2]
        assert runner.get_stats()["error"] == 1

    def test_cancelled_run(self):
        runner = TrialRunner(max_workers=1, chunk_elements=10)
        started = threading.Event()

        def task(n, gen):
            if not started.is_set():
                started.set()
                runner.cancel()
            return np.array([n])

        with pytest.raises(SimulationError, match="cancelled"):
            runner.run(100, 1, RandomStream(1), task)
        stats = runner.get_stats()
        assert stats["completed"] == 1
        assert stats["cancelled"] == 9

    def test_chunk_results_record_status(self):
        runner = TrialRunner(max_workers=1, chunk_elements=10)
        runner.run(20, 1, RandomStream(1), lambda n, gen: np.array([n]))
        assert all(r.status == ChunkStatus.COMPLETED for r in runner.chunk_results.values())
