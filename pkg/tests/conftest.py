"""
Shared fixtures
"""

import pytest

from RisAlign.fading import BranchDistribution
from RisAlign.random_streams import RandomStream
from RisAlign.trial_runner import TrialRunner


@pytest.fixture
def rayleigh() -> BranchDistribution:
    return BranchDistribution.rayleigh(1.0)


@pytest.fixture
def unit_power_rayleigh() -> BranchDistribution:
    """b = 0.5, so E[h^2] = 1"""
    return BranchDistribution.rayleigh(0.5)


@pytest.fixture
def stream() -> RandomStream:
    return RandomStream(20240601)


@pytest.fixture
def runner() -> TrialRunner:
    return TrialRunner(max_workers=2)


@pytest.fixture
def log_dir(tmp_path) -> str:
    return str(tmp_path / "logs")
