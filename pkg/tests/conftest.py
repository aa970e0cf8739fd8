import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from diffeoflow import Grid

# one suite-wide profile: deterministic, no per-example deadline (numpy
# warm-up would trip it), example counts sized for the 60 s suite budget
settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def line_grid():
    """1-D reference grid: dyadic spacing 1/16, classification-capable box."""
    return Grid(1, 8.0, 257)


@pytest.fixture(scope="session")
def fine_grid():
    return Grid(1, 8.0, 513)


@pytest.fixture(scope="session")
def coarse_grid():
    """Small 1-D grid for per-example hypothesis work."""
    return Grid(1, 8.0, 65)


@pytest.fixture(scope="session")
def plane_grid():
    return Grid(2, 8.0, 65)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
