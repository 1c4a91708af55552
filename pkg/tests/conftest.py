import numpy as np
import pytest

from smpde.grid import Field, GridSpec


@pytest.fixture(scope="session")
def default_grid():
    """The standard rig: box [-10, 10], nx=1024, T=1, nt=256."""
    return GridSpec(-10.0, 10.0, 1024, 1.0, 256)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(-10.0, 10.0, 256, 1.0, 32)


@pytest.fixture(scope="session")
def unit_grid():
    """Aligned measure rig: one unit interval split into 1024 cells."""
    return GridSpec(0.0, 1.0, 1024, 0.01, 1)


def random_field(grid: GridSpec, seed: int, scale: float = 1.0) -> Field:
    rng = np.random.default_rng(seed)
    return Field(grid, scale * rng.normal(size=grid.nx))
