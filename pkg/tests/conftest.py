import numpy as np
import pytest

from kplab.spectral import GridSpec


@pytest.fixture(scope="session")
def grid_small():
    """16^3 grid, unit frequency spacing."""
    return GridSpec(16, 16, 16, 2 * np.pi, 2 * np.pi, 2 * np.pi)


@pytest.fixture(scope="session")
def grid_aniso():
    """Anisotropic grid: fine in x (dxi = 1/4), unit in y."""
    return GridSpec(64, 16, 16, 8 * np.pi, 2 * np.pi, 2 * np.pi)


@pytest.fixture(scope="session")
def grid_solver():
    """Moderate-frequency grid used for time-stepping tests (dxi = 1/2)."""
    return GridSpec(24, 12, 12, 4 * np.pi, 4 * np.pi, 4 * np.pi)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240803)
