import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from micropolar.operators import leray_coeffs
from micropolar.spectral import ScalarField, SpectralVectorField, dealias_mask, forward, make_grid

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_vector(grid, seed, band=True, solenoidal=False):
    rng = np.random.default_rng(seed)
    c = forward(grid, rng.standard_normal((3, *grid.shape)))
    if band:
        c = c * dealias_mask(grid)
    if solenoidal:
        c = leray_coeffs(grid, c)
    return SpectralVectorField(grid, c)


def random_scalar(grid, seed, band=True):
    rng = np.random.default_rng(seed)
    c = forward(grid, rng.standard_normal(grid.shape))
    if band:
        c = c * dealias_mask(grid)
    return ScalarField(grid, c)


@pytest.fixture(scope="session")
def grid8():
    return make_grid(8, 1.0)


@pytest.fixture(scope="session")
def grid16():
    return make_grid(16, 4.0)


def full(grid, a):
    """Broadcast coordinate expressions to the full sample shape."""
    return np.broadcast_to(a, grid.shape).copy()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
