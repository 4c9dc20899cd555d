import os
import tempfile

import numpy as np
import pytest

from kreinlab.grids import RadialGrid, SpectralGrid
from kreinlab.krein import integrate_krein, make_coefficient, spectral_density, szego

_CACHE = tempfile.mkdtemp(prefix="kreinlab-test-cache-")
os.environ["KREINLAB_CACHE"] = _CACHE

ACCEPTANCE_LINES = []


def solve(kind, params=None, r_step=0.01, r_max=12.0, k_max=50.0, k_step=0.05):
    rg = RadialGrid.from_extent(r_step, r_max)
    kg = SpectralGrid(k_max, k_step)
    A = make_coefficient(kind, params or {}, rg)
    sol = integrate_krein(A, rg, kg)
    Pi = szego(sol)
    return sol, Pi, spectral_density(Pi)


@pytest.fixture(scope="session")
def free_sol():
    return solve("zero")


@pytest.fixture(scope="session")
def gauss_sol():
    return solve("gaussian")


@pytest.fixture(scope="session")
def bump_sol():
    return solve("bump")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
