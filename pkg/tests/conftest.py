import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bosefield import FockBasis, GridSpace, HamiltonianConfig, build_hamiltonian

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_grid():
    return GridSpace(8, 0.5)


@pytest.fixture(scope="session")
def default_basis(default_grid):
    return FockBasis(default_grid, 3)


@pytest.fixture(scope="session")
def default_f(default_grid):
    return default_grid.bump(1, 6)


@pytest.fixture(scope="session")
def default_ham(default_basis):
    return build_hamiltonian(default_basis, HamiltonianConfig())
