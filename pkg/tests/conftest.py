import numpy as np
import pytest

from h2sync.graph import WeightedGraph, laplacian, spectrum
from h2sync.network import AgentDynamics
from helpers import ACCEPTANCE_LOG


@pytest.fixture
def scalar_agent():
    """A = 0, B = 1, C = (1, 0), D = (0, 1), E = 1."""
    return AgentDynamics([[0.0]], [[1.0]], [[1.0], [0.0]], [[0.0], [1.0]], [[1.0]])


@pytest.fixture
def p2():
    return WeightedGraph(2, ((1, 2, 1.0),))


@pytest.fixture
def p3():
    return WeightedGraph(3, ((1, 2, 1.0), (2, 3, 1.0)))


@pytest.fixture
def p2_spectrum(p2):
    return spectrum(laplacian(p2))


@pytest.fixture
def p3_spectrum(p3):
    return spectrum(laplacian(p3))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
