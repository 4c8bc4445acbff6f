import numpy as np
import pytest

from consensus_filter_design import graphgen
from consensus_filter_design.graphgen import ErdosRenyiParams, Graph


@pytest.fixture
def edge2():
    """Single edge on two nodes."""
    return Graph(2, [(0, 1)])


@pytest.fixture
def k3():
    return Graph(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def path3():
    """Path 0 - 1 - 2, degrees (1, 2, 1)."""
    return Graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def path5():
    return Graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])


@pytest.fixture
def cycle5():
    return Graph(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])


@pytest.fixture
def er50():
    """Connected ER(50, 0.2) instance."""
    return graphgen.generate_connected(ErdosRenyiParams(50, 0.2), 11)


@pytest.fixture
def er200():
    return graphgen.generate_connected(ErdosRenyiParams(200, 0.1), 5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
