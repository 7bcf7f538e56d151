import pytest

from processing.graph import WeightedGraph
from utils import topologies


@pytest.fixture
def k3():
    return topologies.complete(3)


@pytest.fixture
def weighted_triangle():
    # a=0, b=1, c=2 with ab=1, bc=2, ca=3
    return WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0)])


@pytest.fixture
def k4():
    return topologies.complete(4)


@pytest.fixture
def k6():
    return topologies.complete(6)


@pytest.fixture
def c4():
    return topologies.cycle(4)


@pytest.fixture
def c8():
    return topologies.cycle(8)


@pytest.fixture
def path5():
    return topologies.path(5)


@pytest.fixture
def star():
    return WeightedGraph.from_edges(5, [(0, v, 1.0) for v in range(1, 5)])
