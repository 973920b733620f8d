import pytest

from flow.core import Commodity, Graph, Instance
from flow.instance_gen import GridSpec, generate_grid


def make_instance(node_count, arcs, commodities, witness=None):
    graph = Graph(
        node_count=node_count,
        arcs=tuple((t, h) for t, h, _ in arcs),
        capacity=tuple(float(c) for _, _, c in arcs),
    )
    return Instance(
        graph=graph,
        commodities=tuple(Commodity(o, d, float(q)) for o, d, q in commodities),
        witness=None if witness is None else tuple(tuple(p) for p in witness),
    )


@pytest.fixture
def single_arc():
    return make_instance(2, [(0, 1, 5)], [(0, 1, 3)], witness=[(0,)])


@pytest.fixture
def parallel_pair():
    """Two unit arcs 0->1 and two unit commodities: routable without overflow."""
    return make_instance(2, [(0, 1, 1), (0, 1, 1)], [(0, 1, 1), (0, 1, 1)], witness=[(0,), (1,)])


@pytest.fixture
def path_graph():
    return make_instance(3, [(0, 1, 10), (1, 2, 10)], [(0, 2, 3)], witness=[(0, 1)])


@pytest.fixture
def diamond():
    # 0 -> {1, 2} -> 3, unit capacities, two unit commodities from 0 to 3
    return make_instance(
        4,
        [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)],
        [(0, 3, 1), (0, 3, 1)],
        witness=[(0, 2), (1, 3)],
    )


@pytest.fixture
def two_origins():
    # origins 0 and 1 share the middle arc 2 -> 3
    return make_instance(
        5,
        [(0, 2, 4), (1, 2, 4), (2, 3, 4), (3, 4, 4), (0, 4, 2), (1, 3, 4)],
        [(0, 4, 2), (0, 3, 1), (1, 4, 2), (1, 3, 1)],
        witness=[(4,), (0, 2), (5, 3), (1, 2)],
    )


@pytest.fixture
def small_grid():
    return generate_grid(GridSpec(n=3, seed=7, capacity=20, max_demand=5))
