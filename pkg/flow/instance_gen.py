# flow/instance_gen.py
"""
Seeded benchmark generators with a known zero-overflow optimum.

Two graph families are produced: toric grids with extra origin nodes and
sparse strongly connected random digraphs. Commodities are then added one at
a time along random residual paths until no origin can reach any
destination any more, so the generating paths (the witness) always fit in
the capacities.

Randomness comes from ``numpy.random.Generator`` on the PCG64 bit generator,
seeded with the spec seed; the same spec always yields the same instance.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from flow.core import Commodity, Graph, Instance, Path

logger = logging.getLogger(__name__)

# smallest demand that can be added; residual arcs below it are closed
MIN_DEMAND = 1


@dataclass(frozen=True)
class GridSpec:
    n: int
    seed: int = 0
    capacity: float = 10_000
    max_demand: int = 1500

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid side must be at least 2, got {self.n}")
        if self.capacity <= 0 or self.max_demand < 1:
            raise ValueError("capacity and max_demand must be positive")

    @property
    def m(self) -> int:
        return self.n

    @property
    def p(self) -> int:
        return self.n

    @property
    def q(self) -> int:
        return 2 * self.n


@dataclass(frozen=True)
class RandomGraphSpec:
    node_count: int
    seed: int = 0
    average_degree: float = 5.0
    origin_probability: float = 0.1
    capacity: float = 10_000
    max_demand: int = 1500

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError(f"a random instance needs at least 2 nodes, got {self.node_count}")
        if self.average_degree < 2:
            raise ValueError(f"average_degree must be at least 2, got {self.average_degree}")
        if self.average_degree > self.node_count - 1:
            raise ValueError("average_degree cannot exceed node_count - 1 without parallel arcs")
        if not 0 < self.origin_probability <= 1:
            raise ValueError("origin_probability must lie in (0, 1]")
        if self.capacity <= 0 or self.max_demand < 1:
            raise ValueError("capacity and max_demand must be positive")


def _make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _residual_dtype(capacities: Sequence[float]):
    return np.int64 if all(float(c).is_integer() for c in capacities) else float


# -----------------------
# Demand generation
# -----------------------
def _origins_reaching(graph: Graph, residual: np.ndarray, target: int,
                      origin_mask: np.ndarray) -> List[int]:
    """Origins with a residual path (every arc >= MIN_DEMAND) to ``target``."""
    seen = np.zeros(graph.node_count, dtype=bool)
    seen[target] = True
    stack = [target]
    found: List[int] = []
    tails = graph.tails
    while stack:
        node = stack.pop()
        if origin_mask[node]:
            found.append(node)
        for arc in graph.in_arcs[node]:
            if residual[arc] >= MIN_DEMAND:
                tail = tails[arc]
                if not seen[tail]:
                    seen[tail] = True
                    stack.append(int(tail))
    return sorted(found)


def _random_dfs_path(graph: Graph, residual: np.ndarray, origin: int, target: int,
                     rng: np.random.Generator) -> Path:
    """Simple residual path found by a depth-first search with random visit order."""
    heads = graph.heads
    visited = {origin}

    def arcs_of(node: int) -> List[int]:
        return [a for a in graph.out_arcs[node] if residual[a] >= MIN_DEMAND]

    first = arcs_of(origin)
    stack: List[Tuple[List[int], int]] = [([first[i] for i in rng.permutation(len(first))], 0)]
    path: List[int] = []
    while stack:
        candidates, pos = stack[-1]
        if pos >= len(candidates):
            stack.pop()
            if path:
                path.pop()
            continue
        stack[-1] = (candidates, pos + 1)
        arc = candidates[pos]
        head = int(heads[arc])
        if head in visited:
            continue
        visited.add(head)
        path.append(arc)
        if head == target:
            return tuple(path)
        nxt = arcs_of(head)
        stack.append(([nxt[i] for i in rng.permutation(len(nxt))], 0))
    raise RuntimeError(f"no residual path from {origin} to {target}")


def generate_demands(graph: Graph, origins: Sequence[int], max_demand: int,
                     seed: Optional[int] = None,
                     capacities: Optional[Sequence[float]] = None,
                     rng: Optional[np.random.Generator] = None
                     ) -> Tuple[Tuple[Commodity, ...], Tuple[Path, ...]]:
    """
    Add commodities until saturation and return them with their generating paths.

    Destinations are drawn uniformly among non-origin nodes that some origin
    can still reach; the origin uniformly among those reaching it. Demands
    are integers uniform on [1, max_demand], truncated to the residual
    capacity of the drawn path.
    """
    if not origins:
        raise ValueError("at least one origin is required")
    if rng is None:
        rng = _make_rng(0 if seed is None else seed)
    caps = list(graph.capacity if capacities is None else capacities)
    if any(c <= 0 for c in caps):
        raise ValueError("capacities must be positive")
    residual = np.asarray(caps, dtype=_residual_dtype(caps))

    origin_mask = np.zeros(graph.node_count, dtype=bool)
    origin_mask[list(origins)] = True
    live = [v for v in range(graph.node_count) if not origin_mask[v]]

    commodities: List[Commodity] = []
    witness: List[Path] = []
    while live:
        pick = int(rng.integers(len(live)))
        destination = live[pick]
        reaching = _origins_reaching(graph, residual, destination, origin_mask)
        if not reaching:
            # residuals only shrink, so the destination stays unreachable
            live.pop(pick)
            continue
        origin = reaching[int(rng.integers(len(reaching)))]
        path = _random_dfs_path(graph, residual, origin, destination, rng)
        bottleneck = residual[list(path)].min()
        demand = min(int(rng.integers(1, max_demand + 1)), bottleneck)
        residual[list(path)] -= demand
        commodities.append(Commodity(origin=origin, destination=destination, demand=float(demand)))
        witness.append(path)

    logger.debug("generated %d commodities from %d origins", len(commodities), len(origins))
    return tuple(commodities), tuple(witness)


# -----------------------
# Graph families
# -----------------------
def grid_arcs(n: int) -> List[Tuple[int, int]]:
    """Toric n×n grid, each edge to the right and downward as an arc pair."""
    arcs: List[Tuple[int, int]] = []
    for row in range(n):
        for col in range(n):
            v = row * n + col
            right = row * n + (col + 1) % n
            down = ((row + 1) % n) * n + col
            arcs.extend([(v, right), (right, v), (v, down), (down, v)])
    return arcs


def generate_grid(spec: GridSpec) -> Instance:
    rng = _make_rng(spec.seed)
    n = spec.n
    grid_nodes = n * spec.m
    arcs = grid_arcs(n)
    origins = list(range(grid_nodes, grid_nodes + spec.p))
    for origin in origins:
        for target in sorted(rng.choice(grid_nodes, size=spec.q, replace=False)):
            arcs.append((origin, int(target)))

    graph = Graph(
        node_count=grid_nodes + spec.p,
        arcs=tuple(arcs),
        capacity=tuple(float(spec.capacity) for _ in arcs),
    )
    commodities, witness = generate_demands(graph, origins, spec.max_demand, rng=rng)
    return Instance(graph=graph, commodities=commodities, witness=witness)


def generate_random_connected(spec: RandomGraphSpec) -> Instance:
    rng = _make_rng(spec.seed)
    n = spec.node_count
    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(n))
    arcs: List[Tuple[int, int]] = []

    # repair loop: link a node to something it cannot reach yet
    while not nx.is_strongly_connected(digraph):
        u = int(rng.integers(n))
        reachable = nx.descendants(digraph, u)
        unreachable = [v for v in range(n) if v != u and v not in reachable]
        if not unreachable:
            continue
        v = unreachable[int(rng.integers(len(unreachable)))]
        digraph.add_edge(u, v)
        arcs.append((u, v))

    target = int(np.ceil(spec.average_degree * n))
    while len(arcs) < target:
        u, v = (int(x) for x in rng.integers(n, size=2))
        if u == v or digraph.has_edge(u, v):
            continue
        digraph.add_edge(u, v)
        arcs.append((u, v))

    origin_mask = rng.random(n) < spec.origin_probability
    origins = [int(v) for v in np.flatnonzero(origin_mask)]
    if not origins:
        origins = [int(rng.integers(n))]
    if len(origins) == n:
        origins = origins[:-1]

    graph = Graph(node_count=n, arcs=tuple(arcs),
                  capacity=tuple(float(spec.capacity) for _ in arcs))
    commodities, witness = generate_demands(graph, origins, spec.max_demand, rng=rng)
    return Instance(graph=graph, commodities=commodities, witness=witness)
