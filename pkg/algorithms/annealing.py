# algorithms/annealing.py
"""
Simulated annealing over precomputed k-shortest candidate paths.

The state picks one candidate per commodity; the cost is the overflow sum.
A move re-routes one random commodity onto one of its candidates (its current
path included). The temperature is multiplied by a constant factor so that
it goes from ``t_initial`` to ``t_final`` over the iteration budget.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from flow.core import Graph, Instance, Metrics, Path, PathAssignment, arc_loads, evaluate
from utils.console import emit_status

logger = logging.getLogger(__name__)

SA_FACTOR = 2.0
SA2_FACTOR = 6.0


@dataclass(frozen=True)
class SaConfig:
    k_paths: int = 10
    t_initial: float = 200.0
    t_final: float = 1.0
    iterations: Optional[int] = None
    iteration_factor: float = SA_FACTOR
    seed: int = 0
    check_every: int = 1000

    def __post_init__(self):
        if not self.t_initial > self.t_final > 0:
            raise ValueError("temperatures must satisfy t_initial > t_final > 0")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")
        if self.k_paths < 1:
            raise ValueError(f"k_paths must be at least 1, got {self.k_paths}")

    def resolved_iterations(self, commodity_count: int) -> int:
        if self.iterations is not None:
            return self.iterations
        return max(1, math.ceil(self.iteration_factor * commodity_count ** 1.5))


@dataclass(frozen=True, eq=False)
class SaOutcome:
    assignment: PathAssignment
    metrics: Metrics
    iterations: int
    accepted: int
    best_trace: Tuple[float, ...]
    max_drift: float


def _simple_digraph(graph: Graph) -> Tuple[nx.DiGraph, Dict[Tuple[int, int], List[int]]]:
    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(graph.node_count))
    parallel: Dict[Tuple[int, int], List[int]] = {}
    for idx, (tail, head) in enumerate(graph.arcs):
        if tail == head:
            continue
        parallel.setdefault((tail, head), []).append(idx)
        digraph.add_edge(tail, head)
    return digraph, parallel


def k_shortest_paths(graph: Graph, origin: int, destination: int, k: int,
                     _cache: Optional[Tuple[nx.DiGraph, Dict]] = None) -> List[Path]:
    """
    Up to k loopless origin→destination arc paths, fewest hops first.

    Ties break on the arc index sequence. Parallel arcs give distinct paths.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    digraph, parallel = _cache or _simple_digraph(graph)
    generator = nx.shortest_simple_paths(digraph, origin, destination)
    found: List[Path] = []
    try:
        for nodes in generator:
            hops = len(nodes) - 1
            # hop counts arrive nondecreasing; the k best are settled once they grow
            if len(found) >= k and hops > len(found[-1]):
                break
            choices = [parallel[(u, v)] for u, v in zip(nodes, nodes[1:])]
            found.extend(itertools.product(*choices))
    except nx.NetworkXNoPath:
        raise ValueError(f"node {destination} is unreachable from {origin}") from None
    found.sort(key=lambda p: (len(p), p))
    return found[:k]


def candidate_paths(instance: Instance, k: int) -> List[List[Path]]:
    """Candidate list per commodity; pairs sharing endpoints share the list."""
    cache = _simple_digraph(instance.graph)
    by_pair: Dict[Tuple[int, int], List[Path]] = {}
    out: List[List[Path]] = []
    for c in instance.commodities:
        pair = (c.origin, c.destination)
        if pair not in by_pair:
            by_pair[pair] = k_shortest_paths(instance.graph, c.origin, c.destination, k, cache)
        out.append(by_pair[pair])
    return out


def _overflow(load: np.ndarray, caps: np.ndarray) -> float:
    return float(np.maximum(0.0, load - caps).sum())


def run_sa(instance: Instance, config: Optional[SaConfig] = None,
           candidates: Optional[Sequence[Sequence[Path]]] = None,
           on_status: Optional[Callable[[str], None]] = None) -> SaOutcome:
    config = config or SaConfig()
    if candidates is None:
        candidates = candidate_paths(instance, config.k_paths)
    if any(len(c) == 0 for c in candidates):
        raise ValueError("every commodity needs at least one candidate path")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    K = instance.commodity_count
    caps = instance.graph.capacities
    demands = instance.demands
    iterations = config.resolved_iterations(K)
    cooling = (config.t_final / config.t_initial) ** (1.0 / iterations)
    arrays = [[np.asarray(p, dtype=np.int64) for p in cands] for cands in candidates]

    choice = np.array([int(rng.integers(len(c))) for c in candidates], dtype=np.int64)
    loads = arc_loads(instance, [candidates[k][choice[k]] for k in range(K)])
    cost = _overflow(loads, caps)
    best_cost, best_choice = cost, choice.copy()
    best_trace: List[float] = [best_cost]
    temperature = config.t_initial
    accepted = 0
    max_drift = 0.0

    for it in range(1, iterations + 1):
        k = int(rng.integers(K))
        j = int(rng.integers(len(candidates[k])))
        old, new = arrays[k][choice[k]], arrays[k][j]
        removed = np.setdiff1d(old, new, assume_unique=True)
        added = np.setdiff1d(new, old, assume_unique=True)
        d = demands[k]
        before = _overflow(loads[removed], caps[removed]) + _overflow(loads[added], caps[added])
        after = (_overflow(loads[removed] - d, caps[removed])
                 + _overflow(loads[added] + d, caps[added]))
        delta = after - before

        if delta <= 0 or rng.random() < math.exp(-delta / temperature):
            loads[removed] -= d
            loads[added] += d
            choice[k] = j
            cost += delta
            accepted += 1
            if cost < best_cost - 1e-12:
                best_cost, best_choice = cost, choice.copy()
        temperature *= cooling

        if it % config.check_every == 0:
            # resync incremental bookkeeping with a full recount
            exact = arc_loads(instance, [candidates[q][choice[q]] for q in range(K)])
            exact_cost = _overflow(exact, caps)
            drift = abs(exact_cost - cost)
            max_drift = max(max_drift, drift)
            if drift > 1e-9 * max(1.0, instance.total_demand):
                logger.warning("annealing cost drifted by %.3g at iteration %d", drift, it)
            loads, cost = exact, exact_cost
            if cost < best_cost:
                best_cost, best_choice = cost, choice.copy()
            best_trace.append(best_cost)
            emit_status(on_status, f"Iteration {it}/{iterations}: best overflow {best_cost:g}")

    assignment = PathAssignment(paths=tuple(candidates[k][best_choice[k]] for k in range(K)))
    return SaOutcome(
        assignment=assignment,
        metrics=evaluate(instance, assignment),
        iterations=iterations,
        accepted=accepted,
        best_trace=tuple(best_trace),
        max_drift=max_drift,
    )
