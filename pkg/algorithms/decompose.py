# algorithms/decompose.py
"""
Split aggregated group flows into per-commodity path distributions.

Paths are peeled from a group's residual flow by a depth-first search from
the origin that follows the lowest-index arc with positive residual and
backtracks out of dead ends. The virtual arc from a node to the
super-destination (its remaining destination demand) is tried after the
node's real arcs. The peeled (path, amount) list depends on the flow alone;
the commodity order only decides which member absorbs which peeled path:
members earlier in the order get first pick of a single covering path.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from flow.core import Graph, Instance, Path
from flow.errors import ConservationError
from lp.model import FLOW_TOL, FractionalSolution, OriginGroup

logger = logging.getLogger(__name__)

# residual below this share of the group supply counts as empty
PEEL_TOL = 1e-9

Support = Tuple[Tuple[Path, float], ...]


@dataclass(frozen=True)
class PathDistribution:
    """Commodity id → ((path, weight), ...); weights of a commodity sum to 1."""
    support: Mapping[int, Support]

    def paths_of(self, commodity: int) -> Support:
        try:
            return self.support[commodity]
        except KeyError:
            raise KeyError(f"commodity {commodity} has no path distribution") from None

    def is_split(self, commodity: int) -> bool:
        return len(self.paths_of(commodity)) >= 2

    def commodities(self) -> List[int]:
        return sorted(self.support)


def peel_path(graph: Graph, residual: np.ndarray, origin: int, sink: np.ndarray,
              tol: float = 0.0) -> Optional[Tuple[Path, int, float]]:
    """
    Remove one origin→sink path from ``residual`` and ``sink`` in place.

    ``sink[v]`` is the flow node ``v`` may still send to the super-destination.
    Returns (path, terminal node, amount), or None when no residual path
    reaches a node with sink left (only circulations can remain).
    """
    heads = graph.heads
    visited = {origin}
    nodes = [origin]
    cursor = [0]
    path: List[int] = []
    while nodes:
        node = nodes[-1]
        arcs = graph.out_arcs[node]
        pos = cursor[-1]
        advanced = False
        while pos < len(arcs):
            arc = arcs[pos]
            pos += 1
            head = int(heads[arc])
            if residual[arc] > tol and head not in visited:
                cursor[-1] = pos
                visited.add(head)
                path.append(arc)
                nodes.append(head)
                cursor.append(0)
                advanced = True
                break
        if advanced:
            continue
        if path and sink[node] > tol:
            amount = float(min(residual[path].min(), sink[node]))
            residual[path] -= amount
            sink[node] -= amount
            return tuple(path), node, amount
        nodes.pop()
        cursor.pop()
        if path:
            path.pop()
    return None


def _sink_demand(group: OriginGroup, node_count: int) -> np.ndarray:
    sink = np.zeros(node_count)
    np.add.at(sink, np.asarray(group.destinations, dtype=np.int64), np.asarray(group.demands))
    return sink


def _check_conservation(graph: Graph, group: OriginGroup, flow: np.ndarray, tol: float) -> None:
    balance = np.zeros(graph.node_count)
    np.add.at(balance, graph.tails, flow)
    np.subtract.at(balance, graph.heads, flow)
    balance += _sink_demand(group, graph.node_count)
    balance[group.origin] -= group.supply
    worst = int(np.argmax(np.abs(balance)))
    if abs(balance[worst]) > tol:
        raise ConservationError(group.origin, worst, float(balance[worst]))


def peel_group(graph: Graph, group: OriginGroup, flow: np.ndarray) -> List[Tuple[Path, int, float]]:
    """Every path of the group flow, in peel order, with its terminal node and amount."""
    scale = max(1.0, group.supply)
    _check_conservation(graph, group, flow, FLOW_TOL * scale)
    residual = np.array(flow, dtype=float)
    sink = _sink_demand(group, graph.node_count)
    tol = PEEL_TOL * scale

    peeled: List[Tuple[Path, int, float]] = []
    while True:
        found = peel_path(graph, residual, group.origin, sink, tol)
        if found is None:
            break
        peeled.append(found)

    stranded = int(np.argmax(sink))
    if sink[stranded] > FLOW_TOL * scale:
        raise ConservationError(group.origin, stranded, float(sink[stranded]))
    leftover = residual[residual > tol]
    if len(leftover):
        logger.debug("origin %d: cancelled circulation of total %.3g on %d arcs",
                     group.origin, float(leftover.sum()), len(leftover))
    return peeled


def attribute(group: OriginGroup, peeled: Sequence[Tuple[Path, int, float]],
              order: Sequence[int]) -> Dict[int, Support]:
    """
    Hand peeled paths to members, per destination, in ``order``.

    Each member takes the smallest single piece that covers its whole demand
    (earliest peeled on ties). Without one, it drains the largest pieces
    first, so members early in ``order`` are the least likely to be split.
    """
    by_destination: Dict[int, List[List]] = defaultdict(list)
    for index, (path, terminal, amount) in enumerate(peeled):
        by_destination[terminal].append([index, path, amount])

    demand_of = dict(zip(group.members, group.demands))
    destination_of = dict(zip(group.members, group.destinations))
    rank = {k: i for i, k in enumerate(order)}
    members = sorted(group.members, key=lambda k: (rank.get(k, len(rank)), k))

    result: Dict[int, Support] = {}
    for k in members:
        demand = demand_of[k]
        tol = FLOW_TOL * max(1.0, demand)
        pieces = by_destination[destination_of[k]]
        fitting = [piece for piece in pieces if piece[2] >= demand - tol]
        if fitting:
            chosen = [min(fitting, key=lambda piece: (piece[2], piece[0]))]
        else:
            chosen = sorted(pieces, key=lambda piece: (-piece[2], piece[0]))
        need = demand
        taken: Dict[Path, float] = {}
        for piece in chosen:
            if need <= tol:
                break
            share = min(need, piece[2])
            taken[piece[1]] = taken.get(piece[1], 0.0) + share
            need -= share
            piece[2] -= share
        by_destination[destination_of[k]] = [piece for piece in pieces if piece[2] > tol]
        total = sum(taken.values())
        if total <= 0:
            raise ConservationError(group.origin, destination_of[k], demand)
        result[k] = tuple((path, amount / total) for path, amount in taken.items())
    return result


def decompose(instance: Instance, solution: FractionalSolution,
              order: Optional[Sequence[int]] = None) -> PathDistribution:
    """Path distribution of every free commodity of ``solution``."""
    order = list(range(instance.commodity_count)) if order is None else list(order)
    support: Dict[int, Support] = {}
    for group, flow in zip(solution.groups, solution.group_arc_flow):
        peeled = peel_group(instance.graph, group, flow)
        support.update(attribute(group, peeled, order))
    return PathDistribution(support=support)


def arc_fractions(distribution: PathDistribution, commodity: int, arc_count: int) -> np.ndarray:
    """Share of the commodity's demand carried by every arc."""
    share = np.zeros(arc_count)
    for path, weight in distribution.paths_of(commodity):
        share[list(path)] += weight
    return share


def reconstruct(instance: Instance, distribution: PathDistribution,
                commodities: Optional[Sequence[int]] = None) -> np.ndarray:
    """Arc flow Σ weight·demand over the support of the given commodities."""
    ids = distribution.commodities() if commodities is None else commodities
    flow = np.zeros(instance.graph.arc_count)
    for k in ids:
        flow += arc_fractions(distribution, k, instance.graph.arc_count) * instance.commodities[k].demand
    return flow


def integral(paths: Mapping[int, Path]) -> PathDistribution:
    return PathDistribution(support={k: ((tuple(p), 1.0),) for k, p in paths.items()})
