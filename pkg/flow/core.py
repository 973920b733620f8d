# flow/core.py
"""
Domain types for unsplittable multi-commodity flow and solution evaluation.

Arcs are identified by their position in ``Graph.arcs``; that index is used by
the file format, the LP columns and every report. Parallel arcs are allowed.
All types are immutable once built and safe to share between workers.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from flow.errors import InvalidPathError

Path = Tuple[int, ...]

# tolerance used when comparing loads against capacities
LOAD_TOL = 1e-9


@dataclass(frozen=True)
class Graph:
    node_count: int
    arcs: Tuple[Tuple[int, int], ...]
    capacity: Tuple[float, ...]

    @property
    def arc_count(self) -> int:
        return len(self.arcs)

    @cached_property
    def capacities(self) -> np.ndarray:
        return np.asarray(self.capacity, dtype=float)

    @cached_property
    def tails(self) -> np.ndarray:
        return np.fromiter((a[0] for a in self.arcs), dtype=np.int64, count=len(self.arcs))

    @cached_property
    def heads(self) -> np.ndarray:
        return np.fromiter((a[1] for a in self.arcs), dtype=np.int64, count=len(self.arcs))

    @cached_property
    def out_arcs(self) -> Tuple[Tuple[int, ...], ...]:
        """Outgoing arc indices per node, in increasing index order."""
        out: List[List[int]] = [[] for _ in range(self.node_count)]
        for idx, (tail, _) in enumerate(self.arcs):
            out[tail].append(idx)
        return tuple(tuple(a) for a in out)

    @cached_property
    def in_arcs(self) -> Tuple[Tuple[int, ...], ...]:
        inc: List[List[int]] = [[] for _ in range(self.node_count)]
        for idx, (_, head) in enumerate(self.arcs):
            inc[head].append(idx)
        return tuple(tuple(a) for a in inc)

    @property
    def min_capacity(self) -> float:
        return float(min(self.capacity))


@dataclass(frozen=True)
class Commodity:
    origin: int
    destination: int
    demand: float


@dataclass(frozen=True)
class Instance:
    graph: Graph
    commodities: Tuple[Commodity, ...]
    witness: Optional[Tuple[Path, ...]] = None

    @property
    def commodity_count(self) -> int:
        return len(self.commodities)

    @cached_property
    def demands(self) -> np.ndarray:
        return np.asarray([c.demand for c in self.commodities], dtype=float)

    @property
    def total_demand(self) -> float:
        return float(self.demands.sum())

    @property
    def max_demand(self) -> float:
        return float(self.demands.max()) if self.commodities else 0.0

    def origins(self) -> List[int]:
        """Distinct commodity origins, sorted."""
        return sorted({c.origin for c in self.commodities})


@dataclass(frozen=True)
class PathAssignment:
    paths: Tuple[Path, ...]


@dataclass(frozen=True)
class Metrics:
    overflow_sum: float
    congestion: float
    per_arc_load: Tuple[float, ...] = field(repr=False)
    total_demand: float = 0.0

    @property
    def overflow_ratio(self) -> float:
        """Overflow divided by the total demand."""
        if self.total_demand <= 0:
            return 0.0
        return self.overflow_sum / self.total_demand


def check_path(graph: Graph, commodity: Commodity, path: Sequence[int], index: int) -> None:
    """Raise InvalidPathError unless ``path`` is a simple origin→destination arc walk."""
    if len(path) == 0:
        raise InvalidPathError(index, "empty path")
    node = commodity.origin
    seen = {node}
    for arc in path:
        if not 0 <= arc < graph.arc_count:
            raise InvalidPathError(index, f"unknown arc {arc}")
        tail, head = graph.arcs[arc]
        if tail != node:
            raise InvalidPathError(index, f"arc {arc} does not leave node {node}")
        if head in seen:
            raise InvalidPathError(index, f"path revisits node {head}")
        seen.add(head)
        node = head
    if node != commodity.destination:
        raise InvalidPathError(index, f"path ends at {node}, expected {commodity.destination}")


def arc_loads(instance: Instance, paths: Sequence[Sequence[int]]) -> np.ndarray:
    loads = np.zeros(instance.graph.arc_count)
    for commodity, path in zip(instance.commodities, paths):
        loads[list(path)] += commodity.demand
    return loads


def metrics_from_loads(instance: Instance, loads: np.ndarray) -> Metrics:
    caps = instance.graph.capacities
    overflow = np.maximum(0.0, loads - caps)
    congestion = float(np.max(loads / caps)) if len(caps) else 0.0
    return Metrics(
        overflow_sum=float(overflow.sum()),
        congestion=congestion,
        per_arc_load=tuple(float(x) for x in loads),
        total_demand=instance.total_demand,
    )


def evaluate(instance: Instance, assignment: PathAssignment) -> Metrics:
    """Loads, overflow sum and congestion of an unsplittable routing."""
    if len(assignment.paths) != instance.commodity_count:
        raise ValueError(
            f"assignment has {len(assignment.paths)} paths for "
            f"{instance.commodity_count} commodities"
        )
    for k, (commodity, path) in enumerate(zip(instance.commodities, assignment.paths)):
        check_path(instance.graph, commodity, path, k)
    return metrics_from_loads(instance, arc_loads(instance, assignment.paths))


def validate_instance(instance: Instance) -> List[str]:
    """Human readable list of violated instance rules (empty when valid)."""
    diagnostics: List[str] = []
    graph = instance.graph
    n = graph.node_count

    if len(graph.capacity) != graph.arc_count:
        diagnostics.append(
            f"capacity list has {len(graph.capacity)} entries for {graph.arc_count} arcs"
        )
    for e, (tail, head) in enumerate(graph.arcs):
        if not (0 <= tail < n and 0 <= head < n):
            diagnostics.append(f"arc {e} ({tail}->{head}) has an endpoint outside [0, {n})")
    for e, cap in enumerate(graph.capacity):
        if not cap > 0:
            diagnostics.append(f"arc {e} has nonpositive capacity {cap}")

    for k, c in enumerate(instance.commodities):
        if not (0 <= c.origin < n and 0 <= c.destination < n):
            diagnostics.append(f"commodity {k} has an endpoint outside [0, {n})")
        if c.origin == c.destination:
            diagnostics.append(f"commodity {k} has origin equal to destination ({c.origin})")
        if not c.demand > 0:
            diagnostics.append(f"commodity {k} has nonpositive demand {c.demand}")

    if instance.witness is not None and not diagnostics:
        if len(instance.witness) != instance.commodity_count:
            diagnostics.append(
                f"witness has {len(instance.witness)} paths for "
                f"{instance.commodity_count} commodities"
            )
            return diagnostics
        bad_path = False
        for k, (c, path) in enumerate(zip(instance.commodities, instance.witness)):
            try:
                check_path(graph, c, path, k)
            except InvalidPathError as exc:
                diagnostics.append(f"witness path invalid: {exc}")
                bad_path = True
        if not bad_path:
            loads = arc_loads(instance, instance.witness)
            excess = loads - graph.capacities
            for e in np.flatnonzero(excess > LOAD_TOL):
                diagnostics.append(
                    f"witness routing exceeds capacity of arc {int(e)} by {float(excess[e]):g}"
                )
    return diagnostics


def group_by_origin(instance: Instance, commodities: Sequence[int]) -> Dict[int, List[int]]:
    """Commodity ids keyed by origin, both in increasing order."""
    groups: Dict[int, List[int]] = {}
    for k in sorted(commodities):
        groups.setdefault(instance.commodities[k].origin, []).append(k)
    return dict(sorted(groups.items()))


def decreasing_demand_order(instance: Instance, commodities: Optional[Sequence[int]] = None) -> List[int]:
    """Commodity ids by decreasing demand; ties break by index."""
    ids = range(instance.commodity_count) if commodities is None else commodities
    return sorted(ids, key=lambda k: (-instance.commodities[k].demand, k))
