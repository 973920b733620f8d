# lp/model.py
"""
Aggregated arc-node linear relaxation of the unsplittable flow problem.

Free commodities sharing an origin form one group. Each group owns one flow
column per arc it can use plus one virtual column per member, running from
the member's destination to an implicit super-destination with bounds
[0, demand]. Conservation is written at every real node the group touches
(supply at the origin, zero elsewhere); the super-destination row follows
from the others and is left out. Fixed commodities do not get columns: their
loads are folded into the capacity rows as constants.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path as FsPath
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from flow.core import Instance, Path, check_path, group_by_origin
from flow.errors import CsrrInfeasibleError, LpBackendError, RelaxationInfeasibleError
from lp.backend import LpProblem, LpStatus, get_backend

logger = logging.getLogger(__name__)

# conservation / reconstruction tolerance
FLOW_TOL = 1e-6
# slack below which a restricted row counts as active
ACTIVE_TOL = 1e-6
# absolute slack on the congestion bound of the second mixed stage
MIXED_SLACK = 1e-9
# relative slack on the optimum held fixed by the least-flow stage
TIE_SLACK = 1e-7


class Objective(Enum):
    OVERFLOW_SUM = "overflow"
    CONGESTION = "congestion"
    MIXED = "mixed"

    @classmethod
    def from_name(cls, name: Union[str, "Objective"]) -> "Objective":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {"overflow": cls.OVERFLOW_SUM, "overflow_sum": cls.OVERFLOW_SUM,
                   "congestion": cls.CONGESTION, "mixed": cls.MIXED}
        if key not in aliases:
            raise ValueError(f"Unknown objective: {name}")
        return aliases[key]


@dataclass(frozen=True)
class OriginGroup:
    origin: int
    members: Tuple[int, ...]
    demands: Tuple[float, ...]
    destinations: Tuple[int, ...]

    @property
    def supply(self) -> float:
        return float(sum(self.demands))


@dataclass(frozen=True, eq=False)
class CsrrConfig:
    """
    Restriction of the free load per arc for the constrained variant.

    ``footprints`` maps each fixed commodity to its fractional per-arc flow
    (share of its demand on every arc) at the moment it was fixed.
    """
    delta_star: float
    beta: float = 1.0
    footprints: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.delta_star > 0:
            raise ValueError(f"delta_star must be positive, got {self.delta_star}")
        if self.beta < 1:
            raise ValueError(f"beta must be at least 1, got {self.beta}")


@dataclass(frozen=True, eq=False)
class RelaxationConfig:
    objective: Objective = Objective.OVERFLOW_SUM
    csrr: Optional[CsrrConfig] = None
    # merge same-origin commodities into one group; False gives one group per commodity
    aggregate: bool = True
    # upper bound on the congestion column (second stage of the mixed objective)
    congestion_cap: Optional[float] = None
    # upper bound on the summed overflow (least-flow stage)
    overflow_cap: Optional[float] = None
    # minimize the total free flow instead of the objective, under the caps above
    flow_stage: bool = False
    # after the objective is optimal, re-solve for the least total free flow
    tie_break: bool = True


@dataclass(frozen=True, eq=False)
class GroupColumns:
    group: OriginGroup
    arcs: np.ndarray
    arc_cols: np.ndarray
    sink_cols: np.ndarray


@dataclass(frozen=True, eq=False)
class Relaxation:
    """An LpProblem together with the map from its columns back to flows."""
    problem: LpProblem
    groups: Tuple[GroupColumns, ...]
    objective: Objective
    fixed_load: np.ndarray
    csrr_rows: slice = slice(0, 0)


@dataclass(frozen=True, eq=False)
class FractionalSolution:
    groups: Tuple[OriginGroup, ...]
    group_arc_flow: Tuple[np.ndarray, ...] = field(repr=False)
    sink_flow: Tuple[np.ndarray, ...] = field(repr=False)
    fixed_load: np.ndarray = field(repr=False)
    overflow: np.ndarray = field(repr=False)
    congestion_value: float = 0.0
    objective_value: float = 0.0
    delta_star: Optional[float] = None
    lp_solves: int = 1
    iterations: int = 0
    csrr_active_rows: Optional[int] = None

    @property
    def free_load(self) -> np.ndarray:
        if not self.group_arc_flow:
            return np.zeros_like(self.fixed_load)
        return np.sum(self.group_arc_flow, axis=0)

    @property
    def total_load(self) -> np.ndarray:
        return self.free_load + self.fixed_load

    @property
    def overflow_sum(self) -> float:
        return float(self.overflow.sum())


# -----------------------
# Builders
# -----------------------
def _check_partition(instance: Instance, fixed: Mapping[int, Path], free: Sequence[int]) -> None:
    fixed_ids = set(fixed)
    free_ids = set(free)
    if len(free_ids) != len(free):
        raise ValueError("free commodity set contains duplicates")
    if fixed_ids & free_ids:
        raise ValueError(f"commodities both fixed and free: {sorted(fixed_ids & free_ids)}")
    if fixed_ids | free_ids != set(range(instance.commodity_count)):
        raise ValueError("fixed and free commodities must cover every commodity exactly once")
    for k, path in fixed.items():
        check_path(instance.graph, instance.commodities[k], path, k)


def make_groups(instance: Instance, free: Sequence[int], aggregate: bool = True) -> Tuple[OriginGroup, ...]:
    if not aggregate:
        return tuple(
            OriginGroup(c.origin, (k,), (c.demand,), (c.destination,))
            for k, c in ((k, instance.commodities[k]) for k in sorted(free))
        )
    buckets = group_by_origin(instance, free)
    return tuple(
        OriginGroup(
            origin=origin,
            members=tuple(members),
            demands=tuple(instance.commodities[k].demand for k in members),
            destinations=tuple(instance.commodities[k].destination for k in members),
        )
        for origin, members in buckets.items()
    )


def _reachable(adjacency: Sequence[Sequence[int]], ends: np.ndarray,
               sources: Sequence[int], node_count: int) -> np.ndarray:
    seen = np.zeros(node_count, dtype=bool)
    stack = list(sources)
    seen[stack] = True
    while stack:
        node = stack.pop()
        for arc in adjacency[node]:
            nxt = int(ends[arc])
            if not seen[nxt]:
                seen[nxt] = True
                stack.append(nxt)
    return seen


def usable_arcs(instance: Instance, group: OriginGroup) -> np.ndarray:
    """Arcs on some origin→member-destination walk that does not re-enter the origin."""
    graph = instance.graph
    forward = _reachable(graph.out_arcs, graph.heads, [group.origin], graph.node_count)
    backward = _reachable(graph.in_arcs, graph.tails, group.destinations, graph.node_count)
    keep = forward[graph.tails] & backward[graph.heads] & (graph.heads != group.origin)
    return np.flatnonzero(keep)


class _Columns:
    def __init__(self):
        self.lower: List[float] = []
        self.upper: List[float] = []
        self.cost: List[float] = []
        self.names: List[str] = []

    def add(self, lower: float, upper: float, cost: float, name: str) -> int:
        self.lower.append(lower)
        self.upper.append(upper)
        self.cost.append(cost)
        self.names.append(name)
        return len(self.names) - 1

    def add_many(self, lower, upper, cost: float, names: Sequence[str]) -> np.ndarray:
        start = len(self.names)
        count = len(names)
        self.lower.extend(np.broadcast_to(np.asarray(lower, dtype=float), (count,)).tolist())
        self.upper.extend(np.broadcast_to(np.asarray(upper, dtype=float), (count,)).tolist())
        self.cost.extend([cost] * count)
        self.names.extend(names)
        return np.arange(start, start + count)


class _Rows:
    def __init__(self):
        self.rows: List[np.ndarray] = []
        self.cols: List[np.ndarray] = []
        self.vals: List[np.ndarray] = []
        self.rhs: List[float] = []
        self.names: List[str] = []

    @property
    def count(self) -> int:
        return len(self.rhs)

    def add(self, cols: np.ndarray, vals: np.ndarray, rhs: float, name: str) -> None:
        self.rows.append(np.full(len(cols), self.count, dtype=np.int64))
        self.cols.append(np.asarray(cols, dtype=np.int64))
        self.vals.append(np.asarray(vals, dtype=float))
        self.rhs.append(float(rhs))
        self.names.append(name)


def _conservation_rows(instance: Instance, group: OriginGroup, cols: _Columns,
                       rows: _Rows, arc_cost: float = 0.0) -> GroupColumns:
    graph = instance.graph
    arcs = usable_arcs(instance, group)
    tails, heads = graph.tails[arcs], graph.heads[arcs]
    o = group.origin
    arc_cols = cols.add_many(0.0, group.supply, arc_cost, [f"x[o={o},e={e}]" for e in arcs])
    sink_cols = cols.add_many(0.0, np.asarray(group.demands), 0.0,
                              [f"y[o={o},k={k}]" for k in group.members])

    dests = np.asarray(group.destinations, dtype=np.int64)
    nodes, local = np.unique(np.concatenate([[o], dests, tails, heads]), return_inverse=True)
    n_dest, n_arc = len(dests), len(arcs)
    dest_local = local[1:1 + n_dest]
    tail_local = local[1 + n_dest:1 + n_dest + n_arc]
    head_local = local[1 + n_dest + n_arc:]

    entry_node = np.concatenate([tail_local, head_local, dest_local])
    entry_col = np.concatenate([arc_cols, arc_cols, sink_cols])
    entry_val = np.concatenate([np.ones(n_arc), -np.ones(n_arc), np.ones(n_dest)])
    order = np.argsort(entry_node, kind="stable")
    bounds = np.searchsorted(entry_node[order], np.arange(len(nodes) + 1))
    for i, v in enumerate(nodes):
        sel = order[bounds[i]:bounds[i + 1]]
        rhs = group.supply if v == o else 0.0
        # equality as a pair of inequalities
        rows.add(entry_col[sel], entry_val[sel], rhs, f"flow+[o={o},v={v}]")
        rows.add(entry_col[sel], -entry_val[sel], -rhs, f"flow-[o={o},v={v}]")
    return GroupColumns(group=group, arcs=arcs, arc_cols=arc_cols, sink_cols=sink_cols)


def csrr_budget(instance: Instance, fixed: Mapping[int, Path], csrr: CsrrConfig) -> np.ndarray:
    """Per-arc room β·c_e·Δ* left for free flow after the recorded footprints of ``fixed``."""
    caps = instance.graph.capacities
    footprint_load = np.zeros(instance.graph.arc_count)
    for k in sorted(fixed):
        share = csrr.footprints.get(k)
        if share is None:
            raise ValueError(f"fixed commodity {k} has no recorded footprint")
        footprint_load += np.asarray(share, dtype=float) * instance.commodities[k].demand
    room = csrr.beta * caps * csrr.delta_star
    budget = room - footprint_load
    bad = np.flatnonzero(budget < -FLOW_TOL * np.maximum(1.0, room))
    if len(bad):
        e = int(bad[np.argmin(budget[bad])])
        raise CsrrInfeasibleError(
            f"restricted capacity of arc {e} is already exceeded by fixed footprints "
            f"({budget[e]:.6g})", arc=e)
    return np.maximum(budget, 0.0)


def build_relaxation(instance: Instance, fixed: Mapping[int, Path], free: Sequence[int],
                     config: Optional[RelaxationConfig] = None) -> Relaxation:
    """
    Relaxation over the free commodities with the fixed ones folded into constants.

    The mixed objective is built as its second stage (overflow objective with
    a capped congestion column) when ``config.congestion_cap`` is set, and as
    the pure congestion stage otherwise; ``solve_relaxation`` drives both.
    With ``config.flow_stage`` the cost moves to the free arc columns and the
    objective only survives through ``congestion_cap`` and ``overflow_cap``.
    """
    config = config or RelaxationConfig()
    _check_partition(instance, fixed, free)
    graph = instance.graph
    m = graph.arc_count
    caps = graph.capacities

    fixed_ids = sorted(fixed)
    fixed_load = np.zeros(m)
    for k in fixed_ids:
        fixed_load[list(fixed[k])] += instance.commodities[k].demand

    cols, rows = _Columns(), _Rows()
    groups = make_groups(instance, free, config.aggregate)
    arc_cost = 1.0 if config.flow_stage else 0.0
    layout = tuple(_conservation_rows(instance, g, cols, rows, arc_cost) for g in groups)

    # free columns per arc
    arc_entries = [gc.arcs for gc in layout]
    col_entries = [gc.arc_cols for gc in layout]
    all_arcs = np.concatenate(arc_entries) if arc_entries else np.zeros(0, dtype=np.int64)
    all_cols = np.concatenate(col_entries) if col_entries else np.zeros(0, dtype=np.int64)
    order = np.argsort(all_arcs, kind="stable")
    bounds = np.searchsorted(all_arcs[order], np.arange(m + 1))
    used = bounds[1:] > bounds[:-1]

    def free_cols(e: int) -> np.ndarray:
        return all_cols[order[bounds[e]:bounds[e + 1]]]

    objective = config.objective
    with_overflow = (objective is Objective.OVERFLOW_SUM or config.overflow_cap is not None or (
        objective is Objective.MIXED and config.congestion_cap is not None))
    with_congestion = not with_overflow or config.congestion_cap is not None
    over_cost = 0.0 if config.flow_stage else 1.0
    delta_cost = 0.0 if config.flow_stage or with_overflow else 1.0

    if with_overflow:
        over_cols = []
        for e in range(m):
            if used[e]:
                d = cols.add(0.0, np.inf, over_cost, f"over[e={e}]")
                fc = free_cols(e)
                rows.add(np.append(fc, d), np.append(np.ones(len(fc)), -1.0),
                         caps[e] - fixed_load[e], f"cap[e={e}]")
            else:
                fixed_over = max(0.0, fixed_load[e] - caps[e])
                d = cols.add(fixed_over, fixed_over, over_cost, f"over[e={e}]")
            over_cols.append(d)
        if config.overflow_cap is not None:
            rows.add(np.asarray(over_cols), np.ones(m), config.overflow_cap, "overflow_cap")

    if with_congestion:
        idle = ~used
        floor = float(np.max(fixed_load[idle] / caps[idle], initial=0.0))
        cap = np.inf if config.congestion_cap is None else max(config.congestion_cap, floor)
        delta = cols.add(floor, cap, delta_cost, "congestion")
        for e in np.flatnonzero(used):
            fc = free_cols(e)
            rows.add(np.append(fc, delta), np.append(np.ones(len(fc)), -caps[e]),
                     -fixed_load[e], f"cong[e={e}]")

    csrr_start = rows.count
    if config.csrr is not None:
        budget = csrr_budget(instance, fixed, config.csrr)
        for e in np.flatnonzero(used):
            fc = free_cols(e)
            rows.add(fc, np.ones(len(fc)), budget[e], f"csrr[e={e}]")
    csrr_rows = slice(csrr_start, rows.count)

    n = len(cols.names)
    if rows.count:
        a_ub = sp.csr_matrix(
            (np.concatenate(rows.vals), (np.concatenate(rows.rows), np.concatenate(rows.cols))),
            shape=(rows.count, n),
        )
    else:
        a_ub = sp.csr_matrix((0, n))
    problem = LpProblem(
        objective=np.asarray(cols.cost),
        a_ub=a_ub,
        b_ub=np.asarray(rows.rhs),
        lower=np.asarray(cols.lower),
        upper=np.asarray(cols.upper),
        names=tuple(cols.names),
        row_names=tuple(rows.names),
    )
    logger.debug("relaxation: %d groups, %d columns, %d rows, objective %s",
                 len(layout), n, rows.count, objective.value)
    return Relaxation(problem=problem, groups=layout, objective=objective,
                      fixed_load=fixed_load, csrr_rows=csrr_rows)


# -----------------------
# Solving
# -----------------------
def _solve_once(instance: Instance, relaxation: Relaxation, backend) -> Tuple[FractionalSolution, float]:
    solution = backend.solve(relaxation.problem)
    if solution.status is LpStatus.INFEASIBLE:
        raise RelaxationInfeasibleError(
            f"relaxation infeasible ({len(relaxation.groups)} groups, objective "
            f"{relaxation.objective.value}, restricted rows "
            f"{relaxation.csrr_rows.stop - relaxation.csrr_rows.start})"
        )
    if solution.status is LpStatus.UNBOUNDED:
        raise LpBackendError("relaxation reported unbounded")

    x = solution.values
    m = instance.graph.arc_count
    flows, sinks = [], []
    for gc in relaxation.groups:
        flow = np.zeros(m)
        flow[gc.arcs] = np.maximum(x[gc.arc_cols], 0.0)
        flows.append(flow)
        sinks.append(np.maximum(x[gc.sink_cols], 0.0))

    active = None
    rows = relaxation.csrr_rows
    if rows.stop > rows.start:
        a = relaxation.problem.a_ub[rows]
        slack = relaxation.problem.b_ub[rows] - a @ x
        active = int(np.count_nonzero(slack <= ACTIVE_TOL))

    load = (np.sum(flows, axis=0) if flows else np.zeros(m)) + relaxation.fixed_load
    caps = instance.graph.capacities
    result = FractionalSolution(
        groups=tuple(gc.group for gc in relaxation.groups),
        group_arc_flow=tuple(flows),
        sink_flow=tuple(sinks),
        fixed_load=relaxation.fixed_load,
        overflow=np.maximum(0.0, load - caps),
        congestion_value=float(np.max(load / caps, initial=0.0)),
        objective_value=solution.objective_value,
        lp_solves=1,
        iterations=solution.iterations,
        csrr_active_rows=active,
    )
    return result, solution.objective_value


def _solve_staged(instance: Instance, fixed: Mapping[int, Path], free: Sequence[int],
                  config: RelaxationConfig, backend) -> FractionalSolution:
    def run(stage: RelaxationConfig) -> Tuple[FractionalSolution, float]:
        return _solve_once(instance, build_relaxation(instance, fixed, free, stage), backend)

    base = replace(config, flow_stage=False, overflow_cap=None)
    delta_star = None
    if config.objective is Objective.OVERFLOW_SUM:
        primary, value = run(replace(base, congestion_cap=None))
        stages = [primary]
        held = {"overflow_cap": value + TIE_SLACK * max(1.0, abs(value))}
    else:
        first, delta_star = run(replace(base, objective=Objective.CONGESTION, congestion_cap=None))
        stages = [first]
        if config.objective is Objective.MIXED:
            cap = delta_star + MIXED_SLACK
            primary, value = run(replace(base, congestion_cap=cap))
            stages.append(primary)
            held = {"congestion_cap": cap, "overflow_cap": value + TIE_SLACK * max(1.0, abs(value))}
        else:
            primary = first
            held = {"congestion_cap": delta_star + TIE_SLACK * max(1.0, delta_star)}

    result = primary
    if config.tie_break:
        try:
            least, _ = run(replace(base, flow_stage=True, **held))
        except RelaxationInfeasibleError:
            logger.debug("least-flow stage infeasible, keeping the %s vertex", config.objective.value)
        else:
            stages.append(least)
            result = replace(least, objective_value=primary.objective_value)
    return replace(result, delta_star=delta_star, lp_solves=len(stages),
                   iterations=sum(stage.iterations for stage in stages))


def solve_relaxation(instance: Instance, fixed: Mapping[int, Path], free: Sequence[int],
                     config: Optional[RelaxationConfig] = None, backend=None) -> FractionalSolution:
    """
    Optimal fractional routing of ``free`` with ``fixed`` held on their paths.

    Congestion and mixed objectives report the stage-one optimum as
    ``delta_star``. Unless ``config.tie_break`` is off, the optimum is then
    held and the total free flow minimized, which removes circulations and
    detours the objective is indifferent to. Restricted rows are added only
    when the solution without them violates one; ``csrr_active_rows`` is 0
    when none had to be added.
    """
    config = config or RelaxationConfig()
    backend = get_backend(backend)
    if config.csrr is None:
        return _solve_staged(instance, fixed, free, config, backend)

    _check_partition(instance, fixed, free)
    budget = csrr_budget(instance, fixed, config.csrr)
    open_result = _solve_staged(instance, fixed, free, replace(config, csrr=None), backend)
    excess = open_result.free_load - budget
    room = config.csrr.beta * instance.graph.capacities * config.csrr.delta_star
    violated = np.flatnonzero(excess > FLOW_TOL * np.maximum(1.0, room))
    if not len(violated):
        return replace(open_result, csrr_active_rows=0)

    logger.debug("restricted rows violated on %d arcs, re-solving with them", len(violated))
    try:
        restricted = _solve_staged(instance, fixed, free, config, backend)
    except RelaxationInfeasibleError as e:
        worst = int(violated[np.argmax(excess[violated])])
        raise CsrrInfeasibleError(
            f"free demand cannot fit the restricted capacity; arc {worst} is over by "
            f"{excess[worst]:.6g} when unrestricted", arc=worst) from e
    return replace(restricted, lp_solves=open_result.lp_solves + restricted.lp_solves,
                   iterations=open_result.iterations + restricted.iterations)


def granularity(instance: Instance, delta_star: float) -> float:
    """max_k D_k / (min_e c_e · Δ*)."""
    if not delta_star > 0:
        raise ValueError(f"delta_star must be positive, got {delta_star}")
    return instance.max_demand / (instance.graph.min_capacity * delta_star)


# -----------------------
# Debug export
# -----------------------
def format_tableau(problem: LpProblem) -> str:
    """
    Plain-text dump of an LpProblem::

        lp vars N rows M
        var <index> <name> <lower> <upper> <cost>
        row <index> <name> <rhs> <col>:<coef> ...

    Every row reads ``sum(coef * x[col]) <= rhs``; ``inf`` marks a missing
    upper bound. Columns appear in increasing order within a row.
    """
    names = problem.names or tuple(f"x{j}" for j in range(problem.n_vars))
    row_names = problem.row_names or tuple(f"r{i}" for i in range(problem.n_rows))
    out = [f"lp vars {problem.n_vars} rows {problem.n_rows}"]
    for j in range(problem.n_vars):
        out.append(f"var {j} {names[j]} {float(problem.lower[j])!r} "
                   f"{float(problem.upper[j])!r} {float(problem.objective[j])!r}")
    a = sp.csr_matrix(problem.a_ub, copy=True)
    a.sum_duplicates()
    for i in range(problem.n_rows):
        start, stop = a.indptr[i], a.indptr[i + 1]
        terms = " ".join(f"{int(c)}:{float(v)!r}"
                         for c, v in zip(a.indices[start:stop], a.data[start:stop]))
        out.append(f"row {i} {row_names[i]} {float(problem.b_ub[i])!r} {terms}".rstrip())
    return "\n".join(out) + "\n"


def export_tableau(problem: LpProblem, path: Union[str, FsPath]) -> None:
    FsPath(path).write_text(format_tableau(problem), encoding="utf-8")


def relaxation_summary(relaxation: Relaxation) -> Dict[str, int]:
    return {
        "groups": len(relaxation.groups),
        "columns": relaxation.problem.n_vars,
        "rows": relaxation.problem.n_rows,
    }
