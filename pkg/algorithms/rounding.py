# algorithms/rounding.py
"""
Randomized rounding of the flow relaxation: RR, sorted RR, SRR and CSRR.

RR solves the relaxation once and draws one path per commodity from its
path distribution. SRR fixes commodities one at a time and re-solves the
relaxation (an actualization) every time ``theta`` split commodities have
been fixed since the last solve. CSRR additionally caps the free load of
every arc by ``beta * c_e * delta_star`` minus the fractional footprints of
the commodities already fixed.

Every rounding decision consumes exactly one draw of the run generator, so a
(instance, config) pair fully determines the output.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from algorithms.decompose import PathDistribution, arc_fractions, decompose
from flow.core import Instance, Metrics, Path, PathAssignment, decreasing_demand_order, evaluate
from lp.model import CsrrConfig, FractionalSolution, Objective, RelaxationConfig, solve_relaxation
from utils.console import emit_status

logger = logging.getLogger(__name__)


class Variant(Enum):
    RR = "rr"
    RR_SORTED = "rr_sorted"
    SRR = "srr"
    SRR_UNSORTED = "srr_unsorted"
    CSRR = "csrr"


@dataclass(frozen=True)
class RoundingConfig:
    variant: Variant = Variant.SRR
    theta: Optional[int] = None
    beta: float = 1.1
    objective: Objective = Objective.OVERFLOW_SUM
    seed: int = 0

    def __post_init__(self):
        if self.theta is not None and self.theta < 1:
            raise ValueError(f"theta must be at least 1, got {self.theta}")
        if self.beta < 1:
            raise ValueError(f"beta must be at least 1, got {self.beta}")

    def resolved_theta(self, instance: Instance) -> int:
        """Explicit theta, or ceil(|V| / 4)."""
        if self.theta is not None:
            return self.theta
        return max(1, math.ceil(instance.graph.node_count / 4))

    @property
    def generation_objective(self) -> Objective:
        return Objective.CONGESTION if self.variant is Variant.CSRR else self.objective


@dataclass
class RoundingState:
    fixed: Dict[int, Path] = field(default_factory=dict)
    footprints: Dict[int, np.ndarray] = field(default_factory=dict)
    split_counter: int = 0
    rng: Optional[np.random.Generator] = None
    delta_star: Optional[float] = None


@dataclass(frozen=True, eq=False)
class RoundingOutcome:
    assignment: PathAssignment
    metrics: Metrics
    lp_solves: int
    actualizations: int = 0
    split_fixed: Tuple[int, ...] = ()
    csrr_active_rows: Tuple[int, ...] = ()
    delta_star: Optional[float] = None


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def round_once(distribution: PathDistribution, commodity: int, rng: np.random.Generator) -> Path:
    """Pick one support path with probability equal to its weight."""
    support = distribution.paths_of(commodity)
    if not support:
        raise ValueError(f"commodity {commodity} has an empty path support")
    cumulative = np.cumsum([weight for _, weight in support])
    if not cumulative[-1] > 0:
        raise ValueError(f"commodity {commodity} has no path with positive weight")
    u = rng.random()
    pick = int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
    return support[min(pick, len(support) - 1)][0]


def _attribution_order(instance: Instance, config: RoundingConfig,
                       rng: np.random.Generator) -> List[int]:
    if config.variant is Variant.RR:
        return list(range(instance.commodity_count))
    if config.variant is Variant.SRR_UNSORTED:
        return [int(k) for k in rng.permutation(instance.commodity_count)]
    return decreasing_demand_order(instance)


def _finish(instance: Instance, state: RoundingState, solves: int, actualizations: int = 0,
            split_fixed: Sequence[int] = (), active_rows: Sequence[int] = ()) -> RoundingOutcome:
    assignment = PathAssignment(paths=tuple(state.fixed[k] for k in range(instance.commodity_count)))
    return RoundingOutcome(
        assignment=assignment,
        metrics=evaluate(instance, assignment),
        lp_solves=solves,
        actualizations=actualizations,
        split_fixed=tuple(split_fixed),
        csrr_active_rows=tuple(active_rows),
        delta_star=state.delta_star,
    )


def run_rr(instance: Instance, config: Optional[RoundingConfig] = None, backend=None,
           on_status: Optional[Callable[[str], None]] = None) -> RoundingOutcome:
    """One relaxation, one decomposition, independent rounding of every commodity."""
    config = config or RoundingConfig(variant=Variant.RR)
    state = RoundingState(rng=make_rng(config.seed))
    order = _attribution_order(instance, config, state.rng)

    relax = RelaxationConfig(objective=config.generation_objective)
    solution = solve_relaxation(instance, {}, order, relax, backend)
    emit_status(on_status, f"Relaxation solved (objective {solution.objective_value:.6g})")
    distribution = decompose(instance, solution, order)
    split = [k for k in order if distribution.is_split(k)]
    for k in order:
        state.fixed[k] = round_once(distribution, k, state.rng)
    return _finish(instance, state, solution.lp_solves, split_fixed=split)


def _actualize(instance: Instance, state: RoundingState, free: Sequence[int],
               config: RoundingConfig, backend) -> FractionalSolution:
    csrr = None
    if config.variant is Variant.CSRR and state.delta_star is not None:
        csrr = CsrrConfig(delta_star=state.delta_star, beta=config.beta,
                          footprints=dict(state.footprints))
    relax = RelaxationConfig(objective=config.generation_objective, csrr=csrr)
    return solve_relaxation(instance, dict(state.fixed), sorted(free), relax, backend)


def run_srr(instance: Instance, config: Optional[RoundingConfig] = None, backend=None,
            order: Optional[Sequence[int]] = None,
            on_status: Optional[Callable[[str], None]] = None) -> RoundingOutcome:
    """
    Fix commodities one by one, re-solving after ``theta`` split ones.

    ``order`` overrides the fixing order (decreasing demand for srr and
    csrr, a seeded shuffle for srr_unsorted); it is also the attribution
    order handed to the decomposition.
    """
    config = config or RoundingConfig()
    state = RoundingState(rng=make_rng(config.seed))
    order = _attribution_order(instance, config, state.rng) if order is None else list(order)
    if sorted(order) != list(range(instance.commodity_count)):
        raise ValueError("order must be a permutation of the commodity ids")
    theta = config.resolved_theta(instance)
    m = instance.graph.arc_count

    free = set(order)
    solution = _actualize(instance, state, free, config, backend)
    solves = solution.lp_solves
    if config.variant is Variant.CSRR:
        state.delta_star = solution.objective_value
        if not state.delta_star > 0:
            raise ValueError("congestion relaxation returned a nonpositive optimum")
    distribution = decompose(instance, solution, order)

    actualizations = 0
    split_fixed: List[int] = []
    active_rows: List[int] = []
    for position, k in enumerate(order):
        if state.split_counter >= theta and free:
            solution = _actualize(instance, state, free, config, backend)
            solves += solution.lp_solves
            if solution.csrr_active_rows is not None:
                active_rows.append(solution.csrr_active_rows)
            distribution = decompose(instance, solution, order)
            state.split_counter = 0
            actualizations += 1
            logger.debug("actualization %d after %d fixed commodities", actualizations, position)
            emit_status(on_status, f"Actualization {actualizations}: {len(free)} commodities free")

        was_split = distribution.is_split(k)
        state.footprints[k] = arc_fractions(distribution, k, m)
        state.fixed[k] = round_once(distribution, k, state.rng)
        free.discard(k)
        if was_split:
            state.split_counter += 1
            split_fixed.append(k)

    return _finish(instance, state, solves, actualizations, split_fixed, active_rows)


def run_csrr(instance: Instance, config: Optional[RoundingConfig] = None, backend=None,
             order: Optional[Sequence[int]] = None,
             on_status: Optional[Callable[[str], None]] = None) -> RoundingOutcome:
    config = config or RoundingConfig(variant=Variant.CSRR)
    if config.variant is not Variant.CSRR:
        raise ValueError(f"run_csrr needs the csrr variant, got {config.variant.value}")
    return run_srr(instance, config, backend, order=order, on_status=on_status)


def run_rounding(instance: Instance, config: RoundingConfig, backend=None,
                 on_status: Optional[Callable[[str], None]] = None) -> RoundingOutcome:
    """Dispatch on ``config.variant``."""
    if config.variant in (Variant.RR, Variant.RR_SORTED):
        return run_rr(instance, config, backend, on_status=on_status)
    return run_srr(instance, config, backend, on_status=on_status)
