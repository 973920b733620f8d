# analysis/theory.py
"""
Approximation factor of the constrained rounding and an empirical check of
its per-arc tail bound.

With B = (gamma / beta) * ln(|E| / epsilon), the factor is 1 + alpha where
alpha solves (1 + alpha) * ln(1 + alpha) - alpha = B. The root always lies in
[sqrt(B), B + 2], so plain bisection is used. The tail bound for an arc with
capacity c_e, on instances scaled so that the largest demand is 1, is
(e^alpha / (1 + alpha)^(1 + alpha)) ** (c_e * delta_star).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from algorithms.rounding import RoundingConfig, Variant, run_csrr
from flow.core import Graph, Instance
from flow.errors import UflowError
from lp.model import Objective, RelaxationConfig, solve_relaxation
from utils.console import emit_status
from utils.worker_pool import chunked, run_tasks

logger = logging.getLogger(__name__)

# arcs count as exceeded when load >= threshold - EXCEED_TOL
EXCEED_TOL = 1e-9


@dataclass(frozen=True)
class BoundQuery:
    arc_count: int
    epsilon: float
    gamma: float
    beta: float = 1.0

    def __post_init__(self):
        if self.arc_count < 1:
            raise ValueError(f"arc_count must be positive, got {self.arc_count}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.beta < 1:
            raise ValueError(f"beta must be at least 1, got {self.beta}")

    @property
    def b(self) -> float:
        return self.gamma / self.beta * math.log(self.arc_count / self.epsilon)


@dataclass(frozen=True)
class ApproximationFactor:
    b: float
    alpha: float
    factor: float
    closed_form: float


def alpha_equation(alpha: float) -> float:
    """(1 + alpha) * ln(1 + alpha) - alpha."""
    return (1.0 + alpha) * math.log1p(alpha) - alpha


def solve_alpha(b: float) -> float:
    if b <= 0:
        return 0.0
    lo, hi = math.sqrt(b), b + 2.0

    def residual(alpha: float) -> float:
        return alpha_equation(alpha) - b

    if residual(lo) >= 0:
        return lo
    return bisect(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def approximation_factor(query: BoundQuery) -> ApproximationFactor:
    b = query.b
    alpha = solve_alpha(b)
    closed = (2 * b + 2) / math.log1p(math.sqrt(b)) if b > 0 else math.inf
    return ApproximationFactor(b=b, alpha=alpha, factor=1.0 + alpha, closed_form=closed)


def lemma2_bound(alpha: float, capacity: float, delta_star: float, d_max: float = 1.0) -> float:
    """
    Tail bound P(load_e >= (1 + alpha) c_e delta_star), clamped to [0, 1].

    ``capacity`` and ``d_max`` are in the same units; the exponent uses
    c_e * delta_star / d_max, i.e. the instance scaled to a unit largest demand.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    scale = capacity * delta_star / d_max
    if not scale > 0:
        raise ValueError("capacity * delta_star must be positive")
    if alpha == 0:
        return 1.0
    exponent = scale * (alpha - (1.0 + alpha) * math.log1p(alpha))
    return float(min(1.0, max(0.0, math.exp(exponent))))


def scaled_instance(instance: Instance) -> Instance:
    """Copy with demands and capacities divided by the largest demand."""
    d_max = instance.max_demand
    if not d_max > 0:
        raise ValueError("instance has no commodities")
    graph = Graph(
        node_count=instance.graph.node_count,
        arcs=instance.graph.arcs,
        capacity=tuple(c / d_max for c in instance.graph.capacity),
    )
    commodities = tuple(replace(c, demand=c.demand / d_max) for c in instance.commodities)
    return Instance(graph=graph, commodities=commodities, witness=instance.witness)


@dataclass(frozen=True, eq=False)
class TailReport:
    alpha: float
    runs: int
    completed: int
    delta_star: float
    frequency: np.ndarray = field(repr=False)
    bound: np.ndarray = field(repr=False)
    threshold: np.ndarray = field(repr=False)
    partial: bool = False
    error: Optional[str] = None

    def slack(self, sigmas: float = 3.0) -> np.ndarray:
        runs = max(1, self.completed)
        return sigmas * np.sqrt(self.bound / runs)

    def dominated(self, sigmas: float = 3.0) -> np.ndarray:
        """Per arc: empirical frequency within the bound plus sampling slack."""
        return self.frequency <= self.bound + self.slack(sigmas)


def _tail_chunk(args: Tuple[Instance, Sequence[int], float, Optional[int], np.ndarray, object]
                ) -> Tuple[np.ndarray, int, Optional[str]]:
    instance, seeds, beta, theta, threshold, backend = args
    counts = np.zeros(instance.graph.arc_count, dtype=np.int64)
    done = 0
    for seed in seeds:
        config = RoundingConfig(variant=Variant.CSRR, beta=beta, theta=theta, seed=int(seed))
        try:
            outcome = run_csrr(instance, config, backend)
        except UflowError as e:
            return counts, done, f"seed {seed}: {e}"
        load = np.asarray(outcome.metrics.per_arc_load)
        counts += load >= threshold - EXCEED_TOL
        done += 1
    return counts, done, None


def monte_carlo_tail(instance: Instance, alpha: float, runs: int, seed: int = 0, backend=None,
                     beta: float = 1.0, theta: Optional[int] = None, jobs: int = 1,
                     on_status: Optional[Callable[[str], None]] = None) -> TailReport:
    """
    Exceedance frequency of (1 + alpha) c_e delta_star per arc over ``runs``
    constrained rounding runs with seeds seed, seed + 1, ...

    The runs use a scaled copy of the instance (largest demand 1). A backend
    failure stops the count and marks the report partial.
    """
    if runs < 1:
        raise ValueError(f"runs must be at least 1, got {runs}")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    scaled = scaled_instance(instance)
    first = solve_relaxation(scaled, {}, list(range(scaled.commodity_count)),
                             RelaxationConfig(objective=Objective.CONGESTION), backend)
    delta_star = first.objective_value
    caps = scaled.graph.capacities
    threshold = (1.0 + alpha) * caps * delta_star

    seeds = list(range(seed, seed + runs))
    batches = chunked(seeds, max(1, math.ceil(runs / (jobs * 4))))
    tasks = [(scaled, batch, beta, theta, threshold, backend) for batch in batches]
    emit_status(on_status, f"Tail check: {runs} runs at alpha={alpha:g}")

    counts = np.zeros(scaled.graph.arc_count, dtype=np.int64)
    completed = 0
    error: Optional[str] = None
    for batch_counts, done, batch_error in run_tasks(_tail_chunk, tasks, jobs=jobs):
        counts += batch_counts
        completed += done
        if batch_error and error is None:
            error = batch_error
    if error:
        logger.warning("tail check stopped early: %s", error)

    bound = np.array([lemma2_bound(alpha, c, delta_star) for c in caps])
    frequency = counts / completed if completed else np.full(len(caps), np.nan)
    return TailReport(
        alpha=alpha,
        runs=runs,
        completed=completed,
        delta_star=delta_star,
        frequency=frequency,
        bound=bound,
        threshold=threshold,
        partial=error is not None,
        error=error,
    )
