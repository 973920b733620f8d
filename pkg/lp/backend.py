# lp/backend.py
"""
Linear programming backends.

Every backend solves the bounded inequality form

    min  c^T x   s.t.  A x <= b,   lower <= x <= upper

and returns an ``LpSolution``. ``SimplexBackend`` is the bundled solver: a
dense bounded-variable primal simplex with a phase-1/phase-2 split and
artificial variables for rows whose shifted right-hand side is negative.
Pricing is Dantzig (largest reduced cost) until a run of degenerate pivots
appears, then Bland's smallest-index rule takes over for both the entering
and the leaving choice. ``HighsBackend`` wraps ``scipy.optimize.linprog``
with the same contract.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from flow.errors import LpBackendError

logger = logging.getLogger(__name__)

Matrix = Union[np.ndarray, sp.spmatrix]

# feasibility / optimality tolerance of returned solutions
LP_TOL = 1e-6
# bound tolerance of returned solutions
BOUND_TOL = 1e-9


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LpProblem:
    objective: np.ndarray
    a_ub: Matrix
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    names: Optional[Tuple[str, ...]] = None
    row_names: Optional[Tuple[str, ...]] = None

    @property
    def n_vars(self) -> int:
        return int(np.asarray(self.objective).shape[0])

    @property
    def n_rows(self) -> int:
        return int(np.asarray(self.b_ub).shape[0])

    def check(self) -> None:
        """Raise LpBackendError when shapes, bounds or coefficients are inconsistent."""
        n, m = self.n_vars, self.n_rows
        if self.a_ub.shape != (m, n):
            raise LpBackendError(f"row matrix is {self.a_ub.shape}, expected {(m, n)}")
        if np.asarray(self.lower).shape != (n,) or np.asarray(self.upper).shape != (n,):
            raise LpBackendError("bound vectors do not match the number of variables")
        if self.names is not None and len(self.names) != n:
            raise LpBackendError("variable name count does not match the number of variables")
        coefs = self.a_ub.data if sp.issparse(self.a_ub) else np.asarray(self.a_ub)
        if not (np.all(np.isfinite(coefs)) and np.all(np.isfinite(self.objective))
                and np.all(np.isfinite(self.b_ub))):
            raise LpBackendError("non-finite coefficient in objective, rows or right-hand side")
        if not np.all(np.isfinite(self.lower)):
            raise LpBackendError("lower bounds must be finite")
        if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
            raise LpBackendError("a lower bound exceeds its upper bound")

    def dense_rows(self) -> np.ndarray:
        return self.a_ub.toarray() if sp.issparse(self.a_ub) else np.asarray(self.a_ub, dtype=float)


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    values: np.ndarray = field(repr=False)
    objective_value: float
    iterations: int
    backend: str = ""

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Breakdown(Exception):
    """Pivot element below the numerical threshold."""


class SimplexBackend:
    name = "simplex"

    # consecutive degenerate pivots before switching to Bland's rule
    BLAND_AFTER = 50
    PIVOT_TOL = 1e-11

    def __init__(self, tolerance: float = 1e-9, max_iterations: Optional[int] = None,
                 perturbation_restarts: int = 3, pivot_tolerance: float = 1e-12):
        self.tolerance = tolerance
        # pivots smaller than this share of their column count as a breakdown
        self.pivot_tolerance = pivot_tolerance
        self.max_iterations = max_iterations
        self.perturbation_restarts = perturbation_restarts

    def solve(self, problem: LpProblem) -> LpSolution:
        problem.check()
        c = np.asarray(problem.objective, dtype=float)
        a = problem.dense_rows()
        b = np.asarray(problem.b_ub, dtype=float)
        lower = np.asarray(problem.lower, dtype=float)
        upper = np.asarray(problem.upper, dtype=float)

        perturb = np.zeros(len(b))
        total_iterations = 0
        for attempt in range(self.perturbation_restarts + 1):
            try:
                status, x, iterations = self._solve_shifted(c, a, b + perturb, lower, upper)
                total_iterations += iterations
                break
            except _Breakdown:
                scale = np.maximum(1.0, np.abs(b))
                perturb = 1e-8 * (attempt + 1) * scale * (1.0 + np.arange(len(b)) / max(1, len(b)))
                logger.info("simplex pivot breakdown, restarting with perturbed rows (attempt %d)",
                            attempt + 1)
        else:
            raise LpBackendError("simplex failed: repeated numerical breakdown")

        if status is not LpStatus.OPTIMAL:
            return LpSolution(status, np.full(len(c), np.nan), float("nan"),
                              total_iterations, self.name)

        x = np.clip(x, lower, upper)
        violation = a @ x - b
        if len(b) and violation.max() > LP_TOL * max(1.0, float(np.abs(b).max())):
            logger.warning("simplex solution violates a row by %.3g", float(violation.max()))
        return LpSolution(LpStatus.OPTIMAL, x, float(c @ x), total_iterations, self.name)

    # -----------------------
    # Two-phase driver on the shifted problem 0 <= z <= upper - lower
    # -----------------------
    def _solve_shifted(self, c, a, b, lower, upper):
        m, n = a.shape
        span = upper - lower
        rhs = b - a @ lower
        negative = rhs < 0
        art_rows = np.flatnonzero(negative)
        n_art = len(art_rows)
        ncols = n + m + n_art

        tableau = np.zeros((m, ncols))
        tableau[:, :n] = a
        tableau[np.arange(m), n + np.arange(m)] = 1.0
        tableau[negative, :n + m] *= -1.0
        tableau[art_rows, n + m + np.arange(n_art)] = 1.0

        basis = n + np.arange(m)
        basis[art_rows] = n + m + np.arange(n_art)
        x_basic = np.abs(rhs)
        bound = np.concatenate([span, np.full(m + n_art, np.inf)])
        at_upper = np.zeros(ncols, dtype=bool)
        limit = self.max_iterations or 50 * (m + n) + 1000

        cost = np.zeros(ncols)
        cost[n + m:] = 1.0
        _, it1 = self._iterate(tableau, x_basic, basis, at_upper, bound, cost, limit)
        infeasibility = float(x_basic[basis >= n + m].sum())
        if infeasibility > LP_TOL * max(1.0, float(np.abs(rhs).max(initial=0.0))):
            return LpStatus.INFEASIBLE, None, it1

        # artificials are frozen at zero for phase 2
        bound[n + m:] = 0.0
        cost = np.zeros(ncols)
        cost[:n] = c
        status, it2 = self._iterate(tableau, x_basic, basis, at_upper, bound, cost, limit)

        z = np.where(at_upper, bound, 0.0)
        z[basis] = x_basic
        return status, lower + z[:n], it1 + it2

    def _iterate(self, tableau, x_basic, basis, at_upper, bound, cost, limit):
        m, ncols = tableau.shape
        tol = self.tolerance
        is_basic = np.zeros(ncols, dtype=bool)
        is_basic[basis] = True
        reduced = cost - cost[basis] @ tableau if m else cost.copy()
        degenerate_run = 0
        iterations = 0

        while True:
            movable = ~is_basic & (bound > 0)
            improving = movable & np.where(at_upper, reduced > tol, reduced < -tol)
            candidates = np.flatnonzero(improving)
            if candidates.size == 0:
                return LpStatus.OPTIMAL, iterations
            bland = degenerate_run >= self.BLAND_AFTER
            if bland:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmax(np.abs(reduced[candidates]))])

            sigma = -1.0 if at_upper[j] else 1.0
            step = sigma * tableau[:, j]
            bound_basic = bound[basis]
            ratios = np.full(m, np.inf)
            falling = step > self.PIVOT_TOL
            ratios[falling] = x_basic[falling] / step[falling]
            rising = (step < -self.PIVOT_TOL) & np.isfinite(bound_basic)
            ratios[rising] = (bound_basic[rising] - x_basic[rising]) / -step[rising]
            np.maximum(ratios, 0.0, out=ratios)

            t_row = ratios.min() if m else np.inf
            leave = -1
            t = bound[j]
            if t_row < t:
                ties = np.flatnonzero(ratios <= t_row + 1e-12)
                if bland:
                    leave = int(ties[np.argmin(basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(step[ties]))])
                t = ratios[leave]
            if not np.isfinite(t):
                return LpStatus.UNBOUNDED, iterations

            iterations += 1
            if iterations > limit:
                raise LpBackendError(f"simplex iteration limit {limit} reached")
            degenerate_run = degenerate_run + 1 if t <= 1e-12 else 0

            x_basic -= t * step
            if leave < 0:
                at_upper[j] = not at_upper[j]
                continue

            pivot = tableau[leave, j]
            floor = max(self.PIVOT_TOL, self.pivot_tolerance * float(np.abs(tableau[:, j]).max()))
            if abs(pivot) < floor:
                raise _Breakdown()
            leaving = basis[leave]
            at_upper[leaving] = bool(step[leave] < 0)
            x_basic[leave] = t if sigma > 0 else bound[j] - t
            at_upper[j] = False

            tableau[leave] /= pivot
            column = tableau[:, j].copy()
            column[leave] = 0.0
            tableau -= np.outer(column, tableau[leave])
            reduced -= reduced[j] * tableau[leave]
            basis[leave] = j
            is_basic[leaving] = False
            is_basic[j] = True
            x_basic[(x_basic < 0) & (x_basic > -1e-9)] = 0.0


class HighsBackend:
    name = "highs"

    def solve(self, problem: LpProblem) -> LpSolution:
        problem.check()
        bounds = [(float(lo), None if np.isinf(hi) else float(hi))
                  for lo, hi in zip(problem.lower, problem.upper)]
        has_rows = problem.n_rows > 0
        result = linprog(
            np.asarray(problem.objective, dtype=float),
            A_ub=problem.a_ub if has_rows else None,
            b_ub=np.asarray(problem.b_ub, dtype=float) if has_rows else None,
            bounds=bounds,
            method="highs",
        )
        iterations = int(getattr(result, "nit", 0) or 0)
        if result.status == 0:
            x = np.clip(result.x, problem.lower, problem.upper)
            return LpSolution(LpStatus.OPTIMAL, x, float(result.fun), iterations, self.name)
        if result.status == 2:
            status = LpStatus.INFEASIBLE
        elif result.status == 3:
            status = LpStatus.UNBOUNDED
        else:
            raise LpBackendError(f"HiGHS failed: {result.message}")
        return LpSolution(status, np.full(problem.n_vars, np.nan), float("nan"), iterations, self.name)


BACKENDS: Dict[str, type] = {
    SimplexBackend.name: SimplexBackend,
    HighsBackend.name: HighsBackend,
}


def get_backend(backend=None):
    """Accept a backend instance, a registered name, or None (bundled simplex)."""
    if backend is None:
        return SimplexBackend()
    if isinstance(backend, str):
        if backend not in BACKENDS:
            raise ValueError(f"Unknown LP backend: {backend} (known: {', '.join(BACKENDS)})")
        return BACKENDS[backend]()
    return backend


def solve(problem: LpProblem, backend=None) -> LpSolution:
    return get_backend(backend).solve(problem)
