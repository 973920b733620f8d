# algorithms/coordinator.py
"""
Algorithm Coordinator - maps algorithm names to runners.
Used by the command line and the experiment harness so both accept the same
names and report the same outcome record.
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional

from algorithms.annealing import SA2_FACTOR, SA_FACTOR, SaConfig, run_sa
from algorithms.rounding import RoundingConfig, Variant, run_rounding
from flow.core import Instance, Metrics, PathAssignment
from lp.model import Objective
from utils.console import emit_status

logger = logging.getLogger(__name__)


class AlgorithmType(Enum):
    RR = "rr"
    RR_SORTED = "rr-sorted"
    SRR = "srr"
    SRR_UNSORTED = "srr-unsorted"
    CSRR = "csrr"
    SA = "sa"
    SA2 = "sa2"


@dataclass
class SolveRequest:
    algorithm: AlgorithmType
    seed: int = 0
    theta: Optional[int] = None
    beta: float = 1.1
    objective: Objective = Objective.OVERFLOW_SUM
    iterations: Optional[int] = None
    k_paths: int = 10
    backend: Optional[str] = None


@dataclass
class SolveResult:
    algorithm: AlgorithmType
    assignment: PathAssignment
    metrics: Metrics
    wall_time: float
    lp_solves: int = 0
    extra: Dict[str, object] = field(default_factory=dict)


class AlgorithmCoordinator:
    """
    Resolves user-facing names (with a few aliases) and runs the matching
    algorithm on one instance.
    """

    ALIASES = {
        "rr_sorted": AlgorithmType.RR_SORTED,
        "sorted-rr": AlgorithmType.RR_SORTED,
        "srr_unsorted": AlgorithmType.SRR_UNSORTED,
        "annealing": AlgorithmType.SA,
    }

    # display names for reports
    DISPLAY_NAMES = {
        AlgorithmType.RR: "RR",
        AlgorithmType.RR_SORTED: "RR sorted",
        AlgorithmType.SRR: "SRR",
        AlgorithmType.SRR_UNSORTED: "SRR unsorted",
        AlgorithmType.CSRR: "CSRR",
        AlgorithmType.SA: "SA",
        AlgorithmType.SA2: "SA2",
    }

    ROUNDING_VARIANTS = {
        AlgorithmType.RR: Variant.RR,
        AlgorithmType.RR_SORTED: Variant.RR_SORTED,
        AlgorithmType.SRR: Variant.SRR,
        AlgorithmType.SRR_UNSORTED: Variant.SRR_UNSORTED,
        AlgorithmType.CSRR: Variant.CSRR,
    }

    def __init__(self, backend: Optional[str] = None):
        self.backend = backend
        self.on_status: Optional[Callable[[str], None]] = None

    @classmethod
    def parse_algorithm(cls, name) -> AlgorithmType:
        if isinstance(name, AlgorithmType):
            return name
        key = str(name).strip().lower()
        if key in cls.ALIASES:
            return cls.ALIASES[key]
        try:
            return AlgorithmType(key)
        except ValueError:
            known = ", ".join(a.value for a in AlgorithmType)
            raise ValueError(f"Unknown algorithm: {name} (known: {known})") from None

    @classmethod
    def display_name(cls, algorithm: AlgorithmType) -> str:
        return cls.DISPLAY_NAMES.get(algorithm, algorithm.value)

    def _emit_status(self, s):
        emit_status(self.on_status, s)

    def solve(self, instance: Instance, request: SolveRequest) -> SolveResult:
        algorithm = request.algorithm
        self._emit_status(f"Running {self.display_name(algorithm)} (seed {request.seed})...")
        started = time.perf_counter()

        if algorithm in self.ROUNDING_VARIANTS:
            config = RoundingConfig(
                variant=self.ROUNDING_VARIANTS[algorithm],
                theta=request.theta,
                beta=request.beta,
                objective=request.objective,
                seed=request.seed,
            )
            outcome = run_rounding(instance, config, request.backend or self.backend,
                                   on_status=self.on_status)
            extra: Dict[str, object] = {
                "actualizations": outcome.actualizations,
                "split_fixed": len(outcome.split_fixed),
            }
            if outcome.delta_star is not None:
                extra["delta_star"] = outcome.delta_star
            if algorithm is AlgorithmType.CSRR:
                extra["csrr_active_rows"] = sum(outcome.csrr_active_rows)
            result = SolveResult(algorithm, outcome.assignment, outcome.metrics, 0.0,
                                 outcome.lp_solves, extra)
        else:
            factor = SA2_FACTOR if algorithm is AlgorithmType.SA2 else SA_FACTOR
            config = SaConfig(k_paths=request.k_paths, iterations=request.iterations,
                              iteration_factor=factor, seed=request.seed)
            outcome = run_sa(instance, config, on_status=self.on_status)
            result = SolveResult(algorithm, outcome.assignment, outcome.metrics, 0.0, 0,
                                 {"iterations": outcome.iterations, "accepted": outcome.accepted})

        result.wall_time = time.perf_counter() - started
        logger.info("%s finished in %.3fs: overflow %.6g, congestion %.6g",
                    algorithm.value, result.wall_time, result.metrics.overflow_sum,
                    result.metrics.congestion)
        self._emit_status(f"{self.display_name(algorithm)} done")
        return result


def solve_instance(instance: Instance, request: SolveRequest, backend: Optional[str] = None,
                   on_status: Optional[Callable[[str], None]] = None) -> SolveResult:
    coordinator = AlgorithmCoordinator(backend)
    coordinator.on_status = on_status
    return coordinator.solve(instance, request)
