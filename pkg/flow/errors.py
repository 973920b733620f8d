# flow/errors.py
"""Exception types shared by every uflow package."""

from typing import Optional


class UflowError(Exception):
    """Base class for all uflow failures."""


class InstanceError(UflowError, ValueError):
    """Malformed instance file or instance that breaks a structural rule."""


class InvalidPathError(UflowError, ValueError):
    def __init__(self, commodity: int, reason: str):
        super().__init__(f"commodity {commodity}: {reason}")
        self.commodity = commodity
        self.reason = reason


class LpBackendError(UflowError):
    """The LP backend could not produce an answer (bad dimensions, breakdown, limits)."""


class RelaxationInfeasibleError(UflowError):
    def __init__(self, message: str, arc: Optional[int] = None):
        super().__init__(message)
        self.arc = arc


class CsrrInfeasibleError(RelaxationInfeasibleError):
    """The constrained relaxation has no solution; ``arc`` is the tightest restricted arc."""


class ConservationError(UflowError):
    def __init__(self, origin: int, node: int, imbalance: float):
        super().__init__(
            f"flow conservation violated for group of origin {origin} "
            f"at node {node} (imbalance {imbalance:.3g})"
        )
        self.origin = origin
        self.node = node
        self.imbalance = imbalance
