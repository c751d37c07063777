"""Error types raised by the library.

Every error carries a ``detail`` tuple naming the offending edges, vertices,
paths or atoms so that command-line reports can point at the culprit.
"""
from __future__ import annotations


class KGraphError(Exception):
    """Base class for all library errors."""

    def __init__(self, message: str, *detail):
        super().__init__(message)
        self.detail = tuple(detail)

    @property
    def name(self) -> str:
        return type(self).__name__


class MalformedSpec(KGraphError):
    pass


class MissingSquare(KGraphError):
    pass


class NonBijectiveSquares(KGraphError):
    pass


class HexagonFailure(KGraphError):
    pass


class HasSource(KGraphError):
    pass


class NotComposable(KGraphError):
    pass


class DegreeOutOfRange(KGraphError):
    pass


class NotCubicDegree(KGraphError):
    pass


class WeightRowNotStochastic(KGraphError):
    pass


class SquareIncompatibleWeights(KGraphError):
    pass


class NotSequentializable(KGraphError):
    pass


class NotStochastic(KGraphError):
    pass


class NotStationary(KGraphError):
    pass


class NotStronglyConnected(KGraphError):
    pass


class DepthTooSmallForClosure(KGraphError):
    pass


class NullAtomUnderCap(KGraphError):
    pass


class InconsistentDensity(KGraphError):
    pass


class RangesOverlap(KGraphError):
    pass


class CoverFailure(KGraphError):
    pass


class CompositionMismatch(KGraphError):
    pass


class DepthBudgetExceeded(KGraphError):
    pass


class NonNegativeRequired(KGraphError):
    pass


class NotExact(KGraphError):
    """Raised when an exact computation would need a root outside the surd field."""
