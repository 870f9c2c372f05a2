"""Exception taxonomy shared by every module in the package.

Invalid arguments raise plain ValueError; everything that can go wrong for a
*numerical* reason gets its own class below so callers can react (retry at
higher precision, shrink a step, pick another branch) without string matching.
"""
from __future__ import annotations


class PhlabError(Exception):
    """Base class for all numerical failures raised by this package."""


class PrecisionFailure(PhlabError):
    """Working precision was insufficient and automatic escalation ran out.

    Carries enough context to retry by hand: the operation name, the digit
    count that failed, and (when known) the index at which it failed.
    """

    def __init__(self, message: str, *, digits: int | None = None,
                 index: int | None = None) -> None:
        super().__init__(message)
        self.digits = digits
        self.index = index


class SingularityEncountered(PhlabError):
    """An integration ran into a pole or a vanishing denominator.

    `last_good` is the abscissa of the last accepted point.  When the ODE
    driver raises (or propagates) this, it attaches the accepted prefix of
    the trajectory as `partial`; elsewhere `partial` stays None.
    """

    def __init__(self, message: str, *, last_good=None, partial=None) -> None:
        super().__init__(message)
        self.last_good = last_good
        self.partial = partial


class IllConditionedPoint(PhlabError):
    """A residual cannot be normalized meaningfully at this point.

    Raised when the natural scale of an identity (its largest term, or a
    denominator such as R_n or A_n) is below the square root of machine
    epsilon at the working precision, so a relative residual would be noise.
    """


class IllConditionedPath(IllConditionedPoint):
    """A quadrature path passes too close to a pole of its integrand.

    Subclasses IllConditionedPoint so that point-level handlers also cover
    the path case; `where` is the offending abscissa when known.
    """

    def __init__(self, message: str, *, where=None) -> None:
        super().__init__(message)
        self.where = where


class NoSolution(PhlabError):
    """A nonlinear solve exhausted its iteration or damping budget."""


class BranchSelectionFailure(PhlabError):
    """Several solution branches exist and none matches the selection rule."""

    def __init__(self, message: str, *, candidates=None) -> None:
        super().__init__(message)
        self.candidates = candidates


class UnsupportedConfig(PhlabError):
    """The requested parameter regime is outside what the method supports."""
