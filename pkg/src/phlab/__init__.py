"""Arbitrary-precision laboratory for Hankel determinants, orthogonal
polynomials, and Painleve structures of a jump-perturbed Laguerre weight."""
from __future__ import annotations

from .context import PrecisionContext, make_context
from .errors import (
    BranchSelectionFailure,
    IllConditionedPath,
    IllConditionedPoint,
    NoSolution,
    PhlabError,
    PrecisionFailure,
    SingularityEncountered,
    UnsupportedConfig,
)
from .weight import MomentTable, WeightParams

__all__ = [
    "PrecisionContext",
    "make_context",
    "WeightParams",
    "MomentTable",
    "PhlabError",
    "PrecisionFailure",
    "SingularityEncountered",
    "IllConditionedPoint",
    "IllConditionedPath",
    "NoSolution",
    "BranchSelectionFailure",
    "UnsupportedConfig",
]
