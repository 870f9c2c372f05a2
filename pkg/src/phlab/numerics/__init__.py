"""Configurable-precision numerical kernel: quadrature, differentiation,
ODE integration, special functions, and polynomial root finding."""
from __future__ import annotations

from ..context import PrecisionContext, make_context
from .derivatives import central_derivative
from .ode import OdeTrajectory, ode_integrate
from .quadrature import quad_singular, quad_tail
from .roots import poly_real_roots
from .specfun import incomplete_gamma

__all__ = [
    "PrecisionContext",
    "make_context",
    "incomplete_gamma",
    "quad_singular",
    "quad_tail",
    "central_derivative",
    "ode_integrate",
    "OdeTrajectory",
    "poly_real_roots",
]
