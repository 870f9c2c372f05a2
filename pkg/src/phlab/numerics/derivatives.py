"""Finite differences for functions only available through evaluation."""
from __future__ import annotations

import mpmath as mp

from ..context import PrecisionContext


def central_derivative(f, x, order: int, ctx: PrecisionContext, *, step=None) -> mp.mpf:
    """4th-order central difference for f'(x) (order=1) or f''(x) (order=2).

    The step defaults to ctx.fd_step = 10^(-digits/3); pass `step` to
    override, e.g. for nested differentiation where the outer level must use
    a coarser step than the inner.  f is expected to evaluate accurately at
    the full working precision of whatever context it closes over.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    with mp.workdps(ctx.digits + 10):
        x = mp.mpf(x)
        h = ctx.fd_step if step is None else mp.mpf(step)
        fp1 = f(x + h)
        fm1 = f(x - h)
        fp2 = f(x + 2 * h)
        fm2 = f(x - 2 * h)
        if order == 1:
            return (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h)
        f0 = f(x)
        return (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h * h)
