"""Special functions needed by the closed-form moment formulas."""
from __future__ import annotations

import mpmath as mp

from ..context import PrecisionContext


def incomplete_gamma(a, x, kind: str, ctx: PrecisionContext) -> mp.mpf:
    """Incomplete gamma function at the context precision.

    kind="lower" returns integral of t^(a-1) e^(-t) over [0, x],
    kind="upper" the same integrand over [x, oo).  Requires a > 0, x >= 0.
    """
    if kind not in ("lower", "upper"):
        raise ValueError(f"kind must be 'lower' or 'upper', got {kind!r}")
    with mp.workdps(ctx.digits + 10):
        a = mp.mpf(a)
        x = mp.mpf(x)
        if not a > 0:
            raise ValueError(f"incomplete_gamma requires a > 0, got a = {a}")
        if x < 0:
            raise ValueError(f"incomplete_gamma requires x >= 0, got x = {x}")
        if kind == "lower":
            return mp.gammainc(a, 0, x)
        return mp.gammainc(a, x, mp.inf)
