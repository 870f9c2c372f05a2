"""Singularity-aware quadrature on finite intervals and exponential tails."""
from __future__ import annotations

import mpmath as mp

from ..context import PrecisionContext
from ..errors import PrecisionFailure
from .gauss import jacobi_rule

# escalation ladder; geometric with ratio 1.5, hard cap 4096 nodes
_ORDERS = [16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512, 768,
           1024, 1536, 2048, 3072, 4096]


def _converged(val, prev, eps) -> bool:
    diff = abs(val - prev)
    mx = max(abs(val), abs(prev))
    if mx == 0:
        return True
    return diff <= 10 * eps * mx


def quad_singular(f, lo, hi, exponent_lo, exponent_hi, ctx: PrecisionContext) -> mp.mpf:
    """Integral of f over [lo, hi] where f carries endpoint factors
    (y-lo)^exponent_lo and (hi-y)^exponent_hi and is smooth once they are
    divided out.  Both exponents must exceed -1.

    Gauss-Jacobi with the stated exponents; the order is escalated until two
    successive rules agree relatively to 10*eps, else precision-failure.
    """
    with mp.workdps(ctx.digits + 10):
        lo = mp.mpf(lo)
        hi = mp.mpf(hi)
        exponent_lo = mp.mpf(exponent_lo)
        exponent_hi = mp.mpf(exponent_hi)
        if not exponent_lo > -1 or not exponent_hi > -1:
            raise ValueError("quad_singular requires both exponents > -1, got "
                             f"({exponent_lo}, {exponent_hi})")
        if hi < lo:
            raise ValueError(f"quad_singular requires hi >= lo, got [{lo}, {hi}]")
        if hi == lo:
            return mp.mpf(0)
        eps = ctx.eps
        half = (hi - lo) / 2
        mid = (hi + lo) / 2
        prev = None
        for n in _ORDERS:
            nodes, weights = jacobi_rule(n, exponent_hi, exponent_lo, ctx.digits)
            total = mp.mpf(0)
            for u, w in zip(nodes, weights):
                x = mid + half * u
                # strip the singular factors the caller baked into f; the
                # (half^exponent) scale they carry cancels the Jacobi map's
                g = f(x) * (1 + u) ** (-exponent_lo) * (1 - u) ** (-exponent_hi)
                total += w * g
            total *= half
            if prev is not None and _converged(total, prev, eps):
                return total
            prev = total
        raise PrecisionFailure(
            "quad_singular did not converge by 4096 nodes on "
            f"[{mp.nstr(lo, 8)}, {mp.nstr(hi, 8)}]", digits=ctx.digits)


def quad_tail(f, start, decay_rate, ctx: PrecisionContext) -> mp.mpf:
    """Integral of f over [start, oo) for f bounded by poly * e^(-decay_rate*y).

    Gauss-Legendre panels whose lengths double (so any singularity strictly
    below `start` stays proportionally distant), truncated once two
    consecutive panels fall below eps relative to the running total.
    """
    with mp.workdps(ctx.digits + 10):
        start = mp.mpf(start)
        decay_rate = mp.mpf(decay_rate)
        if not decay_rate > 0:
            raise ValueError(f"quad_tail requires decay_rate > 0, got {decay_rate}")
        eps = ctx.eps
        ell = min(mp.mpf(1), 1 / decay_rate)
        if start > 0:
            ell = min(ell, start / 2)
        total = mp.mpf(0)
        a = start
        small_run = 0
        for _ in range(240):
            b = a + ell
            piece = quad_singular(f, a, b, 0, 0, ctx)
            total += piece
            if abs(piece) <= eps * abs(total) / 10:
                small_run += 1
                if small_run >= 2:
                    return total
            else:
                small_run = 0
            a = b
            ell *= 2
        raise PrecisionFailure(
            f"quad_tail did not truncate within 240 panels from {mp.nstr(start, 8)}",
            digits=ctx.digits)
