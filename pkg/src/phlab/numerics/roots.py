"""Real roots of real polynomials with per-root certification."""
from __future__ import annotations

import mpmath as mp

from ..context import PrecisionContext
from ..errors import PrecisionFailure


def _horner(coeffs_desc, x):
    v = mp.mpf(0)
    for c in coeffs_desc:
        v = v * x + c
    return v


def _poly_mod(num, den, zero_tol):
    """Remainder of num/den (descending coeffs), small coefficients zeroed."""
    num = list(num)
    dn = len(den) - 1
    while len(num) - 1 >= dn:
        if num[0] == 0:
            num.pop(0)
            continue
        q = num[0] / den[0]
        for i in range(len(den)):
            num[i] -= q * den[i]
        num.pop(0)
    out = [c if abs(c) > zero_tol else mp.mpf(0) for c in num]
    while out and out[0] == 0:
        out.pop(0)
    return out


def _squarefree(desc, zero_tol):
    """Divide out gcd(p, p') so repeated roots become simple.

    The repeated factors met here are exact algebraic squares, so the Euclid
    remainders genuinely vanish at working precision; nearly-repeated roots
    collapse too, which is consistent with the dedupe tolerance downstream.
    """
    deg = len(desc) - 1
    dp = [desc[i] * (deg - i) for i in range(deg)]
    a, b = desc, dp
    while b:
        scale = max(abs(c) for c in b)
        r = _poly_mod(a, b, zero_tol * scale)
        a, b = b, r
    gcd = a
    if len(gcd) <= 1:
        return desc
    q = list(desc)
    out = []
    for _ in range(len(desc) - len(gcd) + 1):
        c = q[0] / gcd[0]
        out.append(c)
        for i in range(len(gcd)):
            q[i] -= c * gcd[i]
        q.pop(0)
    return out


def poly_real_roots(coeffs, ctx: PrecisionContext) -> list:
    """All distinct real roots of sum_k coeffs[k] x^k, ascending order.

    Square-free reduction, then a full complex solve (so clustered and even-
    multiplicity roots are not lost), Newton polish against the original
    polynomial's square-free part, and certification by sign change or by
    residual below sqrt(eps) relative to the coefficient scale.  Repeated
    roots are reported once.
    """
    coeffs = list(coeffs)
    if len(coeffs) == 0:
        raise ValueError("empty coefficient list")
    if len(coeffs) == 1 or all(c == 0 for c in coeffs[1:]):
        raise ValueError("polynomial must have degree >= 1")
    if coeffs[-1] == 0:
        raise ValueError("leading coefficient must be nonzero")
    with mp.workdps(2 * ctx.digits + 20):
        cs = [mp.mpf(c) for c in coeffs]
        desc = cs[::-1]
        deg = len(desc) - 1
        cscale = max(abs(c) for c in cs)
        desc_n = [c / desc[0] for c in desc]
        sf = _squarefree(desc_n, mp.mpf(10) ** (-(ctx.digits * 3) // 2))
        sdeg = len(sf) - 1
        sder = [sf[i] * (sdeg - i) for i in range(sdeg)]
        try:
            allroots = mp.polyroots(sf, maxsteps=300, extraprec=10 * ctx.digits)
        except mp.libmp.NoConvergence as exc:
            raise PrecisionFailure(
                f"polynomial root iteration did not converge: {exc}",
                digits=ctx.digits) from exc

        half = mp.mpf(10) ** (-ctx.digits // 2)
        im_tol = half * 100
        reals = []
        for r in allroots:
            size = 1 + abs(r)
            if abs(mp.im(r)) > im_tol * size:
                continue
            x = mp.re(r)
            for _ in range(ctx.digits):
                d = _horner(sder, x)
                if d == 0:
                    break
                step = _horner(sf, x) / d
                if abs(step) > size:
                    break
                x -= step
                if abs(step) <= mp.mpf(10) ** (-2 * ctx.digits) * size:
                    break
            reals.append(x)
        reals.sort()

        out = []
        for x in reals:
            if out and abs(x - out[-1]) <= half * (1 + abs(x)):
                continue
            scale = cscale * max(1, abs(x)) ** deg
            delta = half * (1 + abs(x)) / 10
            certified = _horner(desc, x - delta) * _horner(desc, x + delta) < 0
            if not certified:
                certified = abs(_horner(desc, x)) <= mp.sqrt(ctx.eps) * scale
            if certified:
                out.append(x)
        return out
