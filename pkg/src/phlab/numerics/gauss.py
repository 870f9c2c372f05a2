"""Gauss-Jacobi quadrature rules at arbitrary precision.

Nodes are polished by Newton iteration on the orthonormal-polynomial
recurrence, seeded from the double-precision eigenvalues of the Golub-Welsch
tridiagonal matrix.  Weights come from the derivative identity
lambda_i = 1/(sqrt(b_n) p_n'(x_i) p_{n-1}(x_i)) for orthonormal polynomials,
which falls out of the same recurrence sweep.

Rules are cached per (n, a, b, digits bucket); callers map and scale.
"""
from __future__ import annotations

import mpmath as mp
import numpy as np
from scipy.linalg import eigh_tridiagonal

from ..errors import PrecisionFailure

_CACHE: dict[tuple, tuple[list, list]] = {}
_BUCKET = 30


def _bucket(digits: int) -> int:
    return _BUCKET * ((digits + _BUCKET - 1) // _BUCKET)


def _jacobi_rec(n: int, a, b):
    """Monic three-term recurrence (a_k, b_k) and mass mu0 for the Jacobi
    weight (1-x)^a (1+x)^b; convention pi_{k+1} = (x-a_k)pi_k - b_k pi_{k-1}."""
    mu0 = mp.mpf(2) ** (a + b + 1) * mp.gamma(a + 1) * mp.gamma(b + 1) / mp.gamma(a + b + 2)
    ak = []
    bk = [mp.mpf(0)]
    for k in range(n):
        if k == 0:
            ak.append((b - a) / (a + b + 2))
        else:
            den = (2 * k + a + b) * (2 * k + a + b + 2)
            ak.append((b * b - a * a) / den)
        j = k + 1
        if j == 1:
            bk.append(4 * (a + 1) * (b + 1) / ((a + b + 2) ** 2 * (a + b + 3)))
        else:
            den = (2 * j + a + b) ** 2 * (2 * j + a + b + 1) * (2 * j + a + b - 1)
            bk.append(4 * j * (j + a) * (j + b) * (j + a + b) / den)
    return ak, bk, mu0


def _eval_orthonormal(x, n: int, ak, sq, inv_sq, mu0):
    """Return (p_n, p_n', p_{n-1}) for the orthonormal family at x."""
    pkm1 = mp.mpf(0)
    dkm1 = mp.mpf(0)
    pk = 1 / mp.sqrt(mu0)
    dk = mp.mpf(0)
    for k in range(n):
        c = x - ak[k]
        s = sq[k]
        v = inv_sq[k + 1]
        pkp1 = (c * pk - s * pkm1) * v
        dkp1 = (c * dk + pk - s * dkm1) * v
        pkm1, pk = pk, pkp1
        dkm1, dk = dk, dkp1
    return pk, dk, pkm1


def jacobi_rule(n: int, a, b, digits: int):
    """Nodes/weights with sum w_i g(x_i) = int_-1^1 g(x)(1-x)^a(1+x)^b dx."""
    dps = _bucket(digits) + 20
    with mp.workdps(dps):
        a = mp.mpf(a)
        b = mp.mpf(b)
        key = (n, mp.nstr(a, 25), mp.nstr(b, 25), dps)
        hit = _CACHE.get(key)
        if hit is not None:
            return hit
        ak, bk, mu0 = _jacobi_rec(n, a, b)
        diag = np.array([float(v) for v in ak])
        off = np.array([float(mp.sqrt(bk[k])) for k in range(1, n)])
        seeds = eigh_tridiagonal(diag, off, eigvals_only=True)
        sq = [mp.sqrt(v) if v != 0 else mp.mpf(0) for v in bk]
        inv_sq = [1 / v if v != 0 else mp.mpf(0) for v in sq]
        nodes = []
        weights = []
        for s in seeds:
            x, dn, pnm1 = _newton_node(mp.mpf(float(s)), n, ak, sq, inv_sq, mu0, dps)
            den = sq[n] * dn * pnm1
            if den <= 0:
                raise PrecisionFailure(
                    f"non-positive Gauss weight at order {n} (node {float(x):.6g})",
                    digits=digits)
            nodes.append(x)
            weights.append(1 / den)
        rule = (nodes, weights)
        _CACHE[key] = rule
        return rule


def _newton_node(x, n: int, ak, sq, inv_sq, mu0, dps_final: int):
    """Newton-polish one node, doubling working precision as it converges.

    Quadratic convergence means only the last couple of iterations need the
    full precision; the returned derivative values feed the weight formula
    (the residual step is far below the weight's own sensitivity).
    """
    lvl = 40
    while 2 * lvl < dps_final:
        with mp.workdps(lvl):
            for _ in range(2):
                pn, dn, _ = _eval_orthonormal(x, n, ak, sq, inv_sq, mu0)
                if dn == 0:
                    break
                x = x - pn / dn
        lvl = 2 * lvl + 10
    tol = mp.mpf(10) ** (-(dps_final - 8))
    for _ in range(12):
        pn, dn, pnm1 = _eval_orthonormal(x, n, ak, sq, inv_sq, mu0)
        step = pn / dn
        x = x - step
        if abs(step) <= tol * (1 + abs(x)):
            return x, dn, pnm1
    raise PrecisionFailure(
        f"Gauss node Newton iteration stalled at order {n}", digits=dps_final)
