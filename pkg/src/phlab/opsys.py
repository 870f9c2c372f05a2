"""Monic orthogonal polynomials for the perturbed weight, plus the auxiliary
quantities R_n, r_n, H_n, sigma_n computed by two independent routes.

The polynomial data comes from a symmetric triangular (LDL^T) factorization
of the Hankel moment matrix M_ij = mu_{i+j}: the n-th pivot is the squared
norm h_n, the subdiagonal of the unit-triangular factor carries the
sub-leading coefficients p(n,t), and the three-term recurrence data follow
algebraically:

    alpha_n = p(n,t) - p(n+1,t),   beta_n = h_n / h_{n-1}.

The auxiliary quantities have a fast recurrence route,

    R_n = (alpha_n - (2n+1+alpha+gamma)) / t,
    r_n = (beta_n + p(n,t)) / t,
    H_n = -t * sum_{j<n} R_j,

and an independent quadrature/differentiation route working from the
definitions; their agreement is exactly what the verification suite tests,
so nothing in this module assumes it.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp

from .context import PrecisionContext, make_context
from .errors import PrecisionFailure
from .numerics.derivatives import central_derivative
from .weight import (MomentTable, WeightParams, integral_against_weight,
                     moment_table)


@dataclass(frozen=True)
class OPSystem:
    """Recurrence data of P_0..P_{n_max} at one (params, t).

    h[n] are squared norms, p1[n] = p(n,t) with p(0,t) = 0, alpha_rec[n] for
    n < n_max, beta_rec[n] with beta_rec[0] = 0.  coeff rows hold monic
    coefficients of P_n (ascending powers); they are built lazily from the
    recurrence since large-n scans never evaluate polynomials.
    """

    n_max: int
    h: tuple
    p1: tuple
    alpha_rec: tuple
    beta_rec: tuple
    coeff: tuple | None
    params: WeightParams
    digits: int

    def _coeff_rows(self) -> tuple:
        if self.coeff is None:
            with mp.workdps(self.digits + 10):
                rows = [(mp.mpf(1),)]
                if self.n_max >= 1:
                    rows.append((-self.alpha_rec[0], mp.mpf(1)))
                for n in range(1, self.n_max):
                    pn = rows[n]
                    pm = rows[n - 1]
                    a = self.alpha_rec[n]
                    b = self.beta_rec[n]
                    nxt = []
                    for k in range(n + 2):
                        c = pn[k - 1] if k >= 1 else mp.mpf(0)
                        if k <= n:
                            c -= a * pn[k]
                        if k <= n - 1:
                            c -= b * pm[k]
                        nxt.append(c)
                    rows.append(tuple(nxt))
            object.__setattr__(self, "coeff", tuple(rows))
        return self.coeff


@dataclass(frozen=True)
class AuxQuantities:
    """R[0..n_max-1], r[0..n_max], H[0..n_max], sigma[n] = H[n] - n*gamma.

    route records which of the two computation routes produced the data;
    conventions r[0] = H[0] = 0.
    """

    R: tuple
    r: tuple
    H: tuple
    sigma: tuple
    route: str
    t: mp.mpf


def _ldlt(mu, n_max: int, digits: int):
    """Pivots and subdiagonal of the LDL^T factorization of (mu_{i+j})."""
    with mp.workdps(digits):
        rows = []   # unit-triangular rows L[i][0..i-1]
        urows = []  # U[i][k] = L[i][k] * d_k
        d = []
        sub = [mp.mpf(0)]  # L[n][n-1], n >= 1; padded at n=0
        for i in range(n_max + 1):
            li = []
            ui = []
            for j in range(i):
                s = mu[i + j] - mp.fdot(li[:j], urows[j][:j])
                lij = s / d[j]
                li.append(lij)
                ui.append(lij * d[j])
            piv = mu[2 * i] - mp.fdot(li, ui)
            if not piv > 0:
                raise PrecisionFailure(
                    f"Hankel pivot h_{i} not positive at {digits} digits",
                    digits=digits, index=i)
            if i >= 1:
                sub.append(li[i - 1])
            d.append(piv)
            rows.append(li)
            urows.append(ui)
        return d, sub


def build_ops(m: MomentTable, n_max: int, ctx: PrecisionContext) -> OPSystem:
    """Factor the moment matrix and assemble the recurrence data.

    Working precision is raised to 40 + ceil(2.5*n_max) digits if the
    context asks for less (Hankel conditioning loses about one digit per
    row); a nonpositive pivot escalates by doubling, three retries, and the
    moment table is recomputed whenever it is the precision bottleneck.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    if m.k_max < 2 * n_max:
        raise ValueError(
            f"moment table has k_max = {m.k_max}, need >= {2 * n_max}")
    digits = max(ctx.digits, 40 + int(mp.ceil(mp.mpf(5) * n_max / 2)))
    table = m
    failure = None
    for _ in range(4):
        if table.digits < digits:
            table = moment_table(table.params, table.k_max, make_context(digits))
        try:
            d, sub = _ldlt(table.mu, n_max, digits + 10)
            failure = None
            break
        except PrecisionFailure as exc:
            failure = exc
            digits *= 2
    if failure is not None:
        raise PrecisionFailure(
            f"Hankel factorization failed after escalation to {digits // 2} "
            f"digits (n = {failure.index})", digits=digits // 2,
            index=failure.index) from failure
    with mp.workdps(digits + 10):
        h = tuple(d)
        p1 = tuple(-s for s in sub)
        alpha_rec = tuple(p1[n] - p1[n + 1] for n in range(n_max))
        beta_rec = (mp.mpf(0),) + tuple(h[n] / h[n - 1] for n in range(1, n_max + 1))
    return OPSystem(n_max=n_max, h=h, p1=p1, alpha_rec=alpha_rec,
                    beta_rec=beta_rec, coeff=None, params=table.params,
                    digits=digits)


def hankel_det(ops: OPSystem, n: int) -> mp.mpf:
    """D_n = prod_{j<n} h_j; D_0 := 1.  Requires n <= n_max + 1."""
    if n < 0 or n > ops.n_max + 1:
        raise ValueError(f"n must be in [0, {ops.n_max + 1}], got {n}")
    with mp.workdps(ops.digits + 10):
        out = mp.mpf(1)
        for j in range(n):
            out *= ops.h[j]
        return out


def eval_pn(ops: OPSystem, n: int, x, deriv_order: int = 0) -> mp.mpf:
    """Horner evaluation of P_n, P_n' or P_n'' from the monic coefficients."""
    if n < 0 or n > ops.n_max:
        raise ValueError(f"n must be in [0, {ops.n_max}], got {n}")
    if deriv_order not in (0, 1, 2):
        raise ValueError(f"deriv_order must be 0, 1 or 2, got {deriv_order}")
    row = ops._coeff_rows()[n]
    with mp.workdps(ops.digits + 10):
        x = mp.mpf(x)
        v = mp.mpf(0)
        if deriv_order == 0:
            for c in reversed(row):
                v = v * x + c
        elif deriv_order == 1:
            for k in range(len(row) - 1, 0, -1):
                v = v * x + k * row[k]
        else:
            for k in range(len(row) - 1, 1, -1):
                v = v * x + k * (k - 1) * row[k]
        return v


def aux_recurrence(ops: OPSystem, p: WeightParams) -> AuxQuantities:
    """R, r from the recurrence data; H as the partial sums -t sum R_j."""
    t = p.t
    if t == 0:
        raise ValueError("recurrence route divides by t; need t > 0")
    with mp.workdps(ops.digits + 10):
        R = tuple((ops.alpha_rec[n] - (2 * n + 1 + p.alpha + p.gamma)) / t
                  for n in range(ops.n_max))
        r = (mp.mpf(0),) + tuple((ops.beta_rec[n] + ops.p1[n]) / t
                                 for n in range(1, ops.n_max + 1))
        H = [mp.mpf(0)]
        acc = mp.mpf(0)
        for n in range(1, ops.n_max + 1):
            acc += R[n - 1]
            H.append(-t * acc)
        sigma = tuple(H[n] - n * p.gamma for n in range(ops.n_max + 1))
    return AuxQuantities(R=R, r=r, H=tuple(H), sigma=sigma,
                         route="recurrence", t=t)


def aux_quadrature(ops: OPSystem, p: WeightParams, ctx: PrecisionContext) -> AuxQuantities:
    """R, r from their defining integrals; H from t * d/dt ln D_n.

    The integrals carry |y-t|^(gamma-1) with a sign flip across t, handled
    by the weighted-panel splitter; the determinant derivative uses builds
    at four shifted t values carried at digits + 10.
    """
    t = p.t
    if not t > 0:
        raise ValueError("quadrature route needs t > 0")
    # the integrals feed residuals checked at ~10^(-digits/2); asking for the
    # full working precision here would force far deeper quadrature ladders
    # for accuracy nothing downstream can see.  Clamped under the build
    # precision: the integrand cannot out-resolve its own coefficients
    rctx = make_context(max(30, min(max(80, ctx.digits // 2 + 40),
                                    ops.digits - 10)))
    hctx = make_context(ctx.digits + 10)
    with mp.workdps(hctx.digits + 10):
        R = []
        for n in range(ops.n_max):
            val = integral_against_weight(
                lambda y, n=n: eval_pn(ops, n, y) ** 2, p, rctx,
                shiftt=-1, signed=True)
            R.append(p.gamma / ops.h[n] * val)
        r = [mp.mpf(0)]
        for n in range(1, ops.n_max + 1):
            val = integral_against_weight(
                lambda y, n=n: eval_pn(ops, n, y) * eval_pn(ops, n - 1, y),
                p, rctx, shiftt=-1, signed=True)
            r.append(p.gamma / ops.h[n - 1] * val)

        # ln D_n at four shifted t values, sharing one build per shift
        delta = ctx.fd_step
        lnd = {}
        for j in (-2, -1, 1, 2):
            tj = t + j * delta
            tab = moment_table(p.with_t(tj), 2 * ops.n_max, hctx)
            oj = build_ops(tab, ops.n_max, hctx)
            lnd[j] = [mp.log(hankel_det(oj, n)) for n in range(ops.n_max + 1)]
        H = [mp.mpf(0)]
        for n in range(1, ops.n_max + 1):
            dn = (-lnd[2][n] + 8 * lnd[1][n] - 8 * lnd[-1][n] + lnd[-2][n]) / (12 * delta)
            H.append(t * dn)
        sigma = tuple(H[n] - n * p.gamma for n in range(ops.n_max + 1))
    return AuxQuantities(R=tuple(R), r=tuple(r), H=tuple(H), sigma=sigma,
                         route="quadrature", t=t)
