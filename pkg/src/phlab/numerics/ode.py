"""Adaptive high-order explicit ODE integration at configurable precision.

Gragg's modified midpoint with polynomial (Richardson) extrapolation, even
step-number sequence 2,4,6,...  Order and step size are controlled together
in the classical extrapolation-code style: convergence is tested only in the
window {k-1, k, k+1} around the target row k, the error estimates
err_j ~ H^(2j+1) convert into candidate steps H_j and work rates
W_j = (function evals)/H_j, and the cheaper neighbor of k becomes the next
target.  The maximum depth grows with -log10(tol), so tight tolerances raise
the order instead of grinding the step size down.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp

from ..context import PrecisionContext
from ..errors import PrecisionFailure, SingularityEncountered

_SAFE = mp.mpf("0.94")
_SHRINK_MIN = mp.mpf("0.02")
_ROW_GROW_MAX = mp.mpf(4)
_STEP_GROW_MAX = mp.mpf(8)


@dataclass(frozen=True)
class OdeTrajectory:
    """Accepted integration points: t_grid[i] maps to states[i].

    local_error_estimates[i] is the accepted step's scaled error estimate
    (absolute, in the units of the solution components); index 0 is 0 for
    the initial condition.
    """

    t_grid: list
    states: list
    local_error_estimates: list

    def endpoint(self):
        return self.states[-1]


def _midpoint_row(field, t, y, f0, H, n):
    """One modified-midpoint pass with n substeps plus Gragg smoothing."""
    h = H / n
    dim = len(y)
    zm = list(y)
    zc = [y[i] + h * f0[i] for i in range(dim)]
    for m in range(1, n):
        fm = field(t + m * h, zc)
        zn = [zm[i] + 2 * h * fm[i] for i in range(dim)]
        zm, zc = zc, zn
    fe = field(t + H, zc)
    return [(zc[i] + zm[i] + h * fe[i]) / 2 for i in range(dim)]


class _Stepper:
    def __init__(self, field, tol, kmax):
        self.field = field
        self.tol = tol
        self.kmax = kmax
        self.seq = [2 * (j + 1) for j in range(kmax + 1)]
        self.cost = [1 + sum(self.seq[:j + 1]) for j in range(kmax + 1)]

    def attempt(self, t, y, H_signed):
        """Build tableau rows up to k_targ+1; return per-row data."""
        f0 = self.field(t, y)
        dim = len(y)
        scale = [1 + abs(v) for v in y]
        rows = []
        err = {}
        top = min(self.k_targ + 1, self.kmax)
        accepted = None
        for j in range(top + 1):
            try:
                tj0 = _midpoint_row(self.field, t, y, f0, H_signed, self.seq[j])
            except (ZeroDivisionError, ValueError, OverflowError):
                err[j] = mp.inf
                break
            row = [tj0]
            for k in range(1, j + 1):
                fac = (mp.mpf(self.seq[j]) / self.seq[j - k]) ** 2 - 1
                row.append([row[k - 1][i]
                            + (row[k - 1][i] - rows[-1][k - 1][i]) / fac
                            for i in range(dim)])
            rows.append(row)
            if any(not mp.isfinite(v) for v in row[-1]):
                err[j] = mp.inf
                break
            if j >= 1:
                e = mp.mpf(0)
                for i in range(dim):
                    e = max(e, abs(row[j][i] - row[j - 1][i]) / scale[i])
                err[j] = e
                # accept only inside the convergence window so that higher
                # rows keep being exercised and the order can climb
                if j >= self.k_targ - 1 and e <= self.tol:
                    accepted = (j, row[j], e)
                    break
        return accepted, err

    def candidates(self, err, H):
        cand_h = {}
        cand_w = {}
        for j, e in err.items():
            if j < 1 or not mp.isfinite(e):
                continue
            if e > 0:
                fac = _SAFE * (self.tol / e) ** (mp.mpf(1) / (2 * j + 1))
            else:
                fac = _ROW_GROW_MAX
            fac = min(_ROW_GROW_MAX, max(_SHRINK_MIN, fac))
            cand_h[j] = H * fac
            cand_w[j] = self.cost[j] / cand_h[j]
        return cand_h, cand_w

    def next_order_and_step(self, j_acc, cand_h, cand_w):
        """Classical order selection: move to the cheaper neighbor of the
        accepted row; when moving up, predict its step from the work ratio."""
        k = j_acc
        h_k = cand_h.get(k)
        if h_k is None:
            return self.k_targ, None
        k_new, h_new = k, h_k
        w_k = cand_w[k]
        if k - 1 in cand_w and k - 1 >= 1 and cand_w[k - 1] < mp.mpf("0.8") * w_k:
            k_new, h_new = k - 1, cand_h[k - 1]
        elif k < self.kmax - 1 and (j_acc < self.k_targ
                                    or (k - 1 in cand_w
                                        and w_k < mp.mpf("0.9") * cand_w[k - 1])):
            k_new = k + 1
            h_new = h_k * self.cost[k + 1] / self.cost[k]
        return max(3, min(self.kmax - 1, k_new)), h_new


def ode_integrate(field, y0, t0, t1, tol, ctx: PrecisionContext, *,
                  checkpoints=None, max_steps: int = 100000) -> OdeTrajectory:
    """Integrate y' = field(t, y) from t0 to t1 (either direction).

    Per-step error is held below tol in the mixed norm |e_i|/(1+|y_i|).
    When the step size collapses (pole in the solution) the failure is
    reported as singularity-encountered carrying the last accepted t; that
    exception (also when raised by `field` itself) carries the accepted
    prefix of the trajectory as its `partial` attribute.
    `checkpoints` lists abscissae the grid must hit exactly.
    """
    with mp.workdps(ctx.digits + 15):
        tol = mp.mpf(tol)
        if not tol >= 100 * ctx.eps:
            raise ValueError(
                f"tol must be >= 100*eps = {mp.nstr(100 * ctx.eps, 5)}, got {mp.nstr(tol, 5)}")
        t0 = mp.mpf(t0)
        t1 = mp.mpf(t1)
        y = [mp.mpf(v) for v in y0]
        t_grid = [t0]
        states = [tuple(y)]
        errs = [mp.mpf(0)]
        if t1 == t0:
            return OdeTrajectory(t_grid, states, errs)
        sign = mp.mpf(1) if t1 > t0 else mp.mpf(-1)
        span = abs(t1 - t0)
        h_min = span * mp.mpf(10) ** (-2 * ctx.digits)
        digits_needed = int(float(-mp.log10(tol)))
        kmax = max(8, min(40, digits_needed // 2 + 1))
        st = _Stepper(field, tol, kmax)
        st.k_targ = max(3, min(kmax - 1, digits_needed // 6))

        marks = []
        if checkpoints is not None:
            for c in checkpoints:
                c = mp.mpf(c)
                if (c - t0) * sign > 0 and (t1 - c) * sign > 0:
                    marks.append(c)
            marks.sort(key=lambda c: float((c - t0) * sign), reverse=True)

        t = t0
        H = span / 20
        n_steps = 0
        while (t1 - t) * sign > 0:
            n_steps += 1
            if n_steps > max_steps:
                raise PrecisionFailure(
                    f"ode_integrate exceeded {max_steps} steps", digits=ctx.digits)
            limit = abs(t1 - t)
            if marks:
                limit = min(limit, abs(marks[-1] - t))
            H_eff = min(H, limit)
            if H_eff < h_min:
                raise SingularityEncountered(
                    "step size underflow in ode_integrate", last_good=t,
                    partial=OdeTrajectory(t_grid, states, errs))

            try:
                accepted, err = st.attempt(t, y, sign * H_eff)
            except SingularityEncountered as exc:
                exc.partial = OdeTrajectory(t_grid, states, errs)
                raise
            cand_h, cand_w = st.candidates(err, H_eff)

            if accepted is None:
                finite = [j for j, e in err.items() if j >= 1 and mp.isfinite(e)]
                if finite:
                    j_hi = max(finite)
                    h_fail = cand_h.get(j_hi, H_eff / 4)
                    H = min(h_fail, mp.mpf("0.7") * H_eff)
                else:
                    H = H_eff / 4
                continue

            j_acc, y_new, e_acc = accepted
            t = t + sign * H_eff
            if marks and abs(marks[-1] - t) <= span * mp.mpf(10) ** (-ctx.digits - 5):
                t = marks.pop()
            y = list(y_new)
            t_grid.append(t)
            states.append(tuple(y))
            errs.append(e_acc)

            k_new, h_new = st.next_order_and_step(j_acc, cand_h, cand_w)
            st.k_targ = k_new
            if h_new is not None:
                H = min(h_new, _STEP_GROW_MAX * H_eff)
            else:
                H = H_eff
        return OdeTrajectory(t_grid, states, errs)
