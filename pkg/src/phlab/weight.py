"""The perturbed Laguerre weight, its parameters, and its moments.

The weight on [0, oo) is

    w(x, t) = x^alpha e^(-x) |x - t|^gamma (A + B theta(x - t)),

a Laguerre density multiplied by an algebraic factor anchored at t whose
strength jumps from A to A+B across t.  Everything downstream (orthogonal
polynomials, Hankel determinants, ladder relations) is a functional of the
moment sequence mu_k(t) = int_0^oo x^k w(x, t) dx produced here.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from typing import Callable

import mpmath as mp

from .context import PrecisionContext
from .errors import PrecisionFailure
from .numerics.gauss import jacobi_rule

# parameters are parsed once, at a fixed precision, so that every later
# computation at any working precision sees the same exact binary value
_PARSE_DPS = 80
# cache keys print this many significant digits: enough to separate values
# differing by any finite-difference step used anywhere in the package
_KEY_DIGITS = 90


def _as_mpf(v) -> mp.mpf:
    if isinstance(v, mp.mpf):
        return v
    with mp.workdps(_PARSE_DPS):
        if isinstance(v, float):
            return mp.mpf(repr(v))
        return mp.mpf(v)


@dataclass(frozen=True)
class WeightParams:
    """Parameter bundle (alpha, gamma, A, B, t) of the weight."""

    alpha: mp.mpf
    gamma: mp.mpf
    bigA: mp.mpf
    bigB: mp.mpf
    t: mp.mpf

    def __post_init__(self):
        for name in ("alpha", "gamma", "bigA", "bigB", "t"):
            object.__setattr__(self, name, _as_mpf(getattr(self, name)))

    def key(self) -> tuple[str, ...]:
        """Canonical string form, stable across working precisions."""
        with mp.workdps(_PARSE_DPS):
            return tuple(mp.nstr(getattr(self, f), _KEY_DIGITS)
                         for f in ("alpha", "gamma", "bigA", "bigB", "t"))

    def with_t(self, t) -> "WeightParams":
        return WeightParams(self.alpha, self.gamma, self.bigA, self.bigB,
                            t if isinstance(t, mp.mpf) else _as_mpf(t))


@dataclass(frozen=True)
class MomentTable:
    """Moments mu[k] = mu_k(t), k = 0..k_max, at fixed parameters.

    err_est is the relative accuracy the construction aimed for (guard
    digits beyond it were used internally).
    """

    params: WeightParams
    k_max: int
    mu: tuple
    method: str
    digits: int
    err_est: mp.mpf


def validate_params(p: WeightParams) -> list[str]:
    """Return the list of violated parameter constraints (empty if valid)."""
    bad = []
    if not p.alpha > 0:
        bad.append("alpha > 0")
    if not p.gamma > 0:
        bad.append("gamma > 0")
    if not p.bigA >= 0:
        bad.append("bigA >= 0")
    if not p.bigA + p.bigB >= 0:
        bad.append("bigA + bigB >= 0")
    if p.bigA == 0 and p.bigA + p.bigB == 0:
        bad.append("weight identically zero (bigA = 0 and bigA + bigB = 0)")
    if not p.t >= 0:
        bad.append("t >= 0")
    return bad


def _require_valid(p: WeightParams) -> None:
    bad = validate_params(p)
    if bad:
        raise ValueError("invalid weight parameters: " + "; ".join(bad))


def weight_eval(x, p: WeightParams) -> mp.mpf:
    """w(x, t) with theta(0) := 0.  Requires x >= 0."""
    x = mp.mpf(x)
    if x < 0:
        raise ValueError(f"weight is defined on [0, oo), got x = {x}")
    if x == 0:
        return mp.mpf(0)
    jump = p.bigA + p.bigB if x > p.t else p.bigA
    return x ** p.alpha * mp.exp(-x) * abs(x - p.t) ** p.gamma * jump


def v0_prime(x, p: WeightParams) -> mp.mpf:
    """Derivative 1 - alpha/x of the unperturbed potential x - alpha ln x."""
    x = mp.mpf(x)
    if x == 0:
        raise ValueError("v0' is singular at x = 0")
    return 1 - p.alpha / x


def _even_k(p: WeightParams) -> int:
    """gamma as the even integer 2K, or raise."""
    g = p.gamma
    gi = int(mp.nint(g))
    if g != gi or gi <= 0 or gi % 2 != 0:
        raise ValueError(
            f"closed-form moments need gamma = 2K for a positive integer K, got {g}")
    return gi // 2


def moments_closed(p: WeightParams, k_max: int, ctx: PrecisionContext) -> MomentTable:
    """Moment table via the binomial expansion of (x-t)^(2K).

    mu_k = sum_j C(2K,j)(-t)^(2K-j) [A*glow(k+alpha+j+1, t)
                                     + (A+B)*Gup(k+alpha+j+1, t)].
    The alternating sum cancels; the computation runs with guard digits and
    re-runs once if the measured cancellation exceeded the initial guard.
    """
    _require_valid(p)
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    kk = _even_k(p)
    guard_spec = int(mp.ceil((2 * kk + k_max) * mp.log10(max(p.t, mp.mpf(1)))))
    guard = min(guard_spec, 40) + 10
    for _ in range(3):
        mu, worst = _closed_pass(p, k_max, kk, ctx.digits + guard)
        if worst <= mp.mpf(10) ** (guard - 10):
            table = MomentTable(params=p, k_max=k_max, mu=tuple(mu),
                                method="closed", digits=ctx.digits,
                                err_est=ctx.eps)
            _check_table(table)
            return table
        guard = int(mp.ceil(mp.log10(worst))) + 20
    raise PrecisionFailure("closed-form moments: cancellation exceeded guard "
                           "digits three times", digits=ctx.digits)


def _closed_pass(p: WeightParams, k_max: int, kk: int, dps: int):
    with mp.workdps(dps):
        t = +p.t
        a = +p.alpha
        wA = +p.bigA
        wAB = p.bigA + p.bigB
        binom = [mp.binomial(2 * kk, j) for j in range(2 * kk + 1)]
        worst = mp.mpf(1)
        mu = []
        if p.bigB == 0 or t == 0:
            # pure Gamma ladder; covers the large-n scans where k_max is big
            top = k_max + 2 * kk
            gam = [mp.gamma(a + 1)]
            for m in range(top):
                gam.append(gam[-1] * (a + 1 + m))
            for k in range(k_max + 1):
                tot = mp.mpf(0)
                big = mp.mpf(0)
                for j in range(2 * kk + 1):
                    term = binom[j] * (-t) ** (2 * kk - j) * gam[k + j]
                    big = max(big, abs(term))
                    tot += term
                tot *= wAB if t == 0 else wA
                mu.append(tot)
                if tot > 0:
                    worst = max(worst, big / tot)
        else:
            for k in range(k_max + 1):
                tot = mp.mpf(0)
                big = mp.mpf(0)
                for j in range(2 * kk + 1):
                    s = a + k + j + 1
                    lower = mp.gammainc(s, 0, t)
                    upper = mp.gammainc(s, t, mp.inf)
                    term = binom[j] * (-t) ** (2 * kk - j) * (wA * lower + wAB * upper)
                    big = max(big, abs(term))
                    tot += term
                mu.append(tot)
                if tot > 0:
                    worst = max(worst, big / tot)
        return mu, worst


# Measure vectors (nodes plus weights that already absorb the full weight
# function on one panel) are cached so repeated integrals against the same
# weight pay only for the smooth factor g.  Keyed per panel, order, digits.
_MEASURE_CACHE: dict = {}
_W_ORDERS = [24, 48, 96, 192, 384, 768, 1536, 3072]


def _measure_vectors(order: int, lo, hi, e_lo, e_hi, base, tag, digits: int):
    key = (order, tag)
    hit = _MEASURE_CACHE.get(key)
    if hit is not None:
        return hit
    nodes, weights = jacobi_rule(order, e_hi, e_lo, digits)
    half = (hi - lo) / 2
    mid = (hi + lo) / 2
    strip = bool(e_lo) or bool(e_hi)
    xs = []
    ws = []
    for u, w in zip(nodes, weights):
        x = mid + half * u
        if strip:
            # divide out the Jacobi factors; the half^exponent scale they
            # carry cancels against the map, leaving the plain half below
            w = w * (1 + u) ** (-e_lo) * (1 - u) ** (-e_hi)
        xs.append(x)
        ws.append(w * half * base(x))
    if len(_MEASURE_CACHE) > 3000:
        _MEASURE_CACHE.clear()
    _MEASURE_CACHE[key] = (xs, ws)
    return xs, ws


def _eval_panel(g: Callable, lo, hi, e_lo, e_hi, base, tag, eps, digits: int,
                floor=None) -> mp.mpf:
    tag = tag + (mp.nstr(lo, _KEY_DIGITS), mp.nstr(hi, _KEY_DIGITS))
    prev = None
    for order in _W_ORDERS:
        xs, ws = _measure_vectors(order, lo, hi, e_lo, e_hi, base, tag, digits)
        total = mp.mpf(0)
        scale = mp.mpf(0)
        for x, w in zip(xs, ws):
            term = w * g(x)
            total += term
            scale += abs(term)
        # a panel whose whole absolute mass sits below the error budget of the
        # surrounding integral needs no refinement at all
        if floor is not None and scale <= floor:
            return total
        # convergence is judged against the panel's absolute mass so that
        # sign-changing integrands with a nearly-zero panel value still pass
        target = 10 * eps * max(scale, abs(total))
        if floor is not None:
            target = max(target, floor)
        if prev is not None and abs(total - prev) <= target:
            return total
        prev = total
    raise PrecisionFailure(
        f"weight-panel quadrature did not converge by {_W_ORDERS[-1]} nodes on "
        f"[{mp.nstr(lo, 8)}, {mp.nstr(hi, 8)}]", digits=digits)


def _eval_tail(g: Callable, start, base, tag, eps, digits: int, head) -> mp.mpf:
    # panel lengths double but stay capped, so late panels resolve cheaply;
    # `head` sets the absolute noise floor inherited from the finite part
    ell = mp.mpf(1) if start <= 2 else start / 2
    total = mp.mpf(0)
    a = start
    small_run = 0
    zero = mp.mpf(0)
    for _ in range(240):
        b = a + ell
        floor = eps * max(abs(head), abs(total)) / 10
        piece = _eval_panel(g, a, b, zero, zero, base, tag, eps, digits,
                            floor=floor)
        total += piece
        if abs(piece) <= eps * max(abs(head), abs(total)) / 10:
            small_run += 1
            if small_run >= 2:
                return total
        else:
            small_run = 0
        a = b
        ell = min(2 * ell, mp.mpf(16))
    raise PrecisionFailure(
        f"weight-tail quadrature did not truncate within 240 panels from "
        f"{mp.nstr(start, 8)}", digits=digits)


def integral_against_weight(g: Callable, p: WeightParams, ctx: PrecisionContext,
                            *, shift0=0, shiftt=0, signed: bool = False) -> mp.mpf:
    """Integral of g(y) y^(alpha+shift0) e^(-y) |y-t|^(gamma+shiftt) (A+B theta)
    over [0, oo), optionally with an extra factor sgn(y - t) (signed=True).

    This is the one place that knows how to split the axis around the two
    algebraic singularities: a Gauss-Jacobi panel [0, t] carrying both
    endpoint exponents, a Jacobi panel [t, t+L] for the right-hand face,
    dyadically growing Legendre panels, and an exponential tail.  shift0 and
    shiftt absorb denominators like 1/y and 1/(y-t) from ladder integrands.
    """
    _require_valid(p)
    with mp.workdps(ctx.digits + 10):
        e0 = p.alpha + mp.mpf(shift0)
        et = p.gamma + mp.mpf(shiftt)
        if not e0 > -1 or not et > -1:
            raise ValueError(f"effective exponents must exceed -1, got ({e0}, {et})")
        t = +p.t
        wA = +p.bigA
        wAB = p.bigA + p.bigB
        digits = ctx.digits
        eps = ctx.eps
        tag = p.key() + (str(shift0), str(shiftt), signed, digits)
        zero = mp.mpf(0)
        if t == 0:
            def base0(y):
                return y ** (e0 + et) * mp.exp(-y) * wAB
            x_tail = mp.mpf(8)
            total = _eval_panel(g, zero, x_tail, e0 + et, zero, base0, tag, eps, digits)
            return total + _eval_tail(g, x_tail, base0, tag, eps, digits, total)

        sgn_left = mp.mpf(-1) if signed else mp.mpf(1)

        def base_left(y):
            return y ** e0 * mp.exp(-y) * (t - y) ** et * wA * sgn_left

        def base_right(y):
            return y ** e0 * mp.exp(-y) * (y - t) ** et * wAB

        total = mp.mpf(0)
        if wA != 0:
            total += _eval_panel(g, zero, t, e0, et, base_left, tag, eps, digits)
        if wAB == 0:
            return total
        ell = min(t, mp.mpf(4))
        total += _eval_panel(g, t, t + ell, et, zero, base_right, tag, eps, digits)
        x_tail = t + max(mp.mpf(8), t)
        a = t + ell
        while a < x_tail:
            b = min(t + 2 * (a - t), x_tail)
            total += _eval_panel(g, a, b, zero, zero, base_right, tag, eps, digits)
            a = b
        total += _eval_tail(g, x_tail, base_right, tag, eps, digits, total)
        return total


def moments_quadrature(p: WeightParams, k_max: int, ctx: PrecisionContext) -> MomentTable:
    """Moment table by singularity-aware quadrature; works for any gamma > 0."""
    _require_valid(p)
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    mu = []
    for k in range(k_max + 1):
        mu.append(integral_against_weight(lambda y, k=k: y ** k, p, ctx))
    table = MomentTable(params=p, k_max=k_max, mu=tuple(mu),
                        method="quadrature", digits=ctx.digits,
                        err_est=10 * ctx.eps)
    _check_table(table)
    return table


def _check_table(table: MomentTable) -> None:
    with mp.workdps(table.digits + 10):
        slack = 1 + mp.mpf(10) ** (-table.digits + 10)
        for k, m in enumerate(table.mu):
            if not m > 0:
                raise PrecisionFailure(f"moment mu_{k} not positive: {mp.nstr(m, 10)}",
                                       digits=table.digits, index=k)
        for k in range(1, table.k_max):
            if not table.mu[k] ** 2 <= table.mu[k - 1] * table.mu[k + 1] * slack:
                raise PrecisionFailure(
                    f"moment log-convexity violated at k = {k}",
                    digits=table.digits, index=k)


def moment_table(p: WeightParams, k_max: int, ctx: PrecisionContext,
                 cache_dir: str | None = None) -> MomentTable:
    """Closed form when gamma is an even integer, else quadrature; cached on
    disk when cache_dir (or PHL_CACHE_DIR) is set."""
    g = p.gamma
    use_closed = g == int(mp.nint(g)) and int(mp.nint(g)) > 0 and int(mp.nint(g)) % 2 == 0
    method = "closed" if use_closed else "quadrature"
    cache_dir = cache_dir or os.environ.get("PHL_CACHE_DIR")
    if cache_dir:
        hit = load_moments(p, k_max, ctx.digits, method, cache_dir)
        if hit is not None:
            return hit
    table = moments_closed(p, k_max, ctx) if use_closed else \
        moments_quadrature(p, k_max, ctx)
    if cache_dir:
        save_moments(table, cache_dir)
    return table


def _cache_path(p: WeightParams, k_max: int, digits: int, method: str,
                cache_dir: str) -> str:
    blob = json.dumps({"params": p.key(), "k_max": k_max, "digits": digits,
                       "method": method})
    h = hashlib.sha256(blob.encode()).hexdigest()[:24]
    return os.path.join(cache_dir, f"moments-{h}.json")


def save_moments(table: MomentTable, cache_dir: str) -> str:
    """Write a moment table as JSON (schema moments-v1), atomically."""
    os.makedirs(cache_dir, exist_ok=True)
    path = _cache_path(table.params, table.k_max, table.digits, table.method,
                       cache_dir)
    # enough decimal digits to reproduce the binary values exactly on load
    with mp.workdps(table.digits + 10):
        payload = {
            "version": "moments-v1",
            "params": dict(zip(("alpha", "gamma", "bigA", "bigB", "t"),
                               table.params.key())),
            "k_max": table.k_max,
            "digits": table.digits,
            "method": table.method,
            "err_est": mp.nstr(table.err_est, 10),
            "mu": [mp.nstr(m, table.digits + 15) for m in table.mu],
        }
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_moments(p: WeightParams, k_max: int, digits: int, method: str,
                 cache_dir: str) -> MomentTable | None:
    """Load a cached moment table; None on miss or schema mismatch."""
    path = _cache_path(p, k_max, digits, method, cache_dir)
    if not os.path.exists(path):
        return None
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None
    if payload.get("version") != "moments-v1":
        return None
    if payload.get("k_max") != k_max or payload.get("digits") != digits:
        return None
    with mp.workdps(digits + 10):
        mu = tuple(mp.mpf(s) for s in payload["mu"])
        err = mp.mpf(payload["err_est"])
    return MomentTable(params=p, k_max=k_max, mu=mu, method=payload["method"],
                       digits=digits, err_est=err)
