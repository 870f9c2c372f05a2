"""Precision bookkeeping.

All numerical operations in this package take an explicit PrecisionContext
instead of reading mpmath's global state.  Internally each operation scopes
its work with `mpmath.workdps`, so the global context is always restored and
two contexts never interfere even when calls are nested.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision plus the step sizes derived from it.

    digits   -- decimal digits carried by mpmath inside the operation
    eps      -- 10**(-digits), the unit of absolute smallness
    fd_step  -- 10**(-floor(digits/3)), default step for central differences
    """

    digits: int

    @property
    def eps(self) -> mp.mpf:
        with mp.workdps(self.digits + 10):
            return mp.mpf(10) ** (-self.digits)

    @property
    def fd_step(self) -> mp.mpf:
        with mp.workdps(self.digits + 10):
            return mp.mpf(10) ** (-(self.digits // 3))


def make_context(digits: int) -> PrecisionContext:
    """Build a PrecisionContext.  Requires digits >= 30.

    Everything downstream assumes enough headroom over double precision to
    split digit budgets between guard digits and deliverable accuracy; below
    30 digits those splits stop making sense.
    """
    if not isinstance(digits, int) or isinstance(digits, bool):
        raise ValueError(f"digits must be an int, got {type(digits).__name__}")
    if digits < 30:
        raise ValueError(f"digits must be >= 30, got {digits}")
    return PrecisionContext(digits=digits)


def mpf_str(x, sig_digits: int) -> str:
    """Decimal-string form of an mp number with a fixed significant-digit count.

    Used by every CSV/JSON writer so that output bytes depend only on the
    values, never on the ambient mpmath precision.
    """
    with mp.workdps(max(sig_digits + 5, 20)):
        return mp.nstr(mp.mpf(x), sig_digits, strip_zeros=False)
