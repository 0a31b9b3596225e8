"""Exact extension-regime arithmetic for an order-m operator and u in L^p.

Everything is rational: 1 - 1/p is a Fraction and p = inf is carried as a
distinct value, so the strict / non-strict splits at the critical exponent
are decided exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .field import Exponent

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"


class Regime(str, Enum):
    SUBCRITICAL = SUBCRITICAL
    CRITICAL = CRITICAL
    SUPERCRITICAL = SUPERCRITICAL


@dataclass(frozen=True)
class RegimeQuery:
    m: int
    n: int
    p: Exponent
    q: Exponent | None = None
    d: int | None = None

    def __post_init__(self):
        if self.m < 0 or self.n < 1:
            raise ValueError("need m >= 0 and n >= 1")
        if self.d is not None and self.d < 0:
            raise ValueError("need d >= 0")


def _check(m, n, p) -> Exponent:
    RegimeQuery(m, n, Exponent.parse(p))
    return Exponent.parse(p)


def critical_order(n: int, p) -> Fraction:
    """n(1 - 1/p); equals n at p = inf."""
    return n * Exponent.parse(p).dual_part


def classify(m: int, n: int, p) -> Regime:
    p = _check(m, n, p)
    c = critical_order(n, p)
    if m < c:
        return Regime.SUBCRITICAL
    if m == c:
        return Regime.CRITICAL
    return Regime.SUPERCRITICAL


def bochner_guarantee(m: int, n: int, p) -> bool:
    """Extension holds for every u in L^p solving Pu = 0 off the point."""
    p = _check(m, n, p)
    c = critical_order(n, p)
    return m < c or (not p.is_inf and m == c)


def sobolev_sufficient(m: int, n: int, p, q, d: int) -> bool:
    """Order-m bound from p together with an order-d constant-coefficient Q bound from q."""
    p = _check(m, n, p)
    q = Exponent.parse(q)
    RegimeQuery(m, n, p, q, d)
    top = critical_order(n, p) + 1
    first = m < top or (not p.is_inf and m == top)
    low = m - critical_order(n, q)
    second = d > low or (not q.is_inf and d == low)
    return first and second


def max_delta_order(m: int, n: int, p) -> int | None:
    """Largest admissible obstruction order kappa, or None if no kappa >= 0 fits."""
    p = _check(m, n, p)
    room = m - critical_order(n, p)
    if p.is_inf:
        return math.floor(room) if room >= 0 else None
    return math.ceil(room) - 1 if room > 0 else None


def regime_report(m: int, n: int, p, q=None, d: int | None = None) -> dict:
    out = {
        "class": classify(m, n, p).value,
        "guarantee": bochner_guarantee(m, n, p),
        "max_delta_order": max_delta_order(m, n, p),
    }
    if q is not None and d is not None:
        out["sobolev_sufficient"] = sobolev_sufficient(m, n, p, q, d)
    return out


def codim_variant(m: int, n: int, k: int, p, q=None, d: int | None = None) -> dict:
    """The same report with the codimension k of a singular subspace in place of n."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    return regime_report(m, k, p, q, d)
