"""Analytic ground-truth problems with known obstructions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .diffop import (
    DeltaStructure,
    DiffOperator,
    bilaplacian,
    cauchy_riemann,
    laplacian,
    partial,
)
from .field import INF, AnalyticField, Box, Exponent, SingularSet


def _heaviside(x, *args):
    return np.where(np.asarray(x) >= 0, 1.0, 0.0)


def _dirac(x, *args):
    return np.zeros_like(np.asarray(x, dtype=float))


_MODULES = [{"Heaviside": _heaviside, "DiracDelta": _dirac}, "numpy"]


class ClosedForm:
    """Sympy expression in x1..xn with lambdified value and exact partials."""

    def __init__(self, expr_fn, dim: int):
        self.dim = dim
        self.syms = sp.symbols(" ".join(f"x{i + 1}" for i in range(dim)), real=True)
        if dim == 1:
            self.syms = (self.syms,)
        self.expr = sp.sympify(expr_fn(*self.syms))
        self._fns: dict = {}

    def _fn(self, alpha):
        alpha = tuple(alpha)
        if alpha not in self._fns:
            e = self.expr
            for s, k in zip(self.syms, alpha):
                if k:
                    e = sp.diff(e, s, k)
            e = e.replace(sp.DiracDelta, lambda *a: 0)
            self._fns[alpha] = sp.lambdify(self.syms, e, modules=_MODULES)
        return self._fns[alpha]

    def deriv(self, alpha, x):
        x = np.asarray(x, dtype=float)
        out = self._fn(alpha)(*[x[..., i] for i in range(self.dim)])
        return np.broadcast_to(np.asarray(out, dtype=complex), x.shape[:-1]).copy()

    def __call__(self, x):
        return self.deriv((0,) * self.dim, x)


@dataclass(frozen=True)
class PRange:
    """Exponents p with u in L^p near the singular set: [1, hi] or [1, hi)."""

    hi: Exponent
    closed: bool

    def contains(self, p) -> bool:
        p = Exponent.parse(p)
        if self.hi.is_inf:
            return self.closed or not p.is_inf
        if p.is_inf:
            return False
        return p.frac <= self.hi.frac if self.closed else p.frac < self.hi.frac

    def __str__(self):
        return f"[1, {self.hi}{']' if self.closed else ')'}"

    def samples(self) -> list[Exponent]:
        """Representative valid exponents (1, 2, inf intersected with the range, plus a point below hi)."""
        out = [Exponent.parse(v) for v in (1, 2, 3, "inf") if self.contains(v)]
        if not self.hi.is_inf and not self.closed:
            below = Exponent.parse(str(round(float(self.hi.frac) - 0.1, 6)))
            if below not in out and self.contains(below):
                out.append(below)
        return out


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    dim: int
    codim: int
    u: AnalyticField
    P: DiffOperator
    p_range: PRange
    expected: DeltaStructure | None       # None means removable
    provenance: str
    note: str = ""
    homogeneity: float | None = None       # degree of u at the singular set, 0 for bounded/log

    @property
    def removable(self) -> bool:
        return self.expected is None

    @property
    def m(self) -> int:
        return self.P.order

    @property
    def expected_kappa(self) -> int | None:
        return None if self.expected is None else self.expected.order


def _field(name, fn, dim, codim=None):
    cf = ClosedForm(fn, dim)
    return AnalyticField(cf, dim, SingularSet(dim, codim or dim), deriv=cf.deriv, box=Box.cube(dim))


def _delta(dim, coeffs):
    return DeltaStructure(dim, {tuple(k): complex(v) for k, v in coeffs.items()})


@lru_cache(maxsize=None)
def catalogue() -> tuple[Scenario, ...]:
    r = lambda *xs: sp.sqrt(sum(x**2 for x in xs))  # noqa: E731
    closed_inf = PRange(INF, True)
    return (
        Scenario(
            "heaviside-1d", 1, 1, _field("H", lambda x: sp.Heaviside(x), 1),
            partial(1, (1,)), closed_inf, _delta(1, {(0,): 1}),
            "CLASSICAL", "d/dx H = delta: L^inf extension fails at m = n = 1", 0.0,
        ),
        Scenario(
            "heaviside-2d", 2, 2, _field("H1H2", lambda x, y: sp.Heaviside(x) * sp.Heaviside(y), 2),
            partial(2, (1, 1)), closed_inf, _delta(2, {(0, 0): 1}),
            "CLASSICAL", "d1 d2 (H1 H2) = delta: L^inf extension fails at m = n = 2", 0.0,
        ),
        Scenario(
            "log-laplace-2d", 2, 2, _field("log|x|", lambda x, y: sp.log(r(x, y)), 2),
            laplacian(2), PRange(INF, False), _delta(2, {(0, 0): 2 * math.pi}),
            "CLASSICAL", "Laplace log|x| = 2 pi delta", 0.0,
        ),
        Scenario(
            "harmonic-poly", 2, 2, _field("x1", lambda x, y: x, 2),
            laplacian(2), closed_inf, None,
            "CLASSICAL", "bounded harmonic: c = 0 branch of h + c log|x|", 0.0,
        ),
        Scenario(
            "newton-3d", 3, 3, _field("-1/(4 pi |x|)", lambda x, y, z: -1 / (4 * sp.pi * r(x, y, z)), 3),
            laplacian(3), PRange(Exponent.parse(3), False), _delta(3, {(0, 0, 0): 1}),
            "DERIVED", "Newtonian potential", -1.0,
        ),
        Scenario(
            "dipole-3d", 3, 3, _field("x1/(4 pi |x|^3)", lambda x, y, z: x / (4 * sp.pi * r(x, y, z) ** 3), 3),
            laplacian(3), PRange(Exponent.parse("3/2"), False), _delta(3, {(1, 0, 0): 1}),
            "DERIVED", "d1 of the Newtonian potential: Laplace u = d1 delta", -2.0,
        ),
        Scenario(
            "cauchy-riemann", 2, 2, _field("1/z", lambda x, y: 1 / (x + sp.I * y), 2),
            cauchy_riemann(), PRange(Exponent.parse(2), False), _delta(2, {(0, 0): math.pi}),
            "DERIVED", "d/dz-bar (1/z) = pi delta (Cauchy-Pompeiu)", -1.0,
        ),
        Scenario(
            "riemann-removable", 2, 2, _field("z", lambda x, y: x + sp.I * y, 2),
            cauchy_riemann(), closed_inf, None,
            "CLASSICAL", "bounded analytic function: Riemann extension, subcritical", 0.0,
        ),
        Scenario(
            "line-log-3d", 3, 2, _field("log|x''|", lambda x, y, z: sp.log(r(y, z)), 3, codim=2),
            laplacian(3), PRange(INF, False), _delta(2, {(0, 0): 2 * math.pi}),
            "CLASSICAL", "log of the distance to a line: codim-2 slice carries 2 pi delta", 0.0,
        ),
        Scenario(
            "john-type", 2, 2,
            _field("|x|^2 log|x|", lambda x, y: (x**2 + y**2) * sp.log(r(x, y)), 2),
            bilaplacian(2), closed_inf, _delta(2, {(0, 0): 8 * math.pi}),
            "CLASSICAL", "|x|^(m-n) B log|x| with m = 4, n = 2: bounded, supercritical, bilaplacian = 8 pi delta", 0.0,
        ),
        Scenario(
            "line-removable-3d", 3, 2, _field("x1", lambda x, y, z: x, 3, codim=2),
            laplacian(3), closed_inf, None,
            "TRIVIAL", "bounded harmonic with a declared singular line", 0.0,
        ),
    )


def lookup(name: str) -> Scenario:
    for s in catalogue():
        if s.name == name:
            return s
    raise KeyError(f"unknown scenario {name!r}")


def names() -> list[str]:
    return [s.name for s in catalogue()]


# ---------------------------------------------------------------- L^p membership

def _sphere_rule(k: int, res: int = 64):
    """Directions and weights on S^{k-1} (weights sum to the sphere area)."""
    if k == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if k == 2:
        th = 2 * np.pi * (np.arange(4 * res) + 0.5) / (4 * res)
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(4 * res, 2 * np.pi / (4 * res))
    ct, wt = np.polynomial.legendre.leggauss(res)
    ph = 2 * np.pi * (np.arange(2 * res) + 0.5) / (2 * res)
    C, PH = np.meshgrid(ct, ph, indexing="ij")
    st = np.sqrt(1 - C**2)
    dirs = np.stack([st * np.cos(PH), st * np.sin(PH), C], axis=-1).reshape(-1, 3)
    w = (wt[:, None] * np.full(2 * res, 2 * np.pi / (2 * res))[None, :]).ravel()
    return dirs, w


@dataclass(frozen=True)
class Membership:
    p: Exponent
    finite: bool
    shell_values: tuple    # per-shell integral of |u|^p (or sup |u| for p = inf)
    ratios: tuple


def shell_integrals(s: Scenario, p, shells: int = 12, r0: float = 0.5) -> list[float]:
    """int |u|^p over transverse shells 2^-(j+1) r0 < |x''| < 2^-j r0 (x' = 0)."""
    p = Exponent.parse(p)
    k = s.codim
    dirs, dw = _sphere_rule(k)
    gx, gw = np.polynomial.legendre.leggauss(32)
    out = []
    for j in range(shells):
        hi = r0 * 2.0**-j
        lo = hi / 2
        # log-spaced radial nodes
        t = 0.5 * (gx + 1) * np.log(hi / lo) + np.log(lo)
        rr = np.exp(t)
        rw = 0.5 * gw * np.log(hi / lo) * rr
        pts = rr[:, None, None] * dirs[None, :, :]
        full = np.zeros(pts.shape[:-1] + (s.dim,))
        full[..., s.dim - k:] = pts
        mag = np.abs(s.u(full))
        if p.is_inf:
            out.append(float(mag.max()))
        else:
            integrand = mag ** float(p.frac) * rr[:, None] ** (k - 1)
            out.append(float(np.einsum("ij,i,j->", integrand, rw, dw)))
    return out


def membership_check(s: Scenario, p, shells: int = 12, theta: float = 0.98) -> Membership:
    """Finite iff the shell contributions decay geometrically (p < inf) or sup increments do (p = inf)."""
    p = Exponent.parse(p)
    vals = shell_integrals(s, p, shells)
    if p.is_inf:
        inc = [abs(b - a) for a, b in zip(vals, vals[1:])]
        tail = inc[-4:]
        if max(tail) <= 1e-12 * max(max(vals), 1.0):
            return Membership(p, True, tuple(vals), ())
        ratios = tuple(b / a if a > 0 else math.inf for a, b in zip(tail, tail[1:]))
    else:
        tail = vals[-4:]
        if max(tail) == 0.0:
            return Membership(p, True, tuple(vals), ())
        ratios = tuple(b / a if a > 0 else math.inf for a, b in zip(tail, tail[1:]))
    return Membership(p, all(q < theta for q in ratios), tuple(vals), ratios)
