"""Bump mollifier, its exact derivatives, and the plateau cutoff.

The 1D profile is psi(t) = exp(-1/(1-t^2)) on (-1, 1).  Its k-th derivative
has the form p_k(t) / (1-t^2)^(2k) * psi(t) with polynomials p_k generated
by a recurrence, so every partial derivative of the tensor-product bump
factors into 1D evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate

K_MAX = 10

_ONE_MINUS_T2_SQ = np.array([1.0, 0.0, -2.0, 0.0, 1.0])  # (1 - t^2)^2


class DerivativeOrderError(ValueError):
    pass


@lru_cache(maxsize=None)
def _bump_polys() -> tuple[np.ndarray, ...]:
    polys = [np.array([1.0])]
    for k in range(K_MAX):
        p = polys[-1]
        # p_{k+1} = p_k' (1-t^2)^2 + (4k t (1-t^2) - 2t) p_k
        term1 = npoly.polymul(npoly.polyder(p), _ONE_MINUS_T2_SQ) if len(p) > 1 else np.zeros(1)
        factor = np.array([0.0, 4.0 * k - 2.0, 0.0, -4.0 * k])
        term2 = npoly.polymul(factor, p)
        polys.append(npoly.polyadd(term1, term2))
    return tuple(polys)


def bump_poly(k: int) -> np.ndarray:
    """Coefficients (lowest degree first) of p_k."""
    if k < 0 or k > K_MAX:
        raise DerivativeOrderError(f"derivative order {k} outside [0, {K_MAX}]")
    return _bump_polys()[k]


def bump_deriv(k: int, t):
    """k-th derivative of psi at t (scalar or array); zero for |t| >= 1."""
    p = bump_poly(k)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    s = 1.0 - ti * ti
    # exp underflows to 0 well before s**(2k) overflows the quotient
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        val = npoly.polyval(ti, p) * np.exp(-1.0 / s) / s ** (2 * k)
    out[inside] = np.where(np.isfinite(val), val, 0.0)
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def bump_mass() -> float:
    """Z1 = integral of psi over (-1, 1)."""
    val, _ = integrate.quad(lambda t: bump_deriv(0, t), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


# Gauss-Legendre nodes for the running integral of psi.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(80)


def bump_step(t):
    """Normalized antiderivative of psi: 0 for t <= -1, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    half = 0.5 * (t + 1.0)
    # map GL nodes from [-1, 1] to [-1, t]
    nodes = -1.0 + half[..., None] * (_GL_X + 1.0)
    vals = bump_deriv(0, nodes) @ _GL_W
    out = np.clip(half * vals / bump_mass(), 0.0, 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Mollifier:
    """phi(x) = prod_i psi(x_i / width) / (width * Z1)^n.

    ``width`` = 1 is the standard family; width = 1/2 realizes 2^n phi(2 x).
    """

    dim: int
    width: float = 1.0

    @property
    def norm_const(self) -> float:
        return bump_mass() ** self.dim

    def axis_deriv(self, k: int, eps: float, t):
        """k-th derivative of the per-axis factor of phi_eps at t."""
        s = eps * self.width
        return bump_deriv(k, np.asarray(t, dtype=float) / s) / (s ** (k + 1) * bump_mass())

    def deriv(self, alpha, eps: float, x):
        return mollifier_deriv(self, alpha, eps, x)


def mollifier_deriv(phi: Mollifier, alpha, eps: float, x):
    """Exact partial derivative d^alpha phi_eps at points x (shape (..., n))."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != phi.dim or len(alpha) != phi.dim:
        raise ValueError("dimension mismatch")
    out = np.ones(x.shape[:-1])
    for i, k in enumerate(alpha):
        out = out * phi.axis_deriv(k, eps, x[..., i])
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Cutoff:
    """Tensor-product plateau cutoff: 1 on |x|_inf <= r1, 0 on |x|_inf >= r2."""

    r1: float = 0.25
    r2: float = 0.5

    def __post_init__(self):
        if not 0 < self.r1 < self.r2:
            raise ValueError("need 0 < r1 < r2")

    def axis(self, k: int, t):
        """k-th derivative of the 1D profile g with g = 1 on |t| <= r1."""
        if k < 0 or k > K_MAX:
            raise DerivativeOrderError(f"derivative order {k} outside [0, {K_MAX}]")
        t = np.asarray(t, dtype=float)
        scale = 2.0 / (self.r2 - self.r1)
        tau = scale * (np.abs(t) - self.r1) - 1.0
        if k == 0:
            out = np.clip(1.0 - bump_step(tau), 0.0, 1.0)
        else:
            # d/dt of tau is scale*sign(t); chain rule k times
            sgn = np.sign(t) ** k
            out = -sgn * scale**k * bump_deriv(k - 1, tau) / bump_mass()
        out = np.asarray(out, dtype=float)
        return out if out.ndim else float(out)

    def eval(self, alpha, x):
        return cutoff_eval(self, alpha, x)


def cutoff_eval(a: Cutoff, alpha, x):
    """Exact d^alpha a at points x (shape (..., n))."""
    x = np.asarray(x, dtype=float)
    if sum(alpha) > K_MAX:
        raise DerivativeOrderError(f"|alpha| = {sum(alpha)} exceeds {K_MAX}")
    out = np.ones(x.shape[:-1])
    for i, k in enumerate(alpha):
        out = out * a.axis(k, x[..., i])
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class EpsilonSchedule:
    eps0: float = 0.2
    ratio: float = 2.0**-0.5
    count: int = 10

    def __post_init__(self):
        if self.eps0 <= 0 or not 0 < self.ratio < 1 or self.count < 1:
            raise ValueError("invalid epsilon schedule")

    def values(self) -> np.ndarray:
        return self.eps0 * self.ratio ** np.arange(self.count)

    def densified(self) -> "EpsilonSchedule":
        """Same eps range, half the log-step."""
        return EpsilonSchedule(self.eps0, float(np.sqrt(self.ratio)), 2 * self.count - 1)

    def check(self, box_halfwidth: float, cutoff: Cutoff, width: float = 1.0, h: float | None = None, eta: float = 4.0):
        if self.eps0 * width + cutoff.r2 > box_halfwidth:
            raise ValueError("supp(a) + eps*supp(phi) leaves the box")
        if h is not None and self.values()[-1] < eta * h:
            raise ValueError(f"smallest eps below {eta} grid spacings of the sampled field")
