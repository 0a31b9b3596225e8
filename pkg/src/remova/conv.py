"""Evaluate Q(aPu * phi_eps) by integrating u alone against the adjoint kernel,
and read off the point obstruction S from moment pairings.

For a fixed evaluation point x

    (aPu * phi_eps)(x) = int u(x - y) K_x(y) dy,
    K_x(y) = sum_alpha d_y^alpha [ (a a_alpha)(x - y) phi_eps(y) ],

so every derivative lands on smooth factors.  With constant coefficients and
tensor-product a and phi, each Leibniz term of K_x factors over the axes and a
whole tensor lattice of x values is one multilinear contraction of the sampled
u (see ``field.tensor_contract``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diffop import (
    DeltaStructure,
    DiffOperator,
    Coefficient,
    identity,
    mi_below,
    mi_binom,
    mi_factorial,
    multi_indices,
    order,
)
from .field import Box, Exponent, Field, NonIntegrable, lr_norm, make_grid, panel_rule, tensor_contract
from .mollify import K_MAX, Cutoff, DerivativeOrderError, Mollifier, cutoff_eval, mollifier_deriv
from .diffop import SmoothnessError
from .regimes import max_delta_order


@dataclass(frozen=True)
class Quadrature:
    """Resolution knobs for the lattice evaluation and the moment pairings."""

    nodes_per_eps: int = 16       # core quadrature: h = eps * width / nodes_per_eps
    core_points: int = 33         # evaluation lattice points per axis in the core
    core_margin: float = 0.5      # core covers |x|_inf <= eps * width * (1 + margin)
    outer_points: int = 17        # coarse sweep of the rest of supp(a)
    outer_nodes_per_eps: int = 8
    moment_cells: tuple = (512, 256, 64)   # per dimension 1, 2, 3 (coarse level)


@dataclass(eq=False)
class Problem:
    u: Field
    P: DiffOperator
    a: Cutoff = field(default_factory=Cutoff)
    phi: Mollifier = None
    Q: DiffOperator = None
    quad: Quadrature = field(default_factory=Quadrature)
    name: str = ""

    def __post_init__(self):
        n = self.u.dim
        if self.phi is None:
            self.phi = Mollifier(n)
        if self.Q is None:
            self.Q = identity(n)
        if not (self.P.dim == self.Q.dim == self.phi.dim == n):
            raise ValueError("dimensions of u, P, Q and phi must agree")
        if not self.Q.constant:
            raise ValueError("Q must have constant coefficients")
        box = self.u.box
        if any(lo > -self.a.r2 or hi < self.a.r2 for lo, hi in zip(box.lo, box.hi)):
            raise ValueError("supp(a) must lie inside the box of u")
        self._cache: dict = {}

    @property
    def dim(self) -> int:
        return self.u.dim

    @property
    def m(self) -> int:
        return order(self.P)

    @property
    def d(self) -> int:
        return order(self.Q)

    @property
    def singular(self):
        return self.u.singular

    def with_(self, **changes) -> "Problem":
        kw = dict(u=self.u, P=self.P, a=self.a, phi=self.phi, Q=self.Q, quad=self.quad, name=self.name)
        kw.update(changes)
        return Problem(**kw)


# ---------------------------------------------------------------- adjoint kernel

def _kernel_terms(prob: Problem):
    """Leibniz expansion of K for constant-coefficient P.

    Returns a dict (gamma, k) -> coefficient where the term is
    coef * (d^gamma a)(x - y) * (d^k phi_eps)(y).
    """
    terms: dict = {}
    for alpha, a_alpha in prob.P.terms.items():
        for gamma in mi_below(alpha):
            c = a_alpha * mi_binom(alpha, gamma) * (-1) ** sum(gamma)
            rest = tuple(a - g for a, g in zip(alpha, gamma))
            for eta, q in prob.Q.terms.items():
                k = tuple(r + e for r, e in zip(rest, eta))
                key = (tuple(gamma), k)
                terms[key] = terms.get(key, 0) + c * q
    return {k: v for k, v in terms.items() if v != 0}


def _check_orders(prob: Problem):
    top = prob.m + prob.d
    if top > K_MAX:
        raise DerivativeOrderError(f"m + d = {top} exceeds available derivative order {K_MAX}")
    for alpha, c in prob.P.terms.items():
        if isinstance(c, Coefficient) and c.smoothness < sum(alpha):
            raise SmoothnessError(f"coefficient of d^{alpha} needs {sum(alpha)} derivatives, has {c.smoothness}")


def adjoint_kernel(prob: Problem, eps: float, x):
    """Return y -> K_x(y) with Q phi in place of phi."""
    _check_orders(prob)
    x = np.asarray(x, dtype=float)
    n = prob.dim

    def kernel(y):
        y = np.asarray(y, dtype=float)
        z = x - y
        out = np.zeros(y.shape[:-1], dtype=complex)
        for alpha, a_alpha in prob.P.terms.items():
            for gamma in mi_below(alpha):
                c = mi_binom(alpha, gamma) * (-1) ** sum(gamma)
                # d^gamma (a a_alpha) at z
                if isinstance(a_alpha, Coefficient):
                    f = np.zeros(z.shape[:-1], dtype=complex)
                    for delta in mi_below(gamma):
                        rest = tuple(g - dl for g, dl in zip(gamma, delta))
                        f = f + mi_binom(gamma, delta) * cutoff_eval(prob.a, delta, z) * a_alpha.deriv(rest, z)
                else:
                    f = a_alpha * cutoff_eval(prob.a, gamma, z)
                rest = tuple(al - g for al, g in zip(alpha, gamma))
                for eta, q in prob.Q.terms.items():
                    k = tuple(r + e for r, e in zip(rest, eta))
                    out = out + c * q * f * mollifier_deriv(prob.phi, k, eps, y)
        return out

    kernel.support = Box((-eps * prob.phi.width,) * n, (eps * prob.phi.width,) * n)
    return kernel


def _expanded_terms(prob: Problem):
    """Kernel terms as (multiplier, coef, gamma, k).

    Each term contributes coef * mult(w) * prod_i [a^(gamma_i)(w_i) phi_eps^(k_i)(x_i - w_i)]
    to the integrand against u(w), w = x - y.  A variable coefficient c is
    split by Leibniz, d^g(a c) = sum_delta C(g, delta) d^delta a d^(g - delta) c,
    so the steep cutoff derivatives stay in the separable kernel and only the
    smooth d^(g - delta) c multiplies u (mult is None for constant terms).
    """
    if prob.P.constant:
        return [(None, c, g, k) for (g, k), c in _kernel_terms(prob).items()]
    out = []
    mults: dict = {}   # one callable per (coefficient, derivative) so terms group in the contraction
    for alpha, a_alpha in prob.P.terms.items():
        for gamma in mi_below(alpha):
            rest = tuple(al - g for al, g in zip(alpha, gamma))
            sign = mi_binom(alpha, gamma) * (-1) ** sum(gamma)
            for delta in mi_below(gamma):
                if isinstance(a_alpha, Coefficient):
                    beta = tuple(g - dl for g, dl in zip(gamma, delta))
                    if (alpha, beta) not in mults:
                        mults[alpha, beta] = (lambda c, b: (lambda w: c.deriv(b, w)))(a_alpha, beta)
                    mult = mults[alpha, beta]
                    c0 = 1.0
                elif delta != gamma:
                    continue
                else:
                    mult, c0 = None, a_alpha
                for eta, q in prob.Q.terms.items():
                    k = tuple(r + e for r, e in zip(rest, eta))
                    out.append((mult, sign * mi_binom(gamma, delta) * c0 * q, delta, k))
    return out


class _Weighted(Field):
    def __init__(self, u: Field, mult):
        self.u, self.mult, self.dim, self.singular = u, mult, u.dim, u.singular

    def __call__(self, x):
        return self.u(x) * self.mult(x)


def _contract_terms(u: Field, w_axes, terms, with_abs: bool = False):
    """Group terms by multiplier and contract each group once.

    Returns (values, max |u m|) or, with ``with_abs``, (values, magnitude).
    """
    groups: dict = {}
    for mult, coef, mats in terms:
        groups.setdefault(id(mult), (mult, []))[1].append((coef, mats))
    total = mag = None
    umax = 0.0
    for mult, group in groups.values():
        field_ = u if mult is None else _Weighted(u, mult)
        if with_abs:
            vals, m, top = tensor_contract(field_, w_axes, group, with_abs=True)
            mag = m if mag is None else mag + m
        else:
            vals, top = tensor_contract(field_, w_axes, group, with_max=True)
        total = vals if total is None else total + vals
        umax = max(umax, top)
    return (total, mag) if with_abs else (total, umax)


def conv_lattice(prob: Problem, eps: float, axes_x: Sequence[np.ndarray], nodes_per_eps: int | None = None):
    """(Q(aPu * phi_eps))(x) on the tensor lattice axes_x[0] x ... x axes_x[n-1].

    u is sampled on an origin-centered cell lattice in w = x - y (the singular
    set is never a node) and integrated against the kernel factors by the
    product rule of ``field.panel_rule``.  Returns (values, scale); ``scale``
    bounds |value| by max|u| * sum |coef| prod_i ||W_i||_1 and serves as the
    noise reference.
    """
    _check_orders(prob)
    nq = nodes_per_eps or prob.quad.nodes_per_eps
    s = eps * prob.phi.width
    h = s / nq
    axes_x = [np.asarray(xs, dtype=float) for xs in axes_x]
    cache: dict = {}
    w_axes: list = [None] * prob.dim

    def mat(i, g, k):
        key = (i, g, k)
        if key not in cache:
            xs = axes_x[i]

            def kern(z):
                K = prob.phi.axis_deriv(k, eps, xs[:, None] - z[None, :])
                return K if g is None else prob.a.axis(g, z)[None, :] * K

            nodes, W = panel_rule([(x - s, x + s) for x in xs], h, kern)
            w_axes[i] = nodes
            cache[key] = W
        return cache[key]

    terms = []
    bound = 0.0
    for mult, coef, gamma, k in _expanded_terms(prob):
        mats = [mat(i, gamma[i], k[i]) for i in range(prob.dim)]
        if any(not np.any(M) for M in mats):
            continue
        terms.append((mult, coef, mats))
        bound += abs(coef) * math.prod(float(np.max(np.sum(np.abs(M), axis=1))) for M in mats)
    shape = tuple(len(xs) for xs in axes_x)
    if not terms:
        return np.zeros(shape, dtype=complex), 0.0
    vals, umax = _contract_terms(prob.u, w_axes, terms)
    return vals, umax * bound


def conv_eval(prob: Problem, eps: float, x) -> complex:
    """Q(aPu * phi_eps) at a single point x."""
    x = np.asarray(x, dtype=float)
    vals, _ = conv_lattice(prob, eps, [np.array([xi]) for xi in x])
    return complex(vals.ravel()[0])


# ---------------------------------------------------------------- L^r criterion norm

def _cc_axis(half: float, count: int) -> np.ndarray:
    h = 2 * half / count
    return -half + (np.arange(count) + 0.5) * h


@dataclass
class ScaleData:
    """Lattice values of Q(aPu * phi_eps) at one scale, split into core and outer regions."""

    eps: float
    core: np.ndarray
    core_volume: float
    outer: np.ndarray          # outer values with core cells removed (flat)
    outer_volume: float
    scale: float               # bound on |value| anywhere on the lattice
    measure: float = 1.0       # volume of the evaluated region

    def noise_reference(self, r) -> float:
        """L^r norm of a function of size ``scale`` over the whole region."""
        r = Exponent.parse(r)
        return self.scale if r.is_inf else self.scale * self.measure ** float(1 / r.frac)

    def norm(self, r) -> float:
        r = Exponent.parse(r)
        c = np.abs(self.core).ravel()
        o = np.abs(self.outer).ravel()
        if r.is_inf:
            return float(max(c.max(initial=0.0), o.max(initial=0.0)))
        rv = float(r.frac)
        top = max(c.max(initial=0.0), o.max(initial=0.0))
        if top == 0.0:
            return 0.0
        total = np.sum((c / top) ** rv) * self.core_volume + np.sum((o / top) ** rv) * self.outer_volume
        return float(top * total ** (1.0 / rv))


def evaluate_scale(prob: Problem, eps: float, slice_codim: int | None = None) -> ScaleData:
    """Core + outer lattice values at one eps.  ``slice_codim`` = k evaluates on x' = 0."""
    key = ("scale", float(eps), slice_codim)
    if key in prob._cache:
        return prob._cache[key]
    q = prob.quad
    n = prob.dim
    k = n if slice_codim is None else slice_codim
    fixed = n - k
    s = eps * prob.phi.width
    L = s * (1 + q.core_margin)
    core_axis = _cc_axis(L, q.core_points)
    axes = [np.zeros(1)] * fixed + [core_axis] * k
    core, scale_c = conv_lattice(prob, eps, axes)
    core_vol = (2 * L / q.core_points) ** k

    R = prob.a.r2 + s
    outer_axis = _cc_axis(R, q.outer_points)
    oaxes = [np.zeros(1)] * fixed + [outer_axis] * k
    outer, scale_o = conv_lattice(prob, eps, oaxes, nodes_per_eps=q.outer_nodes_per_eps)
    mesh = np.meshgrid(*([outer_axis] * k), indexing="ij")
    inf_norm = np.max(np.abs(np.stack(mesh)), axis=0)
    keep = (inf_norm > L).ravel()
    outer_flat = outer.reshape(-1)[keep]
    out_vol = (2 * R / q.outer_points) ** k
    data = ScaleData(float(eps), core.reshape([q.core_points] * k), core_vol, outer_flat, out_vol, max(scale_c, scale_o), (2 * R) ** k)
    prob._cache[key] = data
    return data


def criterion_norm(prob: Problem, eps: float, r) -> float:
    """N(eps) = ||Q(aPu * phi_eps)||_{L^r} over the eps-adaptive lattice."""
    return evaluate_scale(prob, eps).norm(r)


def exact_delta_norm(S: DeltaStructure, prob: Problem, eps: float, r, slice_codim: int | None = None) -> float:
    """||Q S phi_eps||_{L^r} on the same lattice, from closed-form mollifier derivatives."""
    q = prob.quad
    n = prob.dim
    k = n if slice_codim is None else slice_codim
    s = eps * prob.phi.width
    L = s * (1 + q.core_margin)
    axis = _cc_axis(L, q.core_points)
    mesh = np.meshgrid(*([axis] * k), indexing="ij")
    pts = np.stack(mesh, axis=-1)
    sub = Mollifier(k, prob.phi.width)
    vals = np.zeros(pts.shape[:-1], dtype=complex)
    Qs = prob.Q.terms if slice_codim is None else {a[n - k:]: c for a, c in prob.Q.terms.items() if not any(a[: n - k])}
    for beta, c in S.coefficients.items():
        for eta, qc in Qs.items():
            kk = tuple(b + e for b, e in zip(beta, eta))
            vals = vals + c * qc * mollifier_deriv(sub, kk, eps, pts)
    return lr_norm(vals, (2 * L / q.core_points) ** k, r)


# ---------------------------------------------------------------- moments

@dataclass(frozen=True)
class MomentResult:
    value: complex
    error: float
    scale: float     # |u| |test| magnitude, for significance


def _poly_cutoff_axis(a: Cutoff, b: int, k: int, t):
    """k-th derivative of g(t) t^b."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for j in range(min(k, b) + 1):
        dpow = math.perm(b, j) * t ** (b - j)
        out = out + math.comb(k, j) * a.axis(k - j, t) * dpow
    return out


def _moment_level(prob: Problem, beta, cells: int) -> tuple[complex, float]:
    n = prob.dim
    R = prob.a.r2
    h = 2 * R / cells
    cache: dict = {}
    w_axes: list = [None] * n

    def vec(i, b, k):
        if (i, b, k) not in cache:
            nodes, W = panel_rule([(-R, R)], h, lambda z: _poly_cutoff_axis(prob.a, b, k, z)[None, :])
            w_axes[i] = nodes
            cache[(i, b, k)] = W
        return cache[(i, b, k)]

    # sum_alpha (-1)^|alpha| d^alpha (a_alpha T), Leibniz on variable a_alpha
    terms = []
    for alpha, a_alpha in prob.P.terms.items():
        sign = (-1) ** sum(alpha)
        if isinstance(a_alpha, Coefficient):
            for gamma in mi_below(alpha):
                rest = tuple(al - g for al, g in zip(alpha, gamma))
                mult = (lambda c, r: (lambda w: c.deriv(r, w)))(a_alpha, rest)
                mats = [vec(i, beta[i], gamma[i]) for i in range(n)]
                terms.append((mult, sign * mi_binom(alpha, gamma), mats))
        else:
            mats = [vec(i, beta[i], alpha[i]) for i in range(n)]
            terms.append((None, sign * a_alpha, mats))
    val, mag = _contract_terms(prob.u, w_axes, terms, with_abs=True)
    return complex(val.ravel()[0]), float(abs(mag.ravel()[0]))


def moment(prob: Problem, beta) -> MomentResult:
    """<aPu, x^beta> = sum_alpha (-1)^|alpha| <u, d^alpha(a_alpha a x^beta)>.

    The test function a x^beta equals x^beta chi for any plateau chi = 1 on supp a.
    """
    beta = tuple(int(b) for b in beta)
    if len(beta) != prob.dim:
        raise ValueError("beta has wrong length")
    if sum(beta) + prob.m > K_MAX:
        raise DerivativeOrderError("|beta| + m exceeds available derivative order")
    key = ("moment", beta)
    if key in prob._cache:
        return prob._cache[key]
    cells = prob.quad.moment_cells[prob.dim - 1]
    v0, _ = _moment_level(prob, beta, cells)
    v1, mag = _moment_level(prob, beta, 2 * cells)
    res = MomentResult(v1, abs(v1 - v0), mag)
    prob._cache[key] = res
    return res


def sliced_moment(prob: Problem, beta2, codim: int) -> MomentResult:
    """Moment over the transverse variables x'' (last ``codim`` axes), per unit length of x'."""
    n = prob.dim
    fixed = n - codim
    beta = (0,) * fixed + tuple(beta2)
    res = moment(prob, beta)
    # normalize by the x'-profile mass of the test function
    R = prob.a.r2
    grid = make_grid(Box((-R,), (R,)), (4096,))
    mass = float(np.sum(prob.a.axis(0, grid.axis_nodes(0))) * grid.spacing[0]) ** fixed
    return MomentResult(res.value / mass, res.error / mass, res.scale / mass)


def default_kappa_max(m: int, n: int, p=None) -> int:
    """Highest moment order worth probing: the admissible obstruction order for u in L^p, else m."""
    if p is None:
        return m
    kappa = max_delta_order(m, n, p)
    return 0 if kappa is None else kappa


def recover_delta(prob: Problem, kappa_max: int, tau_sig: float = 1e-3, tau_noise: float = 1e-8, codim: int | None = None) -> DeltaStructure:
    """c_beta = (-1)^|beta| m_beta / beta!, with noise and significance thresholds."""
    if kappa_max < 0:
        raise ValueError("kappa_max must be >= 0")
    k = prob.dim if codim is None else codim
    coeffs = {}
    for beta in multi_indices(k, kappa_max):
        if codim is None or codim == prob.dim:
            res = moment(prob, beta)
        else:
            res = sliced_moment(prob, beta, codim)
        if abs(res.value) <= tau_noise * res.scale or abs(res.value) <= res.error:
            continue
        coeffs[beta] = (-1) ** sum(beta) * res.value / mi_factorial(beta)
    if not coeffs:
        return DeltaStructure(k, {})
    top = max(abs(c) for c in coeffs.values())
    return DeltaStructure(k, {b: c for b, c in coeffs.items() if abs(c) > tau_sig * top})


__all__ = [
    "Problem",
    "Quadrature",
    "adjoint_kernel",
    "conv_eval",
    "conv_lattice",
    "criterion_norm",
    "evaluate_scale",
    "exact_delta_norm",
    "moment",
    "sliced_moment",
    "recover_delta",
    "default_kappa_max",
    "NonIntegrable",
]
