"""Multi-index differential operators sum_alpha a_alpha(x) d^alpha."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

MultiIndex = tuple  # tuple[int, ...]


class ZeroOperator(ValueError):
    pass


class SmoothnessError(ValueError):
    pass


def mi_order(alpha: MultiIndex) -> int:
    return int(sum(alpha))


def mi_factorial(alpha: MultiIndex) -> int:
    return math.prod(math.factorial(a) for a in alpha)


def mi_binom(alpha: MultiIndex, gamma: MultiIndex) -> int:
    return math.prod(math.comb(a, g) for a, g in zip(alpha, gamma))


def mi_below(alpha: MultiIndex):
    """All gamma <= alpha componentwise."""
    return itertools.product(*(range(a + 1) for a in alpha))


def multi_indices(dim: int, max_order: int):
    """Multi-indices of order <= max_order, graded then lexicographic (descending)."""
    out = []
    for k in range(max_order + 1):
        for alpha in itertools.product(range(k + 1), repeat=dim):
            if sum(alpha) == k:
                out.append(alpha)
    return sorted(out, key=lambda a: (sum(a), tuple(-v for v in a)))


def mi_label(alpha: MultiIndex) -> str:
    return "(" + ",".join(str(a) for a in alpha) + ")"


def parse_mi_label(label: str) -> MultiIndex:
    return tuple(int(v) for v in label.strip("() ").split(",") if v.strip())


@dataclass(frozen=True, eq=False)
class Coefficient:
    """Variable coefficient with exact partials ``deriv(beta, x)`` up to ``smoothness``."""

    deriv_fn: Callable
    smoothness: int

    def deriv(self, beta: MultiIndex, x):
        if sum(beta) > self.smoothness:
            raise SmoothnessError(f"coefficient only has {self.smoothness} derivatives, asked for {beta}")
        return np.asarray(self.deriv_fn(beta, np.asarray(x, dtype=float)), dtype=complex)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.deriv((0,) * x.shape[-1], x)


def _is_const(c) -> bool:
    return not isinstance(c, Coefficient)


@dataclass(frozen=True, eq=False)
class DiffOperator:
    dim: int
    terms: Mapping  # MultiIndex -> complex | Coefficient

    def __post_init__(self):
        clean = {}
        for alpha, c in self.terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.dim or any(a < 0 for a in alpha):
                raise ValueError(f"bad multi-index {alpha} for dimension {self.dim}")
            if _is_const(c):
                c = complex(c)
                if c == 0:
                    continue
                c = clean.get(alpha, 0) + c if alpha in clean else c
            clean[alpha] = c
        object.__setattr__(self, "terms", dict(sorted(clean.items(), key=lambda kv: (sum(kv[0]), kv[0]))))

    @property
    def constant(self) -> bool:
        return all(_is_const(c) for c in self.terms.values())

    @property
    def order(self) -> int:
        return order(self)

    def __add__(self, other: "DiffOperator") -> "DiffOperator":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        terms = dict(self.terms)
        for alpha, c in other.terms.items():
            if alpha in terms:
                if not (_is_const(c) and _is_const(terms[alpha])):
                    raise ValueError("cannot merge variable coefficients")
                terms[alpha] = terms[alpha] + c
            else:
                terms[alpha] = c
        return DiffOperator(self.dim, terms)

    def __rmul__(self, scalar) -> "DiffOperator":
        if not self.constant:
            raise ValueError("scalar multiple of variable-coefficient operator not supported")
        return DiffOperator(self.dim, {a: scalar * c for a, c in self.terms.items()})

    def shifted(self, lam: complex) -> "DiffOperator":
        """P - lambda, for eigenfunction problems P u = lambda u."""
        return self + DiffOperator(self.dim, {(0,) * self.dim: -complex(lam)})

    def to_literal(self) -> str:
        if not self.constant:
            raise ValueError("only constant-coefficient operators have a literal form")
        parts = []
        for alpha, c in self.terms.items():
            coef = _fmt_complex(c)
            parts.append(f"{coef}*d[{','.join(map(str, alpha))}]")
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        try:
            return f"DiffOperator({self.to_literal()!r})"
        except ValueError:
            return f"DiffOperator(dim={self.dim}, variable, order={order(self)})"


def _fmt_complex(c: complex) -> str:
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return f"{c.imag!r}i"
    return f"({c.real!r}{'+' if c.imag >= 0 else '-'}{abs(c.imag)!r}i)"


def order(P: DiffOperator) -> int:
    if not P.terms:
        raise ZeroOperator("operator has no nonzero terms")
    return max(sum(a) for a in P.terms)


def principal_part(S: DiffOperator) -> DiffOperator:
    m = order(S)
    return DiffOperator(S.dim, {a: c for a, c in S.terms.items() if sum(a) == m})


def symbol_at(S_top: DiffOperator, xi) -> complex:
    """sum c_alpha xi^alpha (real-monomial convention, no i^k phase)."""
    if not S_top.constant:
        raise ValueError("symbol needs constant coefficients")
    degrees = {sum(a) for a in S_top.terms}
    if len(degrees) > 1:
        raise ValueError("symbol_at expects a homogeneous operator")
    xi = np.asarray(xi, dtype=float)
    return complex(sum(c * np.prod(xi ** np.array(a)) for a, c in S_top.terms.items()))


def symbol_nonvanishing(S_top: DiffOperator) -> bool:
    """True if the symbol is nonzero somewhere on {+-1}^n or a fixed sphere sample."""
    n = S_top.dim
    probes = [np.array(s, dtype=float) for s in itertools.product((-1.0, 1.0), repeat=n)]
    rng = np.random.default_rng(20240601)
    sphere = rng.normal(size=(100, n))
    probes.extend(sphere / np.linalg.norm(sphere, axis=1, keepdims=True))
    return any(abs(symbol_at(S_top, xi)) > 1e-12 for xi in probes)


def apply_analytic(P: DiffOperator, f, x, singular=None) -> complex:
    """sum_alpha a_alpha(x) d^alpha f(x) with f.deriv(alpha, x) exact.

    ``singular`` (a SingularSet) rejects points on the singular set.
    """
    x = np.asarray(x, dtype=float)
    if singular is not None and np.any(singular.distance(x) == 0.0):
        raise ValueError("point lies on the singular set")
    total = 0.0 + 0.0j
    for alpha, c in P.terms.items():
        coef = c if _is_const(c) else c.deriv((0,) * P.dim, x)
        total = total + coef * f.deriv(alpha, x)
    return total


@dataclass(frozen=True)
class DeltaStructure:
    """S = sum_beta c_beta d^beta, recovered from aPu = S delta."""

    dim: int
    coefficients: Mapping  # MultiIndex -> complex

    @property
    def order(self) -> int | None:
        return max((sum(b) for b in self.coefficients), default=None)

    @property
    def empty(self) -> bool:
        return not self.coefficients

    def coefficient(self, beta) -> complex:
        return complex(self.coefficients.get(tuple(beta), 0.0))

    def as_operator(self) -> DiffOperator:
        return DiffOperator(self.dim, dict(self.coefficients))

    def to_json(self) -> dict:
        return {mi_label(b): [c.real, c.imag] for b, c in self.coefficients.items()}

    @classmethod
    def from_json(cls, dim: int, data: Mapping) -> "DeltaStructure":
        return cls(dim, {parse_mi_label(k): complex(v[0], v[1]) for k, v in data.items()})


# ---------------------------------------------------------------- literals

_TERM = re.compile(r"\s*([+-])?\s*(?:(\([^)]*\)|[^*()\[\]]+?)\s*\*\s*)?d\[([0-9,\s]*)\]\s*")


def parse_complex(text: str) -> complex:
    t = text.strip().strip("()").replace(" ", "")
    if not t:
        raise ValueError("empty coefficient")
    t = t.replace("I", "i")
    if t in ("i", "+i"):
        return 1j
    if t == "-i":
        return -1j
    t = re.sub(r"(?<![0-9.])i", "1i", t)
    return complex(t.replace("i", "j"))


def parse_operator(literal: str, dim: int | None = None) -> DiffOperator:
    """Parse e.g. "1*d[2,0] + 1*d[0,2]" or "0.5*d[1,0] + 0.5i*d[0,1]"."""
    pos = 0
    terms: dict = {}
    text = literal.strip()
    if not text:
        raise ValueError("empty operator literal")
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse operator literal near {text[pos:]!r}")
        sign, coef, idx = m.groups()
        c = parse_complex(coef) if coef else 1.0
        if sign == "-":
            c = -c
        alpha = tuple(int(v) for v in idx.split(",") if v.strip())
        if dim is not None and len(alpha) != dim:
            raise ValueError(f"multi-index {alpha} does not match dimension {dim}")
        terms[alpha] = terms.get(alpha, 0) + c
        pos = m.end()
    dims = {len(a) for a in terms}
    if len(dims) != 1:
        raise ValueError("inconsistent multi-index lengths")
    return DiffOperator(dims.pop(), terms)


# ---------------------------------------------------------------- common operators

def unit(dim: int, i: int, k: int = 1) -> MultiIndex:
    return tuple(k if j == i else 0 for j in range(dim))


def identity(dim: int) -> DiffOperator:
    return DiffOperator(dim, {(0,) * dim: 1.0})


def partial(dim: int, alpha) -> DiffOperator:
    return DiffOperator(dim, {tuple(alpha): 1.0})


def laplacian(dim: int) -> DiffOperator:
    return DiffOperator(dim, {unit(dim, i, 2): 1.0 for i in range(dim)})


def bilaplacian(dim: int) -> DiffOperator:
    terms: dict = {}
    for i in range(dim):
        for j in range(dim):
            a = tuple(np.add(unit(dim, i, 2), unit(dim, j, 2)))
            terms[a] = terms.get(a, 0) + 1.0
    return DiffOperator(dim, terms)


def cauchy_riemann() -> DiffOperator:
    """d/dz-bar = (d_x + i d_y) / 2."""
    return DiffOperator(2, {(1, 0): 0.5, (0, 1): 0.5j})
