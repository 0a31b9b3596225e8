"""Boxes, cell-centered grids, fields, L^r norms and singular-tolerant pairing."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

# target number of points per evaluation slab
SLAB_POINTS = 1 << 21


class NonIntegrable(ArithmeticError):
    """Quadrature refinement does not settle: the integrand is not L^1."""


@dataclass(frozen=True)
class Exponent:
    """Lebesgue exponent in [1, inf]; infinity is a separate flag, not a float."""

    frac: Fraction | None  # None means infinity

    @classmethod
    def parse(cls, value) -> "Exponent":
        if isinstance(value, Exponent):
            return value
        if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "oo", "∞"):
            return cls(None)
        if isinstance(value, float) and math.isinf(value):
            return cls(None)
        try:
            frac = Fraction(str(value).strip()) if isinstance(value, str) else Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed exponent {value!r}") from exc
        if frac < 1:
            raise ValueError(f"exponent must be >= 1, got {value!r}")
        return cls(frac)

    @property
    def is_inf(self) -> bool:
        return self.frac is None

    @property
    def value(self) -> float:
        return math.inf if self.frac is None else float(self.frac)

    @property
    def dual_part(self) -> Fraction:
        """1 - 1/p, exact."""
        return Fraction(1) if self.frac is None else 1 - 1 / self.frac

    @property
    def inv(self) -> Fraction:
        return Fraction(0) if self.frac is None else 1 / self.frac

    def __str__(self):
        if self.frac is None:
            return "inf"
        return str(self.frac.numerator) if self.frac.denominator == 1 else str(float(self.frac))

    def __le__(self, other: "Exponent") -> bool:
        if other.is_inf:
            return True
        return not self.is_inf and self.frac <= other.frac

    def __lt__(self, other: "Exponent") -> bool:
        return self <= other and self != other


INF = Exponent(None)


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or not 1 <= len(self.lo) <= 3:
            raise ValueError("box needs matching lo/hi of length 1..3")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box needs lo < hi on every axis")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @classmethod
    def cube(cls, dim: int, half: float = 1.0) -> "Box":
        return cls((-half,) * dim, (half,) * dim)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))


@dataclass(frozen=True)
class Grid:
    box: Box
    cells: tuple[int, ...]

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.box.hi) - np.array(self.box.lo)) / np.array(self.cells)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_nodes(self, i: int) -> np.ndarray:
        h = (self.box.hi[i] - self.box.lo[i]) / self.cells[i]
        return self.box.lo[i] + (np.arange(self.cells[i]) + 0.5) * h

    def axes(self) -> list[np.ndarray]:
        return [self.axis_nodes(i) for i in range(self.dim)]

    def nodes(self) -> np.ndarray:
        """All nodes, row-major (last axis fastest), shape (N, n)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.box, tuple(c * factor for c in self.cells))


def make_grid(box: Box, cells: Sequence[int]) -> Grid:
    cells = tuple(int(c) for c in cells)
    if len(cells) != box.dim:
        raise ValueError("cells length must match box dimension")
    if any(c < 2 for c in cells):
        raise ValueError("need at least 2 cells per axis")
    return Grid(box, cells)


@dataclass(frozen=True)
class SingularSet:
    """The coordinate subspace {x'' = 0} where x'' are the last ``codim`` axes.

    codim == dim is the origin.
    """

    dim: int
    codim: int

    def __post_init__(self):
        if not 1 <= self.codim <= self.dim:
            raise ValueError("codimension must lie in 1..dim")

    @property
    def is_point(self) -> bool:
        return self.codim == self.dim

    def distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x[..., self.dim - self.codim:], axis=-1)


class Field:
    """Complex-valued function on a box, evaluated at arrays of shape (..., n)."""

    dim: int
    singular: SingularSet

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class AnalyticField(Field):
    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    singular: SingularSet = None
    # exact partials: deriv(alpha, x); optional
    deriv: Callable | None = None
    box: Box = None

    def __post_init__(self):
        if self.singular is None:
            object.__setattr__(self, "singular", SingularSet(self.dim, self.dim))
        if self.box is None:
            object.__setattr__(self, "box", Box.cube(self.dim))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.func(x), dtype=complex)


@dataclass(frozen=True, eq=False)
class SampledField(Field):
    """Samples on a cell-centered grid, multilinear interpolation, zero outside the box."""

    grid: Grid
    values: np.ndarray
    singular: SingularSet = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).reshape(self.grid.cells)
        if not np.all(np.isfinite(vals)):
            raise ValueError("sampled field has non-finite values")
        object.__setattr__(self, "values", vals)
        if self.singular is None:
            object.__setattr__(self, "singular", SingularSet(self.dim, self.dim))
        object.__setattr__(
            self,
            "_interp",
            RegularGridInterpolator(self.grid.axes(), vals, method="linear", bounds_error=False, fill_value=None),
        )

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def box(self) -> Box:
        return self.grid.box

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        flat = x.reshape(-1, self.dim)
        out = self._interp(flat)
        lo, hi = np.array(self.box.lo), np.array(self.box.hi)
        outside = np.any((flat < lo) | (flat > hi), axis=-1)
        out[outside] = 0.0
        return out.reshape(shape)


def lr_norm(values, cell_volume: float, r) -> float:
    """Discrete L^r norm of samples with uniform cell volume (pairwise summation)."""
    r = Exponent.parse(r)
    mag = np.abs(np.asarray(values)).ravel()
    if mag.size == 0:
        return 0.0
    if r.is_inf:
        return float(mag.max())
    rv = float(r.frac)
    top = mag.max()
    if top == 0.0:
        return 0.0
    # scale by the max to avoid overflow for large r
    return float(top * (np.sum((mag / top) ** rv) * cell_volume) ** (1.0 / rv))


def _slabs(shape: Sequence[int]):
    per = int(np.prod(shape[1:])) if len(shape) > 1 else 1
    step = max(1, SLAB_POINTS // max(per, 1))
    for start in range(0, shape[0], step):
        yield slice(start, min(start + step, shape[0]))


def grid_integral(func: Callable[[np.ndarray], np.ndarray], grid: Grid) -> complex:
    """Midpoint rule of func over the grid, evaluated slab by slab."""
    axes = grid.axes()
    total = 0.0 + 0.0j
    partial = []
    for sl in _slabs([len(a) for a in axes]):
        mesh = np.meshgrid(axes[0][sl], *axes[1:], indexing="ij")
        pts = np.stack(mesh, axis=-1)
        partial.append(np.sum(func(pts)))
    total = np.sum(np.array(partial, dtype=complex))
    return complex(total * grid.cell_volume)


@dataclass(frozen=True)
class PairResult:
    value: complex
    error: float
    levels: tuple = field(default=(), repr=False)


DEFAULT_PAIR_CELLS = {1: 2048, 2: 256, 3: 48}
PAIR_STALL = 0.9   # increment ratio at or above which refinement is not converging


def pair(u: Field, g: Callable, support: Box, cells: Sequence[int] | None = None, probe: bool = True) -> PairResult:
    """Integral of u * g over ``support`` by cell-centered midpoint rule.

    Runs one refinement (h -> h/2) and reports |coarse - fine| as the error.
    If the two levels disagree by more than 1e-3 relative, two further
    refinements are run; increments that fail to shrink signal NonIntegrable.
    """
    if cells is None:
        cells = (DEFAULT_PAIR_CELLS[support.dim],) * support.dim
    grid = make_grid(support, cells)

    def integrand(pts):
        return u(pts) * g(pts)

    levels = [grid_integral(integrand, grid), grid_integral(integrand, grid.refined(2))]
    err = abs(levels[1] - levels[0])
    if probe and err > 1e-3 * max(abs(levels[1]), 1e-300):
        for factor in (4, 8):
            levels.append(grid_integral(integrand, grid.refined(factor)))
        diffs = [abs(b - a) for a, b in zip(levels, levels[1:])]
        shrink = [d2 / d1 if d1 > 0 else 0.0 for d1, d2 in zip(diffs, diffs[1:])]
        if all(s >= PAIR_STALL for s in shrink):
            raise NonIntegrable(f"pairing increments {diffs} do not shrink under refinement")
        return PairResult(levels[-1], diffs[-1], tuple(levels))
    return PairResult(levels[1], err, tuple(levels))


def tensor_contract(u: Field, w_axes: Sequence[np.ndarray], terms, with_abs: bool = False, with_max: bool = False):
    """sum_w u(w) prod_i M_i[x_i, w_i] for every term, summed with coefficients.

    ``terms`` is a list of (coef, [M_1, ..., M_n]) with M_i of shape (X_i, W_i).
    Returns an array of shape (X_1, ..., X_n).  With ``with_abs`` returns
    (values, magnitude, max |u|), where magnitude is the same contraction of
    |u| against |coef| |M_i|; with only ``with_max`` returns (values, max |u|).
    """
    n = len(w_axes)
    out_shape = tuple(t.shape[0] for t in terms[0][1])
    out = np.zeros(out_shape, dtype=complex)
    mag = np.zeros(out_shape)
    umax = 0.0
    letters = "abc"[:n]
    outl = "xyz"[:n]
    spec = letters + "," + ",".join(o + l for o, l in zip(outl, letters)) + "->" + outl
    for sl in _slabs([len(a) for a in w_axes]):
        mesh = np.meshgrid(w_axes[0][sl], *w_axes[1:], indexing="ij")
        U = u(np.stack(mesh, axis=-1))
        if with_abs or with_max:
            absU = np.abs(U)
            umax = max(umax, float(absU.max(initial=0.0)))
        for coef, mats in terms:
            ms = [mats[0][:, sl]] + list(mats[1:])
            out += coef * np.einsum(spec, U, *ms, optimize=True)
            if with_abs:
                mag += abs(coef) * np.einsum(spec, absU, *[np.abs(m) for m in ms], optimize=True)
    if with_abs:
        return out, mag, umax
    return (out, umax) if with_max else out


# ---------------------------------------------------------------- file formats

GRID_SCHEMA = "remova.gridfield/1"


def write_grid_field(path, f: SampledField, dtype: str = "c128") -> None:
    """JSON header, one NUL byte, then raw little-endian row-major samples."""
    g = f.grid
    header = {
        "schema": GRID_SCHEMA,
        "dim": g.dim,
        "lo": list(g.box.lo),
        "hi": list(g.box.hi),
        "cells": list(g.cells),
        "dtype": dtype,
        "order": "row-major",
        "codim": f.singular.codim,
    }
    if dtype == "c128":
        raw = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    elif dtype == "f64":
        raw = np.ascontiguousarray(f.values.real, dtype="<f8").tobytes()
    else:
        raise ValueError(f"unknown dtype {dtype}")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode())
        fh.write(b"\0")
        fh.write(raw)


def read_grid_field(path) -> SampledField:
    blob = Path(path).read_bytes()
    cut = blob.index(b"\0")
    header = json.loads(blob[:cut].decode())
    if header.get("order", "row-major") != "row-major":
        raise ValueError("only row-major grid fields are supported")
    box = Box(header["lo"], header["hi"])
    if header["dim"] != box.dim:
        raise ValueError("header dim does not match lo/hi")
    grid = make_grid(box, header["cells"])
    dt = {"c128": "<c16", "f64": "<f8"}[header["dtype"]]
    vals = np.frombuffer(blob[cut + 1:], dtype=dt)
    if vals.size != grid.size:
        raise ValueError(f"expected {grid.size} samples, found {vals.size}")
    sing = SingularSet(box.dim, header.get("codim", box.dim))
    return SampledField(grid, vals.astype(complex).reshape(grid.cells), sing)


def read_csv_field(path, codim: int | None = None) -> SampledField:
    """CSV with columns x1..xn, re, im on a cell-centered tensor grid."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError("empty CSV field")
    xcols = sorted((c for c in rows[0] if c.startswith("x")), key=lambda c: int(c[1:]))
    n = len(xcols)
    coords = np.array([[float(r[c]) for c in xcols] for r in rows])
    vals = np.array([float(r["re"]) + 1j * float(r.get("im", 0.0) or 0.0) for r in rows])
    axes = [np.unique(coords[:, i]) for i in range(n)]
    cells = [len(a) for a in axes]
    if int(np.prod(cells)) != len(rows):
        raise ValueError("CSV points do not form a full tensor grid")
    lo, hi = [], []
    for a in axes:
        h = a[1] - a[0]
        if not np.allclose(np.diff(a), h, rtol=1e-9, atol=1e-12):
            raise ValueError("CSV grid is not uniform")
        lo.append(a[0] - h / 2)
        hi.append(a[-1] + h / 2)
    grid = make_grid(Box(lo, hi), cells)
    idx = [np.searchsorted(a, coords[:, i]) for i, a in enumerate(axes)]
    arr = np.zeros(cells, dtype=complex)
    arr[tuple(idx)] = vals
    return SampledField(grid, arr, SingularSet(n, codim or n))


def sample_field(u: Field, grid: Grid) -> SampledField:
    vals = u(grid.nodes()).reshape(grid.cells)
    return SampledField(grid, vals, u.singular)


# ---------------------------------------------------------------- product integration

@lru_cache(maxsize=None)
def _panel_basis(degree: int, points: int, sub: int):
    """Reference panel [0, degree+1] with nodes at i + 1/2: GL points and weight*Lagrange table."""
    P = degree + 1
    gx, gw = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(0.0, P, sub + 1)
    t = np.concatenate([0.5 * (b - a) * (gx + 1) + a for a, b in zip(edges, edges[1:])])
    w = np.concatenate([0.5 * (b - a) * gw for a, b in zip(edges, edges[1:])])
    nodes = np.arange(P) + 0.5
    L = np.ones((len(t), P))
    for i in range(P):
        for j in range(P):
            if i != j:
                L[:, i] *= (t - nodes[j]) / (nodes[i] - nodes[j])
    return t, w[:, None] * L


def panel_rule(intervals, h: float, kernel: Callable, degree: int = 3, points: int = 24, sub: int = 8):
    """Product-integration weights for int u(w) K_x(w) dw on the lattice (j + 1/2) h.

    u is replaced by its piecewise degree-``degree`` interpolant on panels of
    degree+1 consecutive nodes; panels never straddle w = 0, so a jump or kink
    of u across the coordinate hyperplane is integrated exactly.  The kernel
    ``kernel(z) -> (X, len(z))`` is integrated by composite Gauss-Legendre.
    ``intervals`` lists (lo, hi) supports, one per x; the union of the panels
    touching them defines the nodes.

    Returns (nodes, W) with W of shape (X, len(nodes)).
    """
    P = degree + 1
    ph = P * h
    idx = set()
    for lo, hi in intervals:
        idx.update(range(math.floor(lo / ph), math.floor(hi / ph) + 1))
    panels = np.array(sorted(idx))
    t, BL = _panel_basis(degree, points, sub)
    z = (panels[:, None] * P + t[None, :]) * h
    K = np.asarray(kernel(z.ravel()))
    X = K.shape[0]
    K = K.reshape(X, len(panels), len(t))
    W = np.einsum("xpg,gi->xpi", K, BL) * h
    nodes = ((panels[:, None] * P + np.arange(P)[None, :] + 0.5) * h).ravel()
    return nodes, W.reshape(X, -1)
