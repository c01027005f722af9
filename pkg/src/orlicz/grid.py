"""Discretised domains, convolution kernels, grid functions and quadrature.

Domains are unions of axis-aligned boxes in one or two dimensions, each
split into uniform cells; nodes are cell centres and weights cell volumes.
Double integrals over ``Omega x Omega`` use the midpoint rule on node pairs,
with the kernel evaluated at node differences.
"""
import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import (
    ComponentGapTooLarge,
    ConfigError,
    KernelLowerBoundViolated,
    MollifierTooWide,
    NonFiniteIntegrand,
)
from .fields import Expression, coord_kwargs

MAX_PAIRS = 2 ** 24


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple
    cells: tuple

    @property
    def dim(self):
        return len(self.lo)

    @property
    def widths(self):
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def spacing(self):
        return tuple(w / n for w, n in zip(self.widths, self.cells))

    def distance(self, other):
        gaps = [max(0.0, other.lo[k] - self.hi[k], self.lo[k] - other.hi[k])
                for k in range(self.dim)]
        return math.sqrt(sum(g * g for g in gaps))

    def overlaps(self, other):
        return all(min(self.hi[k], other.hi[k]) - max(self.lo[k], other.lo[k]) > 0
                   for k in range(self.dim))

    def nodes(self):
        axes = [l + (np.arange(n) + 0.5) * (h - l) / n
                for l, h, n in zip(self.lo, self.hi, self.cells)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def cell_volume(self):
        return float(np.prod(self.spacing))


class Grid:
    """A cell-centred grid over one or more boxes.

    Grids are immutable; identity is used for caching pair quantities.
    """

    def __init__(self, boxes):
        self.boxes = tuple(boxes)
        self.dim = self.boxes[0].dim
        pts, wts, comp = [], [], []
        for k, b in enumerate(self.boxes):
            nd = b.nodes()
            pts.append(nd)
            wts.append(np.full(len(nd), b.cell_volume()))
            comp.append(np.full(len(nd), k))
        self.nodes = np.vstack(pts)
        self.weights = np.concatenate(wts)
        self.component = np.concatenate(comp)
        self.total_measure = _backend.tree_sum(self.weights)
        for arr in (self.nodes, self.weights, self.component):
            arr.setflags(write=False)
        self._pair_cache = {}

    def __len__(self):
        return len(self.weights)

    @property
    def size(self):
        return len(self.weights)

    @property
    def bounding_box(self):
        lo = tuple(min(b.lo[k] for b in self.boxes) for k in range(self.dim))
        hi = tuple(max(b.hi[k] for b in self.boxes) for k in range(self.dim))
        return lo, hi

    def pair_points(self):
        """Broadcastable ``(x, y)`` arrays of shape ``(N,1,d)`` and ``(1,N,d)``."""
        return self.nodes[:, None, :], self.nodes[None, :, :]

    def kernel_matrix(self, kernel):
        key = ("kernel", id(kernel))
        mat = self._pair_cache.get(key)
        if mat is None:
            diff = self.nodes[:, None, :] - self.nodes[None, :, :]
            mat = np.ascontiguousarray(kernel(diff), dtype=np.float64)
            mat.setflags(write=False)
            self._pair_cache[key] = (kernel, mat)
            return mat
        return mat[1]

    def function(self, values):
        return GridFunction(self, values)

    def evaluate(self, expr):
        """Grid function from an expression in ``x0[, x1]``."""
        e = Expression.from_text(expr, ("x0", "x1"))
        vals = e(**{v: self.nodes[:, int(v[1])] for v in e.variables})
        return GridFunction(self, np.broadcast_to(vals, (self.size,)).copy())

    def restrict(self, mask):
        """Sub-grid of the nodes selected by ``mask`` (kept as a point cloud)."""
        return SubGrid(self, np.asarray(mask, dtype=bool))

    def describe(self):
        return {"dim": self.dim, "nodes": self.size,
                "boxes": [{"lo": list(b.lo), "hi": list(b.hi), "cells": list(b.cells)}
                          for b in self.boxes]}


class SubGrid(Grid):
    """The nodes of a parent grid selected by a mask, with their weights."""

    def __init__(self, parent, mask):
        self.parent = parent
        self.mask = mask
        self.boxes = parent.boxes
        self.dim = parent.dim
        self.nodes = parent.nodes[mask]
        self.weights = parent.weights[mask]
        self.component = parent.component[mask]
        self.total_measure = _backend.tree_sum(self.weights)
        self._pair_cache = {}


def build_grid(spec, kernel=None):
    """Build a :class:`Grid` from a domain spec.

    ``spec`` is ``{"boxes": [{"lo": [...], "hi": [...], "cells": [...]}, ...]}``
    (a single box may be given directly). With a ``kernel``, consecutive
    components must be closer than the diameter of its ball.
    """
    boxes_spec = spec.get("boxes", [spec]) if isinstance(spec, dict) else spec
    boxes = []
    for b in boxes_spec:
        lo = tuple(float(v) for v in _seq(b["lo"]))
        hi = tuple(float(v) for v in _seq(b["hi"]))
        cells = tuple(int(v) for v in _seq(b.get("cells", 32)))
        if len(cells) == 1 and len(lo) > 1:
            cells = cells * len(lo)
        if not (len(lo) == len(hi) == len(cells)) or len(lo) not in (1, 2):
            raise ConfigError(f"box needs matching lo/hi/cells of dimension 1 or 2: {b!r}")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ConfigError(f"box needs lo < hi on every axis: {b!r}")
        if any(n < 2 for n in cells):
            raise ConfigError(f"box needs at least 2 cells per axis: {b!r}")
        boxes.append(Box(lo, hi, cells))
    if not boxes:
        raise ConfigError("domain needs at least one box")
    if len({b.dim for b in boxes}) != 1:
        raise ConfigError("all boxes must share one dimension")
    n = sum(int(np.prod(b.cells)) for b in boxes)
    if n * n > MAX_PAIRS:
        raise ConfigError(f"{n} nodes give {n * n} pairs, above the limit {MAX_PAIRS}")
    for a, b in itertools.combinations(boxes, 2):
        if a.overlaps(b):
            raise ConfigError(f"boxes overlap: {a} and {b}")
    if kernel is not None:
        for a, b in zip(boxes, boxes[1:]):
            gap = a.distance(b)
            if not gap < 2.0 * kernel.r0:
                raise ComponentGapTooLarge(
                    f"gap {gap:.6g} between components is not below the kernel ball "
                    f"diameter {2.0 * kernel.r0:.6g}")
    return Grid(boxes)


def _seq(v):
    return v if isinstance(v, (list, tuple)) else [v]


# ----------------------------------------------------------------------------
# kernels


@dataclass(frozen=True, eq=False)
class Kernel:
    """Convolution weight ``a(z)`` with ``a >= c0`` on the ball of radius ``r0``."""

    kind: str
    evaluator: object = field(repr=False)
    c0: float
    r0: float
    l1_mass: float
    params: dict = field(default_factory=dict)
    dim: int = 1

    def __call__(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 0:
            z = z.reshape(1)
        return np.asarray(self.evaluator(z), dtype=np.float64)

    @property
    def is_even(self):
        return self.kind in ("constant", "indicator", "gaussian", "exp")

    def describe(self):
        return {"kind": self.kind, "c0": self.c0, "r0": self.r0, "l1_mass": self.l1_mass,
                **self.params}


def _radius(z):
    return np.sqrt(np.sum(z * z, axis=-1))


def build_kernel(spec, dim=1):
    """Build a :class:`Kernel` from ``{"kind": ..., ...}``.

    Kinds: ``constant{c}``, ``indicator{r}``, ``gaussian{sigma, r0}``,
    ``exp{lam, r0}`` and ``expr{expr, r0}`` where the expression uses
    ``z0, z1`` and ``r = |z|``.
    """
    kind = spec.get("kind")
    if kind == "constant":
        c = float(spec.get("c", 1.0))
        r0 = float(spec.get("r0", 1.0))
        if not c > 0:
            raise KernelLowerBoundViolated(f"constant kernel needs c > 0, got {c}")
        ev = _Const(c)
        l1 = c * (8.0 * r0) ** dim
        return Kernel("constant", ev, c, r0, l1, {"c": c}, dim)
    if kind == "indicator":
        r = float(spec["r"])
        if not r > 0:
            raise KernelLowerBoundViolated(f"indicator radius must be positive, got {r}")
        ev = _Indicator(r)
        l1 = 2.0 * r if dim == 1 else math.pi * r * r
        return Kernel("indicator", ev, 1.0, r, l1, {"r": r}, dim)
    if kind == "gaussian":
        sigma = float(spec["sigma"])
        r0 = float(spec.get("r0", sigma))
        ev = _Gaussian(sigma)
        c0 = math.exp(-0.5 * (r0 / sigma) ** 2)
        l1 = (2.0 * math.pi * sigma * sigma) ** (dim / 2.0)
        return Kernel("gaussian", ev, c0, r0, l1, {"sigma": sigma}, dim)
    if kind == "exp":
        lam = float(spec["lam"])
        r0 = float(spec.get("r0", 1.0 / lam))
        ev = _Exp(lam)
        c0 = math.exp(-lam * r0)
        l1 = 2.0 / lam if dim == 1 else 2.0 * math.pi / (lam * lam)
        return Kernel("exp", ev, c0, r0, l1, {"lam": lam}, dim)
    if kind == "expr":
        text = str(spec["expr"])
        r0 = float(spec.get("r0", 1.0))
        ev = _ExprKernel(Expression.from_text(text, ("z0", "z1", "r")))
        c0, l1 = _sampled_kernel_bounds(ev, r0, dim)
        return Kernel("expr", ev, c0, r0, l1, {"expr": text}, dim)
    raise ConfigError(f"unknown kernel kind {kind!r}")


class _Const:
    def __init__(self, c):
        self.c = c

    def __call__(self, z):
        return np.full(z.shape[:-1], self.c)


class _Indicator:
    def __init__(self, r):
        self.r = r

    def __call__(self, z):
        return (_radius(z) <= self.r).astype(np.float64)


class _Gaussian:
    def __init__(self, sigma):
        self.s2 = 2.0 * sigma * sigma

    def __call__(self, z):
        return np.exp(-np.sum(z * z, axis=-1) / self.s2)


class _Exp:
    def __init__(self, lam):
        self.lam = lam

    def __call__(self, z):
        return np.exp(-self.lam * _radius(z))


class _ExprKernel:
    def __init__(self, expr):
        self.expr = expr

    def __call__(self, z):
        kw = {}
        for v in self.expr.variables:
            if v == "r":
                kw["r"] = _radius(z)
            else:
                k = int(v[1])
                kw[v] = z[..., k] if k < z.shape[-1] else np.zeros(z.shape[:-1])
        val = self.expr(**kw)
        return np.broadcast_to(val, z.shape[:-1]).astype(np.float64)


def _sampled_kernel_bounds(ev, r0, dim, n=201):
    # reference box of radius 4*r0, midpoint rule
    h = 8.0 * r0 / n
    ax = -4.0 * r0 + (np.arange(n) + 0.5) * h
    pts = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    vals = ev(pts)
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise KernelLowerBoundViolated("kernel is negative or non-finite on the reference box")
    inside = _radius(pts) <= r0
    # also probe the ball boundary and centre
    ang = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
    if dim == 1:
        extra = np.array([[-r0], [0.0], [r0]])
    else:
        extra = np.vstack([[0.0, 0.0], r0 * np.stack([np.cos(ang), np.sin(ang)], axis=-1)])
    ball = np.concatenate([vals[inside], ev(extra)])
    c0 = float(np.min(ball))
    if not c0 > 0:
        raise KernelLowerBoundViolated(f"kernel minimum {c0} on the ball of radius {r0} is not positive")
    return c0, float(np.sum(vals) * h ** dim)


# ----------------------------------------------------------------------------
# grid functions


class GridFunction:
    """Real values attached to the nodes of a grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.array(values, dtype=np.float64).reshape(-1)
        if values.shape[0] != grid.size:
            raise ValueError(f"{values.shape[0]} values for a grid of {grid.size} nodes")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    def _wrap(self, values):
        return GridFunction(self.grid, values)

    def __add__(self, other):
        return self._wrap(self.values + _vals(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - _vals(other))

    def __rsub__(self, other):
        return self._wrap(_vals(other) - self.values)

    def __mul__(self, s):
        return self._wrap(self.values * _vals(s))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self._wrap(self.values / _vals(s))

    def __neg__(self):
        return self._wrap(-self.values)

    def to_csv(self, path_or_buf=None):
        """Node coordinates and value, one node per row."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{k}" for k in range(self.grid.dim)] + ["value"])
        for pt, v in zip(self.grid.nodes, self.values):
            w.writerow([repr(float(c)) for c in pt] + [repr(float(v))])
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        with open(path_or_buf, "w", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, grid, path_or_text):
        text = path_or_text
        if "\n" not in str(path_or_text):
            with open(path_or_text, newline="") as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        data = np.array([[float(c) for c in r] for r in rows[1:]])
        pts, vals = data[:, :-1], data[:, -1]
        if pts.shape != grid.nodes.shape or not np.allclose(pts, grid.nodes, rtol=0, atol=1e-12):
            raise ConfigError("CSV node coordinates do not match the grid")
        return cls(grid, vals)


def _vals(o):
    return o.values if isinstance(o, GridFunction) else o


class PairFunction:
    """Real values ``U(x_i, x_j)`` on node pairs, stored as an ``(N, N)`` array."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        if callable(values):
            x, y = grid.pair_points()
            values = values(x, y)
        values = np.array(np.broadcast_to(values, (grid.size, grid.size)), dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError("pair function values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def difference(cls, u):
        """``U(x, y) = u(x) - u(y)``."""
        v = u.values
        return cls(u.grid, v[:, None] - v[None, :])

    def _wrap(self, values):
        return PairFunction(self.grid, values)

    def __add__(self, other):
        return self._wrap(self.values + _pvals(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - _pvals(other))

    def __mul__(self, s):
        return self._wrap(self.values * _pvals(s))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self._wrap(self.values / _pvals(s))

    def __neg__(self):
        return self._wrap(-self.values)

    @property
    def T(self):
        return self._wrap(self.values.T)

    def to_csv(self, path):
        d = self.grid.dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{k}" for k in range(d)] + [f"y{k}" for k in range(d)] + ["value"])
            nodes = self.grid.nodes
            for i in range(self.grid.size):
                for j in range(self.grid.size):
                    w.writerow([repr(float(c)) for c in nodes[i]]
                               + [repr(float(c)) for c in nodes[j]]
                               + [repr(float(self.values[i, j]))])


def _pvals(o):
    return o.values if isinstance(o, PairFunction) else o


# ----------------------------------------------------------------------------
# quadrature


def quadrature_double(grid, kernel, integrand):
    """``sum_ij f(x_i, x_j) a(x_i - x_j) w_i w_j`` with a fixed tree summation order.

    ``integrand`` is an ``(N, N)`` array, a :class:`PairFunction` or a callable
    ``f(x, y)`` on broadcast pair coordinates.
    """
    f = _pair_values(grid, integrand)
    bad = ~np.isfinite(f)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise NonFiniteIntegrand(idx, float(f[tuple(idx)]))
    a = grid.kernel_matrix(kernel)
    rows = _backend.row_sums(f, a, grid.weights)
    return _backend.tree_sum(rows * grid.weights)


def _pair_values(grid, integrand):
    if isinstance(integrand, PairFunction):
        return integrand.values
    if callable(integrand):
        x, y = grid.pair_points()
        out = integrand(x, y)
        return np.broadcast_to(np.asarray(out, dtype=np.float64), (grid.size, grid.size))
    return np.asarray(integrand, dtype=np.float64)


def integrate(grid, values):
    """Single integral ``sum_i v_i w_i`` (tree summation)."""
    return _backend.tree_sum(np.asarray(values, dtype=np.float64) * grid.weights)


# ----------------------------------------------------------------------------
# approximation constructions


def value_truncate(u, n):
    """Clamp values to ``[-n, n]``."""
    return u._wrap(np.clip(u.values, -n, n))


def small_cutoff(u, eps):
    """Zero the values with ``0 < |u| < eps``."""
    v = u.values
    return u._wrap(np.where(np.abs(v) < eps, 0.0, v))


def support_truncate(u, radius, center=None):
    """Zero the values outside the closed ball ``|x - center| <= radius``."""
    c = np.zeros(u.grid.dim) if center is None else np.asarray(center, dtype=float)
    r = np.sqrt(np.sum((u.grid.nodes - c) ** 2, axis=-1))
    return u._wrap(np.where(r <= radius, u.values, 0.0))


def bump(r):
    """Smooth compactly supported profile ``exp(-1/(1 - r^2))`` on ``r < 1``."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def mollify(u, eps):
    """Convolve with the sampled bump of radius ``eps``, weights renormalised to 1.

    Values outside the grid count as zero; each node's stencil weights are
    normalised to sum to one, so constants are preserved exactly.
    """
    grid = u.grid
    for b in grid.boxes:
        if eps > 0.5 * min(b.widths):
            raise MollifierTooWide(
                f"mollifier radius {eps} exceeds half the component width {min(b.widths)}")
    if eps <= 0:
        return u
    nodes = grid.nodes
    out = np.empty(grid.size)
    # rows in blocks to bound memory
    block = max(1, 2 ** 22 // max(grid.size, 1))
    for start in range(0, grid.size, block):
        stop = min(start + block, grid.size)
        d = nodes[start:stop, None, :] - nodes[None, :, :]
        k = bump(np.sqrt(np.sum(d * d, axis=-1)) / eps) * grid.weights[None, :]
        # increments against the centre value keep constants bit-exact
        du = u.values[None, :] - u.values[start:stop, None]
        rows = _backend.row_sums(k, du, np.ones(grid.size))
        norm = _backend.row_sums(k, np.ones_like(k), np.ones(grid.size))
        out[start:stop] = u.values[start:stop] + rows / norm
    return u._wrap(out)


def approximate(u, method, param, **kw):
    """Apply one approximation step by name."""
    ops = {"value_truncate": value_truncate, "small_cutoff": small_cutoff,
           "support_truncate": support_truncate, "mollify": mollify}
    if method not in ops:
        raise ConfigError(f"unknown approximation {method!r}")
    return ops[method](u, param, **kw)
