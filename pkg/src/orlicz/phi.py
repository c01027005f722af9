"""Admissible integrands ``phi(z, x, y)``: evaluation, derivatives, conjugates.

An integrand is an expression tree. Leaves are the power family
``b(x,y) * z**p(x,y)``, the logarithmic multiplier
``ln(1 + Y(x,y) z) ** g(x,y)`` and free-form ``z``-expressions; inner nodes
are the closure operations (sum, scaling by a field, product, composition,
small additive perturbation, multiplication by a slowly growing factor).

Every node can be *bound* to a set of points ``(x, y)``. Binding evaluates
the coefficient fields once; the bound object then returns the value and the
first two ``z``-derivatives for any broadcastable ``z``. Derivatives are
analytic throughout the tree, except for :class:`Custom` leaves without a
supplied derivative, which fall back to central differences.

The growth window ``(p_minus, p_plus)`` and the constants ``beta, c1, c2, c7``
are propagated conservatively through the tree when it is built;
:func:`estimate_growth_constants` replaces them with sampled values.
"""
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import (
    ConjugateBracketFailure,
    ExpressionError,
    NonPositiveDerivative,
    NotAdmissible,
)
from .fields import PAIR_VARS, Expression, Field, as_points, coord_kwargs

_EPS = np.finfo(float).eps
_FD_STEP = _EPS ** (1.0 / 3.0)
MARGIN = 1.05


@dataclass(frozen=True)
class Growth:
    """Growth window and structural constants of an integrand."""

    p_minus: float
    p_plus: float
    beta: float = 1.0
    c1: float = 1.0
    c2: float = 2.0
    c7: float | None = None

    def as_dict(self):
        return {"p_minus": self.p_minus, "p_plus": self.p_plus, "beta": self.beta,
                "c1": self.c1, "c2": self.c2, "c7": self.c7}


# ----------------------------------------------------------------------------
# expression tree


class Node:
    """Base class of integrand expression nodes."""

    kind = "node"
    children = ()

    def bind(self, x, y):
        """Return a callable ``jet(z, order)`` -> list of arrays ``[f, f', f'']``."""
        raise NotImplementedError

    @property
    def has_second(self):
        return all(c.has_second for c in self.children)

    @property
    def analytic(self):
        return all(c.analytic for c in self.children)

    def fields(self):
        return ()

    def dim(self):
        ds = [f.dim() for f in self.fields()] + [c.dim() for c in self.children]
        return max(ds, default=0)

    def to_json(self):
        raise NotImplementedError


def _z(z):
    return np.asarray(z, dtype=np.float64)


class Power(Node):
    """``b(x,y) * z**p(x,y)``."""

    kind = "power"

    def __init__(self, p, b=None):
        self.p = p
        self.b = b if b is not None else Field.constant(1.0)

    def fields(self):
        return (self.p, self.b)

    @property
    def has_second(self):
        return True

    @property
    def analytic(self):
        return True

    def bind(self, x, y):
        p = self.p(x, y)
        b = self.b(x, y)

        def jet(z, order=0):
            z = _z(z)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                zp = np.power(z, p)
                out = [b * zp]
                if order >= 1:
                    d1 = np.where(z > 0, b * p * zp / np.where(z > 0, z, 1.0),
                                  np.where(p > 1, 0.0, np.inf))
                    out.append(d1)
                if order >= 2:
                    d2 = np.where(z > 0, b * p * (p - 1) * zp / np.where(z > 0, z * z, 1.0),
                                  np.where(p > 2, 0.0, np.where(p == 2, b * 2.0, np.inf)))
                    out.append(d2)
            return out

        return jet

    def to_json(self):
        return {"kind": "power", "p": self.p.to_json(), "b": self.b.to_json()}


class Log(Node):
    """``ln(1 + Y(x,y) z) ** g(x,y)``, a slowly growing multiplier."""

    kind = "log"

    def __init__(self, gamma, upsilon):
        self.gamma = gamma
        self.upsilon = upsilon

    def fields(self):
        return (self.gamma, self.upsilon)

    @property
    def has_second(self):
        return True

    @property
    def analytic(self):
        return True

    def bind(self, x, y):
        g = self.gamma(x, y)
        ups = self.upsilon(x, y)

        def jet(z, order=0):
            z = _z(z)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                L = np.log1p(ups * z)
                out = [np.power(L, g)]
                if order >= 1:
                    q = ups / (1.0 + ups * z)
                    out.append(g * np.power(L, g - 1) * q)
                if order >= 2:
                    lg2 = np.where(g == 2, 1.0, np.power(L, g - 2))
                    out.append(g * q * q * ((g - 1) * lg2 - np.power(L, g - 1)))
            return out

        return jet

    def to_json(self):
        return {"kind": "log", "gamma": self.gamma.to_json(),
                "upsilon": self.upsilon.to_json()}


class ZExpr(Node):
    """A closed-form expression of ``z`` (and optionally ``x``, ``y``)."""

    kind = "zexpr"

    def __init__(self, text):
        self.expr = Expression.from_text(text, ("z",) + PAIR_VARS)
        self.d1 = self.expr.diff("z", 1)
        self.d2 = self.expr.diff("z", 2)

    @property
    def has_second(self):
        return True

    @property
    def analytic(self):
        return True

    def dim(self):
        return max((int(v[1]) + 1 for v in self.expr.variables if v != "z"), default=0)

    def bind(self, x, y):
        exprs = (self.expr, self.d1, self.d2)
        kws = [coord_kwargs(x, y, e.variables) for e in exprs]

        def jet(z, order=0):
            z = _z(z)
            out = []
            for k in range(order + 1):
                e = exprs[k]
                kw = dict(kws[k])
                if "z" in e.variables:
                    kw["z"] = z
                val = e(**kw)
                out.append(np.broadcast_to(val, np.broadcast(val, z).shape).astype(float))
            return out

        return jet

    def to_json(self):
        return {"kind": "zexpr", "expr": self.expr.text}


class Custom(Node):
    """A Python callable ``f(z, x, y)``; missing derivatives use differences."""

    kind = "custom"

    def __init__(self, func, prime=None, second=None, name="custom"):
        self.func = func
        self.prime = prime
        self.second = second
        self.name = name

    @property
    def has_second(self):
        return self.second is not None

    @property
    def analytic(self):
        return self.prime is not None

    def dim(self):
        return 1

    def bind(self, x, y):
        f, fp, fpp = self.func, self.prime, self.second

        def jet(z, order=0):
            z = _z(z)
            out = [np.asarray(f(z, x, y), dtype=float)]
            if order >= 1:
                if fp is not None:
                    out.append(np.asarray(fp(z, x, y), dtype=float))
                else:
                    h = np.maximum(z, 1.0) * _FD_STEP
                    lo = np.maximum(z - h, 0.0)
                    out.append((np.asarray(f(z + h, x, y)) - np.asarray(f(lo, x, y)))
                               / (z + h - lo))
            if order >= 2:
                if fpp is None:
                    out.append(None)
                else:
                    out.append(np.asarray(fpp(z, x, y), dtype=float))
            return out

        return jet

    def to_json(self):
        return {"kind": "custom", "name": self.name}


class Sum(Node):
    kind = "sum"

    def __init__(self, *args):
        self.children = tuple(args)

    def bind(self, x, y):
        jets = [c.bind(x, y) for c in self.children]

        def jet(z, order=0):
            parts = [j(z, order) for j in jets]
            return [_add_all([p[k] for p in parts]) for k in range(order + 1)]

        return jet

    def to_json(self):
        return {"kind": "sum", "args": [c.to_json() for c in self.children]}


class Scale(Node):
    kind = "scale"

    def __init__(self, arg, b):
        self.children = (arg,)
        self.b = b

    def fields(self):
        return (self.b,)

    def bind(self, x, y):
        inner = self.children[0].bind(x, y)
        b = self.b(x, y)

        def jet(z, order=0):
            return [None if v is None else b * v for v in inner(z, order)]

        return jet

    def to_json(self):
        return {"kind": "scale", "args": [self.children[0].to_json()], "b": self.b.to_json()}


class Product(Node):
    kind = "product"

    def __init__(self, a, b):
        self.children = (a, b)

    def bind(self, x, y):
        ja, jb = (c.bind(x, y) for c in self.children)

        def jet(z, order=0):
            f = ja(z, order)
            g = jb(z, order)
            out = [f[0] * g[0]]
            if order >= 1:
                out.append(f[1] * g[0] + f[0] * g[1])
            if order >= 2:
                if f[2] is None or g[2] is None:
                    out.append(None)
                else:
                    out.append(f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2])
            return out

        return jet

    def to_json(self):
        return {"kind": "product", "args": [c.to_json() for c in self.children]}


class Compose(Node):
    """``outer(inner(z, x, y), x, y)``."""

    kind = "compose"

    def __init__(self, outer, inner):
        self.children = (outer, inner)

    def bind(self, x, y):
        jo, ji = (c.bind(x, y) for c in self.children)

        def jet(z, order=0):
            g = ji(z, order)
            f = jo(g[0], order)
            out = [f[0]]
            if order >= 1:
                out.append(f[1] * g[1])
            if order >= 2:
                if f[2] is None or g[2] is None:
                    out.append(None)
                else:
                    out.append(f[2] * g[1] * g[1] + f[1] * g[2])
            return out

        return jet

    def to_json(self):
        return {"kind": "compose", "args": [c.to_json() for c in self.children]}


class Perturb(Sum):
    """``base + psi`` with ``|psi''| <= c8 * base''`` and ``c8 < 1``."""

    kind = "perturb"

    def __init__(self, base, psi, c8=None):
        super().__init__(base, psi)
        self.c8 = c8

    def to_json(self):
        return {"kind": "perturb", "args": [c.to_json() for c in self.children]}


class PsiMultiply(Product):
    """``psi * base`` for a non-negative, non-decreasing, slowly growing ``psi``."""

    kind = "psi_multiply"

    def __init__(self, base, psi, c9=None, c10=None, q=None):
        super().__init__(base, psi)
        self.c9 = c9
        self.c10 = c10
        self.q = q

    def to_json(self):
        return {"kind": "psi_multiply", "args": [c.to_json() for c in self.children]}


def _add_all(vals):
    if any(v is None for v in vals):
        return None
    out = vals[0]
    for v in vals[1:]:
        out = out + v
    return out


# ----------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SamplingConfig:
    """Sample set for the condition checks and empirical constants."""

    z_min: float = 1e-4
    z_max: float = 1e4
    n_z: int = 64
    n_xy: int = 128
    eps: tuple = (0.5, 0.25, 0.1)
    seed: int = 0

    def z_grid(self):
        return np.logspace(math.log10(self.z_min), math.log10(self.z_max), self.n_z)

    def xy(self, box, d):
        lo, hi = _box(box, d)
        rng = np.random.default_rng(self.seed)
        x = lo + (hi - lo) * rng.random((self.n_xy, d))
        y = lo + (hi - lo) * rng.random((self.n_xy, d))
        return x, y

    def as_dict(self):
        return {"z_min": self.z_min, "z_max": self.z_max, "n_z": self.n_z,
                "n_xy": self.n_xy, "eps": list(self.eps), "seed": self.seed}


def _box(box, d):
    if box is None:
        return np.zeros(d), np.ones(d)
    lo = np.asarray(box[0], dtype=float).reshape(-1)
    hi = np.asarray(box[1], dtype=float).reshape(-1)
    if lo.size < d:
        lo = np.concatenate([lo, np.zeros(d - lo.size)])
        hi = np.concatenate([hi, np.ones(d - hi.size)])
    return lo[:d], hi[:d]


def _sample_jets(node, box, d, sampling, order=2):
    """Values of ``node`` on the (xy-sample, z-grid) lattice."""
    zs = sampling.z_grid()
    x, y = sampling.xy(box, d)
    jet = node.bind(x[:, None, :], y[:, None, :])
    return zs, x, y, jet, jet(zs[None, :], order)


# ----------------------------------------------------------------------------
# PhiFunction


@dataclass(frozen=True, eq=False)
class PhiFunction:
    """An admissible integrand with its growth metadata.

    ``node`` is the expression tree (its JSON form is the provenance record),
    ``box`` the domain box over which coefficient fields were bounded.
    """

    node: Node
    growth: Growth | None
    box: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def p_minus(self):
        return self.growth.p_minus

    @property
    def p_plus(self):
        return self.growth.p_plus

    @property
    def beta(self):
        return self.growth.beta

    @property
    def c1(self):
        return self.growth.c1

    @property
    def c2(self):
        return self.growth.c2

    @property
    def c7(self):
        return self.growth.c7

    @property
    def dim(self):
        return max(self.node.dim(), 1)

    @property
    def has_second(self):
        return self.node.has_second

    def provenance(self):
        return self.node.to_json()

    def digest(self):
        blob = json.dumps(self.provenance(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_growth(self, growth):
        return replace(self, growth=growth, _cache={})

    def bind(self, x, y):
        """Jet of the integrand at fixed points; cached for reuse by key."""
        return self.node.bind(as_points(x), as_points(y))

    def bound_on(self, key, x, y):
        """Like :meth:`bind`, memoised under ``key`` (e.g. a grid)."""
        jet = self._cache.get(key)
        if jet is None:
            jet = self.bind(x, y)
            self._cache[key] = jet
        return jet

    def __call__(self, z, x, y):
        return eval_phi(self, z, x, y)


def eval_phi(phi, z, x, y):
    """``phi(z, x, y)``; exactly 0 at ``z = 0``."""
    z = _z(z)
    val = phi.bind(x, y)(z, 0)[0]
    return np.where(z == 0, 0.0, val) if np.ndim(val) else (0.0 if z == 0 else float(val))


def eval_prime(phi, z, x, y):
    """``d phi / dz`` at ``z > 0``; raises :class:`NonPositiveDerivative` if not > 0."""
    z = _z(z)
    d1 = phi.bind(x, y)(z, 1)[1]
    d1 = np.asarray(d1, dtype=float)
    bad = ~(d1 > 0) & np.broadcast_to(z > 0, d1.shape)
    if np.any(bad):
        idx = np.argwhere(bad)[0] if d1.ndim else ()
        raise NonPositiveDerivative(f"phi'(z) = {d1[tuple(idx)]!r} <= 0 at index {tuple(idx)}")
    return d1 if d1.ndim else float(d1)


def eval_second(phi, z, x, y):
    if not phi.has_second:
        return None
    d2 = phi.bind(x, y)(_z(z), 2)[2]
    return d2 if np.ndim(d2) else float(d2)


# ----------------------------------------------------------------------------
# Legendre conjugate

_MAX_DOUBLINGS = 200
_MAX_BISECT = 200
_CONJ_RTOL = 1e-10


def conjugate_jet(jet, t):
    """``sup_{s >= 0} (s t - phi(s))`` for a bound jet, elementwise in ``t``.

    Solves ``phi'(s) = t`` by bisection on the increasing derivative; the
    bracket grows by doubling / halving from ``s = 1``. Elements that cannot
    be bracketed are retried by golden-section maximisation.
    """
    t = _z(t)
    shape = np.broadcast_shapes(np.shape(t), np.shape(jet(np.float64(1.0), 0)[0]))
    t = np.broadcast_to(t, shape).astype(np.float64)
    one = np.ones(shape)
    out = np.zeros(shape)
    pos = t > 0
    if not np.any(pos):
        return out

    def dphi(s):
        return np.broadcast_to(jet(s, 1)[1], t.shape)

    lo = one.copy()
    hi = one.copy()
    # grow hi until phi'(hi) >= t
    need = pos & (dphi(hi) < t)
    for _ in range(_MAX_DOUBLINGS):
        if not np.any(need):
            break
        hi = np.where(need, 2.0 * hi, hi)
        need = pos & (dphi(hi) < t)
    failed = need.copy()
    lo = np.where(pos & ~failed, hi / 2.0, lo)
    # shrink lo until phi'(lo) <= t
    need = pos & ~failed & (dphi(lo) > t)
    for _ in range(_MAX_DOUBLINGS):
        if not np.any(need):
            break
        hi = np.where(need, lo, hi)
        lo = np.where(need, lo / 2.0, lo)
        need = pos & ~failed & (dphi(lo) > t)
    failed |= need
    active = pos & ~failed
    for _ in range(_MAX_BISECT):
        if not np.any(active & (hi - lo > _CONJ_RTOL * hi)):
            break
        mid = 0.5 * (lo + hi)
        below = dphi(mid) < t
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)

    def gain(s):
        return s * t - np.broadcast_to(jet(s, 0)[0], t.shape)

    best = np.maximum(gain(lo), gain(hi))
    out = np.where(active, np.maximum(best, 0.0), out)
    if np.any(failed):
        out = np.where(failed, _golden_conjugate(jet, t, hi, failed), out)
    return out


def _golden_conjugate(jet, t, s_max, mask):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a = np.zeros_like(t)
    b = np.where(mask, s_max, 1.0)

    def gain(s):
        return s * t - np.broadcast_to(jet(s, 0)[0], t.shape)

    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = gain(c), gain(d)
    for _ in range(_MAX_BISECT):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c = b - inv_phi * (b - a)
        d = a + inv_phi * (b - a)
        fc, fd = gain(c), gain(d)
    s = 0.5 * (a + b)
    at_edge = mask & (s > (1.0 - 1e-6) * np.where(mask, s_max, 1.0))
    if np.any(at_edge):
        idx = tuple(np.argwhere(at_edge)[0])
        raise ConjugateBracketFailure(
            f"no maximiser of s*t - phi(s) for t={t[idx]!r} below s={s_max[idx]!r}")
    return np.maximum(gain(s), 0.0)


def conjugate(phi, t, x, y):
    """``phi*(t, x, y) = sup_{s >= 0} (s t - phi(s, x, y))``."""
    out = conjugate_jet(phi.bind(x, y), t)
    return out if np.ndim(out) else float(out)


# ----------------------------------------------------------------------------
# building from JSON


def build_phi(expression, box=None, validate=True, sampling=None):
    """Build a :class:`PhiFunction` from a JSON expression tree (or a node).

    ``box`` is the ``(lo, hi)`` domain box over which coefficient fields are
    bounded and combinator constants are sampled; the unit box by default.
    With ``validate=False`` structural violations are recorded in the growth
    metadata instead of raising, so that :func:`check_conditions` can report
    them.
    """
    sampling = sampling or SamplingConfig()
    if isinstance(expression, PhiFunction):
        return expression
    if isinstance(expression, str):
        expression = json.loads(expression)
    node = expression if isinstance(expression, Node) else _parse_node(expression, box)
    growth = _growth(node, box, validate, sampling)
    if validate and isinstance(node, (Log, ZExpr)):
        raise NotAdmissible(f"a bare '{node.kind}' node is only valid as a multiplier "
                            "or perturbation")
    return PhiFunction(node=node, growth=growth, box=box)


def _parse_node(obj, box):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ExpressionError(f"expression node needs a 'kind': {obj!r}")
    kind = obj["kind"]
    args = [_parse_node(a, box) for a in obj.get("args", [])]

    def fld(name, default=None):
        if name not in obj:
            if default is None:
                raise ExpressionError(f"'{kind}' node needs field '{name}'")
            return Field.constant(default)
        return Field.from_json(obj[name], box)

    def nargs(n):
        if len(args) != n:
            raise ExpressionError(f"'{kind}' takes {n} args, got {len(args)}")

    if kind == "power":
        return Power(fld("p"), fld("b", 1.0))
    if kind == "log":
        return Log(fld("gamma"), fld("upsilon"))
    if kind == "zexpr":
        return ZExpr(str(obj["expr"]))
    if kind == "sum":
        if len(args) < 2:
            raise ExpressionError("'sum' takes at least 2 args")
        return Sum(*args)
    if kind == "scale":
        nargs(1)
        return Scale(args[0], fld("b"))
    if kind == "product":
        nargs(2)
        return Product(*args)
    if kind == "compose":
        nargs(2)
        return Compose(*args)
    if kind == "perturb":
        nargs(2)
        return Perturb(*args)
    if kind == "psi_multiply":
        nargs(2)
        return PsiMultiply(*args)
    raise ExpressionError(f"unknown expression kind {kind!r}")


# shorthand constructors used by tests and the harness

def power(p, b=1.0):
    return {"kind": "power", "p": _fj(p), "b": _fj(b)}


def log_psi(gamma, upsilon):
    return {"kind": "log", "gamma": _fj(gamma), "upsilon": _fj(upsilon)}


def _fj(v):
    if isinstance(v, dict):
        return v
    if isinstance(v, str):
        return {"expr": v}
    return {"const": float(v)}


def _growth(node, box, validate, sampling):
    """Conservative growth metadata of ``node`` (recursively)."""

    def fail(msg):
        if validate:
            raise NotAdmissible(msg)

    if isinstance(node, Power):
        p, b = node.p, node.b
        if not (p.lo > 1.0):
            fail(f"power exponent must satisfy 1 < p_minus, got p_minus={p.lo}")
        if not (b.lo > 0.0):
            fail(f"power coefficient must be positive, got b_minus={b.lo}")
        c1 = max(b.hi, 1.0 / b.lo) if b.lo > 0 else math.inf
        return Growth(p_minus=p.lo, p_plus=p.hi, beta=1.0, c1=c1, c2=p.hi,
                      c7=p.lo * (p.lo - 1.0) if p.lo > 1.0 else None)

    if isinstance(node, (Log, ZExpr, Custom)):
        return None

    if isinstance(node, Perturb):
        base, psi = node.children
        g = _growth(base, box, validate, sampling)
        if g is None or g.c7 is None:
            fail("perturbation needs a base with a second-derivative bound")
            return g
        c8 = _perturb_c8(base, psi, box, sampling)
        node.c8 = c8
        if not (c8 < 1.0):
            fail(f"perturbation too large: c8 = sup|psi''|/phi'' = {c8:.6g} >= 1")
            return g
        up, dn = 1.0 + c8, 1.0 - c8
        return Growth(p_minus=g.p_minus, p_plus=g.p_plus, beta=g.beta * up / dn,
                      c1=g.c1 * max(up, 1.0 / dn), c2=g.c2 * up / dn,
                      c7=g.c7 * dn / up)

    if isinstance(node, PsiMultiply):
        base, psi = node.children
        g = _growth(base, box, validate, sampling)
        if g is None or g.c7 is None:
            fail("psi-multiplication needs a base with a second-derivative bound")
            return g
        info = _psi_multiplier_constants(psi, box, sampling)
        node.c9, node.c10, node.q = info["c9"], info["c10"], info["q"]
        if not info["nonneg"]:
            fail("multiplier psi must be non-negative and non-decreasing")
        if not (node.c9 < 2.0):
            fail(f"multiplier second-derivative bound fails: c9 = {node.c9:.6g} >= 2")
        if not (node.c10 < g.c7):
            fail(f"multiplier second-derivative bound fails: c10 = {node.c10:.6g} "
                 f">= c7 = {g.c7:.6g}")
        lo1, hi1 = info["psi1"]
        c1 = g.c1 * max(hi1, 1.0 / lo1) if lo1 > 0 else math.inf
        return Growth(p_minus=g.p_minus, p_plus=g.p_plus + node.q, beta=g.beta, c1=c1,
                      c2=g.c2 + node.q, c7=g.c7 - node.c10)

    if isinstance(node, Scale):
        g = _growth(node.children[0], box, validate, sampling)
        b = node.b
        if not (b.lo > 0.0):
            fail(f"scale field must be positive, got b_minus={b.lo}")
        if g is None:
            return None
        c1 = g.c1 * max(b.hi, 1.0 / b.lo) if b.lo > 0 else math.inf
        return replace(g, c1=c1)

    if isinstance(node, Sum):
        gs = [_growth(c, box, validate, sampling) for c in node.children]
        if any(g is None for g in gs):
            fail("sum of non-admissible terms")
            return None
        c7s = [g.c7 for g in gs]
        return Growth(p_minus=min(g.p_minus for g in gs), p_plus=max(g.p_plus for g in gs),
                      beta=max(g.beta for g in gs), c1=sum(g.c1 for g in gs),
                      c2=max(g.c2 for g in gs),
                      c7=None if any(c is None for c in c7s) else min(c7s))

    if isinstance(node, Product):
        ga, gb = (_growth(c, box, validate, sampling) for c in node.children)
        if ga is None or gb is None:
            fail("product of non-admissible factors")
            return None
        c7 = None if ga.c7 is None or gb.c7 is None else ga.c7 + gb.c7
        return Growth(p_minus=ga.p_minus + gb.p_minus, p_plus=ga.p_plus + gb.p_plus,
                      beta=ga.beta * gb.beta, c1=ga.c1 * gb.c1, c2=ga.c2 + gb.c2, c7=c7)

    if isinstance(node, Compose):
        go, gi = (_growth(c, box, validate, sampling) for c in node.children)
        if go is None or gi is None:
            fail("composition of non-admissible functions")
            return None
        beta = go.beta * gi.beta ** go.p_plus
        c1 = go.beta * go.c1 * gi.c1 ** go.p_plus
        c7 = None if go.c7 is None or gi.c7 is None else go.c7 + gi.c7
        return Growth(p_minus=go.p_minus * gi.p_minus, p_plus=go.p_plus * gi.p_plus,
                      beta=beta, c1=c1, c2=go.c2 * gi.c2, c7=c7)

    raise ExpressionError(f"no growth rule for node {node.kind!r}")


def _node_dim(node):
    return max(node.dim(), 1)


def _perturb_c8(base, psi, box, sampling):
    d = max(_node_dim(base), _node_dim(psi))
    zs, x, y, _, fb = _sample_jets(base, box, d, sampling)
    jp = psi.bind(x[:, None, :], y[:, None, :])
    p0 = jp(np.zeros((1, 1)), 1)
    if np.max(np.abs(p0[0])) > 1e-12 or np.max(np.abs(p0[1])) > 1e-12:
        raise NotAdmissible("perturbation needs psi(0) = psi'(0) = 0")
    fp = jp(zs[None, :], 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(fp[2]) / fb[2]
    return float(np.max(ratio))


def _psi_multiplier_constants(psi, box, sampling):
    d = _node_dim(psi)
    zs, x, y, jet, (f, f1, f2) = _sample_jets(psi, box, d, sampling)
    z = zs[None, :]
    nonneg = bool(np.all(f >= 0) and np.all(f1 >= 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        if isinstance(psi, Log):
            c9, c10 = 1.0, 0.0
            q = psi.gamma.hi
        else:
            q = float(np.max(z * f1 / f))
            c9 = max(0.0, float(np.max(-z * f2 / f1)))
            c10 = 0.0
            if not c9 < 2.0:
                c9 = 1.99
                c10 = max(0.0, float(np.max(-(z * z * f2 + c9 * z * f1) / f)))
        # the stated constants must hold on the samples
        lhs = f2 + c9 * f1 / z + c10 * f / (z * z)
        holds = bool(np.all(lhs >= -1e-12 * (np.abs(f2) + f1 / z + f / (z * z))))
    if not holds:
        c9 = math.inf
    p1 = jet(np.ones((1, 1)), 0)[0]
    if isinstance(psi, Log):
        corners = [math.log1p(u) ** g for g in psi.gamma.bounds for u in psi.upsilon.bounds]
        psi1 = (min(corners + [float(np.min(p1))]), max(corners + [float(np.max(p1))]))
    else:
        psi1 = (float(np.min(p1)), float(np.max(p1)))
    return {"c9": c9, "c10": c10, "q": q, "nonneg": nonneg, "psi1": psi1}


# ----------------------------------------------------------------------------
# condition checks


@dataclass
class ConditionReport:
    """Sample-based verdict on the structural conditions of an integrand."""

    c2_uniform_convexity: dict
    c2_pass: bool
    c3_beta_increasing: float
    c3_beta_decreasing: float
    c3_pass: bool
    c4_min: float
    c4_max: float
    c4_pass: bool
    c5_sup: float
    c5_pass: bool
    secder_inf: float | None
    secder_pass: bool | None
    p_minus: float
    p_plus: float
    sampling: dict
    delta_reference: dict = field(default_factory=dict)

    @property
    def beta_hat(self):
        return max(self.c3_beta_increasing, self.c3_beta_decreasing)

    @property
    def passed(self):
        return self.c2_pass and self.c3_pass and self.c4_pass and self.c5_pass

    def as_dict(self):
        out = {k: v for k, v in self.__dict__.items()}
        out["c2_uniform_convexity"] = {str(k): v for k, v in self.c2_uniform_convexity.items()}
        out["delta_reference"] = {str(k): v for k, v in self.delta_reference.items()}
        out["beta_hat"] = self.beta_hat
        out["passed"] = self.passed
        return out


def _almost_monotone_betas(r):
    """``beta`` for r almost increasing / almost decreasing along the last axis."""
    with np.errstate(divide="ignore", invalid="ignore"):
        suffix_min = np.minimum.accumulate(r[..., ::-1], axis=-1)[..., ::-1]
        b_inc = np.max(r / suffix_min)
        prefix_min = np.minimum.accumulate(r, axis=-1)
        b_dec = np.max(r / prefix_min)
    return float(b_inc), float(b_dec)


def _window(phi, z, f, f1):
    if phi.growth is not None:
        return phi.growth.p_minus, phi.growth.p_plus
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = z * f1 / f
    return float(np.min(ratio)), float(np.max(ratio))


def _rtol_le(a, b, rtol=1e-9):
    return a <= b * (1.0 + rtol) + 1e-300


def check_conditions(phi, sampling=None):
    """Sample-based check of uniform convexity, growth, bounds and derivative domination."""
    sampling = sampling or SamplingConfig()
    d = phi.dim
    zs, x, y, jet, (f, f1, f2) = _sample_jets(phi.node, phi.box, d, sampling)
    z = zs[None, :]
    p_minus, p_plus = _window(phi, z, f, f1)
    g = phi.growth

    # uniform convexity
    i, j = np.triu_indices(len(zs), k=1)
    s, t = zs[i], zs[j]
    sep = np.abs(s - t) / np.maximum(s, t)
    mid = jet(0.5 * (s + t)[None, :], 0)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 1.0 - 2.0 * mid / (f[:, i] + f[:, j])
    deltas = {}
    for e in sampling.eps:
        mask = sep >= e
        deltas[float(e)] = float(np.min(gain[:, mask])) if np.any(mask) else math.nan
    c2_pass = all(np.isfinite(v) and v > 1e-6 for v in deltas.values())
    refs = {}
    if g is not None and g.c7 is not None:
        for e in sampling.eps:
            refs[float(e)] = {
                "proof_chain": g.c7 * e * e / (2.0 ** (g.p_plus + 4) * g.beta),
                "as_displayed": g.c7 * e * e / (g.beta * 2.0 ** (g.p_plus + 5) * g.beta),
            }

    # almost monotone ratios
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        b_inc, _ = _almost_monotone_betas(f / z ** p_minus)
        _, b_dec = _almost_monotone_betas(f / z ** p_plus)
    beta_decl = g.beta if g is not None else max(b_inc, b_dec)
    c3_pass = bool(1.0 < p_minus <= p_plus and np.isfinite(b_inc) and np.isfinite(b_dec)
                   and _rtol_le(max(b_inc, b_dec), beta_decl))

    # bounds at z = 1, zero at z = 0, positivity
    f_one = jet(np.ones((1, 1)), 0)[0]
    f_zero = eval_phi(phi, np.zeros(len(x)), x, y)
    c4_min, c4_max = float(np.min(f_one)), float(np.max(f_one))
    c1 = g.c1 if g is not None else max(c4_max, 1.0 / c4_min if c4_min > 0 else math.inf)
    c4_pass = bool(np.all(f_zero == 0.0) and np.all(f > 0) and c4_min > 0
                   and _rtol_le(1.0 / c4_min, c1) and _rtol_le(c4_max, c1))

    # derivative domination
    with np.errstate(divide="ignore", invalid="ignore"):
        r5 = z * f1 / f
    c5_sup = float(np.max(r5))
    c2_decl = g.c2 if g is not None else c5_sup
    c5_pass = bool(np.all(z * f1 > 0) and c2_decl > 1.0 and _rtol_le(c5_sup, c2_decl))

    secder_inf = secder_pass = None
    if f2 is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            secder_inf = float(np.min(z * z * f2 / f))
        secder_pass = bool(secder_inf > 0 and (g is None or g.c7 is None
                                               or _rtol_le(g.c7, secder_inf)))
    return ConditionReport(
        c2_uniform_convexity=deltas, c2_pass=c2_pass,
        c3_beta_increasing=b_inc, c3_beta_decreasing=b_dec, c3_pass=c3_pass,
        c4_min=c4_min, c4_max=c4_max, c4_pass=c4_pass,
        c5_sup=c5_sup, c5_pass=c5_pass,
        secder_inf=secder_inf, secder_pass=secder_pass,
        p_minus=p_minus, p_plus=p_plus, sampling=sampling.as_dict(),
        delta_reference=refs)


class GrowthEstimate(NamedTuple):
    beta: float
    c1: float
    c2: float
    c7: float | None


def estimate_growth_constants(phi, sampling=None, margin=True):
    """Tightest ``(beta, c1, c2, c7)`` on the sample set.

    With ``margin`` the constants are loosened by 5% in the safe direction
    (``beta, c1, c2`` up, ``c7`` down). Raises :class:`NotAdmissible` when a
    defining inequality fails outright.
    """
    sampling = sampling or SamplingConfig()
    zs, x, y, jet, (f, f1, f2) = _sample_jets(phi.node, phi.box, phi.dim, sampling)
    z = zs[None, :]
    p_minus, p_plus = _window(phi, z, f, f1)
    if not 1.0 < p_minus <= p_plus:
        raise NotAdmissible(f"growth window ({p_minus}, {p_plus}) violates 1 < p- <= p+")
    f_zero = eval_phi(phi, np.zeros(len(x)), x, y)
    if np.any(f_zero != 0.0) or not np.all(f > 0):
        raise NotAdmissible("phi(0) must vanish and phi(z) > 0 for z > 0")
    if not np.all(z * f1 > 0):
        raise NotAdmissible("z * phi'(z) must be positive")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        b_inc, _ = _almost_monotone_betas(f / z ** p_minus)
        _, b_dec = _almost_monotone_betas(f / z ** p_plus)
        c2 = float(np.max(z * f1 / f))
        c7 = float(np.min(z * z * f2 / f)) if f2 is not None else None
    beta = max(b_inc, b_dec, 1.0)
    if not np.isfinite(beta):
        raise NotAdmissible("almost-monotonicity ratio is unbounded on the samples")
    if not c2 > 1.0:
        raise NotAdmissible(f"derivative domination constant c2 = {c2} must exceed 1")
    f_one = jet(np.ones((1, 1)), 0)[0]
    c1 = max(float(np.max(f_one)), 1.0 / float(np.min(f_one)))
    if c7 is not None and not c7 > 0:
        c7 = None
    if margin:
        beta, c1, c2 = beta * MARGIN, c1 * MARGIN, c2 * MARGIN
        c7 = c7 / MARGIN if c7 is not None else None
    return GrowthEstimate(beta=beta, c1=c1, c2=c2, c7=c7)


def calibrate(phi, sampling=None):
    """A copy of ``phi`` whose constants are the 5%-margin sampled estimates."""
    est = estimate_growth_constants(phi, sampling)
    g = phi.growth
    p_minus, p_plus = (g.p_minus, g.p_plus) if g is not None else _window_of(phi, sampling)
    return phi.with_growth(Growth(p_minus=p_minus, p_plus=p_plus, beta=est.beta, c1=est.c1,
                                  c2=est.c2, c7=est.c7))


def _window_of(phi, sampling):
    sampling = sampling or SamplingConfig()
    zs, _, _, _, (f, f1, _) = _sample_jets(phi.node, phi.box, phi.dim, sampling, order=1)
    return _window(phi, zs[None, :], f, f1)
