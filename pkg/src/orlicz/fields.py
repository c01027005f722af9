"""Closed-form expressions of pair coordinates and of the integrand variable.

Expressions use a small grammar: ``+ - * / ^``, parentheses, numbers, the
functions ``sin cos exp ln abs sqrt step`` and the variables ``x0..x{d-1}``,
``y0..y{d-1}`` (pair coordinates), ``z`` (integrand argument) and, for
kernels, ``z0, z1, r``. Parsing goes through sympy so derivatives in ``z``
are exact.
"""
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from .errors import ExpressionError

_FUNCS = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "exp": sympy.exp,
    "ln": sympy.log,
    "log": sympy.log,
    "abs": sympy.Abs,
    "sqrt": sympy.sqrt,
    "step": lambda v: sympy.Heaviside(v, 1),
    "pi": sympy.pi,
}
_COORD_RE = re.compile(r"^[xy][0-9]$")
_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_ALLOWED_CHARS = re.compile(r"^[A-Za-z_0-9+\-*/^().,\s]*$")
_TRANSFORMS = standard_transformations + (convert_xor,)

PAIR_VARS = tuple(f"x{k}" for k in range(2)) + tuple(f"y{k}" for k in range(2))


def parse(text, variables):
    """Parse ``text`` into a sympy expression over the allowed ``variables``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError(f"empty expression: {text!r}")
    if not _ALLOWED_CHARS.match(text):
        raise ExpressionError(f"illegal character in expression {text!r}")
    symbols = {name: sympy.Symbol(name, real=True) for name in variables}
    for tok in _TOKEN_RE.findall(text):
        if tok not in symbols and tok not in _FUNCS:
            raise ExpressionError(f"unknown name {tok!r} in expression {text!r}")
    local = dict(_FUNCS)
    local.update(symbols)
    try:
        expr = parse_expr(text, local_dict=local, global_dict={"Integer": sympy.Integer,
                                                                "Float": sympy.Float,
                                                                "Rational": sympy.Rational,
                                                                "Symbol": sympy.Symbol},
                          transformations=_TRANSFORMS, evaluate=True)
    except Exception as exc:  # sympy raises a zoo of types here
        raise ExpressionError(f"cannot parse {text!r}: {exc}") from exc
    if not isinstance(expr, sympy.Expr):
        raise ExpressionError(f"{text!r} is not an arithmetic expression")
    return expr


@dataclass(frozen=True, eq=False)
class Expression:
    """A parsed expression with numpy evaluation and exact derivatives."""

    text: str
    variables: tuple
    sym: sympy.Expr = field(repr=False)

    @classmethod
    def from_text(cls, text, variables):
        expr = parse(text, variables)
        used = tuple(sorted(str(s) for s in expr.free_symbols))
        return cls(text=text, variables=used, sym=expr)

    @classmethod
    def from_sympy(cls, expr):
        used = tuple(sorted(str(s) for s in expr.free_symbols))
        return cls(text=str(expr), variables=used, sym=expr)

    @cached_property
    def _fn(self):
        syms = [sympy.Symbol(v, real=True) for v in self.variables]
        return sympy.lambdify(syms, self.sym, modules="numpy")

    def __call__(self, **values):
        out = self._fn(*(values[v] for v in self.variables))
        return np.asarray(out, dtype=np.float64)

    def diff(self, var, order=1):
        s = sympy.Symbol(var, real=True)
        return Expression.from_sympy(sympy.diff(self.sym, s, order))

    @property
    def is_constant(self):
        return not self.variables


def coord_kwargs(x, y, names):
    """Map variable names like ``x0``/``y1`` to coordinate arrays of ``x``/``y``."""
    out = {}
    for name in names:
        if not _COORD_RE.match(name):
            continue
        src = x if name[0] == "x" else y
        k = int(name[1])
        if k >= src.shape[-1]:
            raise ExpressionError(
                f"variable {name} needs dimension > {k}, points have d={src.shape[-1]}")
        out[name] = src[..., k]
    return out


def as_points(p):
    """Promote scalars to 1-d points; the last axis is the coordinate axis."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 0:
        p = p.reshape(1)
    return p


@dataclass(frozen=True, eq=False)
class Field:
    """A bounded function ``b(x, y)`` given as a constant or an expression.

    ``bounds`` are the stated (or sampled) lower and upper bounds.
    """

    const: float | None = None
    expr: Expression | None = None
    bounds: tuple = (None, None)

    @classmethod
    def constant(cls, value):
        value = float(value)
        return cls(const=value, bounds=(value, value))

    @classmethod
    def from_json(cls, obj, box=None):
        if isinstance(obj, (int, float)):
            return cls.constant(obj)
        if not isinstance(obj, dict):
            raise ExpressionError(f"field must be a number or object, got {obj!r}")
        if "const" in obj:
            return cls.constant(obj["const"])
        if "expr" not in obj:
            raise ExpressionError(f"field needs 'const' or 'expr': {obj!r}")
        expr = Expression.from_text(str(obj["expr"]), PAIR_VARS)
        if expr.is_constant:
            return cls.constant(float(expr.sym))
        if "bounds" in obj:
            lo, hi = (float(b) for b in obj["bounds"])
        else:
            lo, hi = sample_bounds(expr, box)
        return cls(expr=expr, bounds=(lo, hi))

    def to_json(self):
        if self.expr is None:
            return {"const": self.const}
        return {"expr": self.expr.text, "bounds": list(self.bounds)}

    @property
    def lo(self):
        return self.bounds[0]

    @property
    def hi(self):
        return self.bounds[1]

    def __call__(self, x, y):
        if self.expr is None:
            return np.float64(self.const)
        x = as_points(x)
        y = as_points(y)
        return self.expr(**coord_kwargs(x, y, self.expr.variables))

    def dim(self):
        if self.expr is None:
            return 0
        return max((int(v[1]) + 1 for v in self.expr.variables if _COORD_RE.match(v)),
                   default=0)


def sample_bounds(expr, box=None, n=4096, seed=0):
    """Sampled min/max of a pair-coordinate expression over ``box x box``."""
    d = max((int(v[1]) + 1 for v in expr.variables if _COORD_RE.match(v)), default=1)
    lo, hi = _box_arrays(box, d)
    rng = np.random.default_rng(seed)
    x = lo + (hi - lo) * rng.random((n, d))
    y = lo + (hi - lo) * rng.random((n, d))
    # include the corners of the box in both arguments
    corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)])).reshape(d, -1).T
    xc = np.repeat(corners, len(corners), axis=0)
    yc = np.tile(corners, (len(corners), 1))
    x = np.vstack([x, xc])
    y = np.vstack([y, yc])
    vals = expr(**coord_kwargs(x, y, expr.variables))
    vals = np.broadcast_to(vals, (len(x),))
    if not np.all(np.isfinite(vals)):
        raise ExpressionError(f"field {expr.text!r} is not finite on the domain box")
    return float(vals.min()), float(vals.max())


def _box_arrays(box, d):
    if box is None:
        return np.zeros(d), np.ones(d)
    lo = np.asarray(box[0], dtype=np.float64).reshape(-1)
    hi = np.asarray(box[1], dtype=np.float64).reshape(-1)
    if lo.size < d:
        lo = np.concatenate([lo, np.zeros(d - lo.size)])
        hi = np.concatenate([hi, np.ones(d - hi.size)])
    return lo[:d], hi[:d]
