"""Luxemburg-type norms and norm-level certificates.

Every norm here is the root of ``lambda -> E(u / lambda) = 1`` for a
functional ``E`` that decreases strictly in ``lambda``; the root is found by
bisection from a bracket given by the power-type growth bounds of ``E``.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import BracketExpansionFailure, ConfigError, DegenerateSample
from .functionals import (
    eval_F,
    eval_F_power,
    eval_G,
    eval_H,
    eval_H_star,
    lp_norm,
    lp_power,
)
from .grid import integrate

ZERO_TOL = 1e-14
RTOL = 1e-10
MAX_DOUBLINGS = 200
MAX_BISECT = 400


@dataclass(frozen=True)
class NormResult:
    value: float
    residual: float
    iterations: int
    bracket: tuple

    def as_dict(self):
        return {"value": self.value, "residual": self.residual,
                "iterations": self.iterations, "bracket": list(self.bracket)}


def solve_root(func, u, p_minus, p_plus, beta=1.0):
    """Root of ``func(u / lam) = 1`` by bisection on ``lam``.

    ``func`` maps a scaled copy of ``u`` to a float (``inf`` allowed) and must
    be strictly decreasing in ``lam``; ``p_minus, p_plus, beta`` are its
    power-type growth bounds, used only to seed the bracket.
    """
    f0 = float(func(u))
    if f0 <= ZERO_TOL:
        return NormResult(0.0, 0.0, 0, (0.0, 0.0))

    def val(lam):
        return float(func(u / lam))

    if math.isfinite(f0):
        cands_lo = [(f0 / beta) ** (1.0 / p) for p in (p_minus, p_plus)]
        cands_hi = [(beta * f0) ** (1.0 / p) for p in (p_minus, p_plus)]
        lo, hi = min(cands_lo), max(cands_hi)
    else:
        lo = hi = 1.0
    lo = lo if lo > 0 and math.isfinite(lo) else 1.0
    hi = hi if hi > 0 and math.isfinite(hi) else 1.0
    iters = 0
    f_lo = val(lo)
    while f_lo < 1.0:
        iters += 1
        if iters > MAX_DOUBLINGS:
            raise BracketExpansionFailure(f"no lower bracket after {MAX_DOUBLINGS} halvings")
        lo *= 0.5
        f_lo = val(lo)
    f_hi = val(hi)
    n = 0
    while f_hi > 1.0:
        n += 1
        if n > MAX_DOUBLINGS:
            raise BracketExpansionFailure(f"no upper bracket after {MAX_DOUBLINGS} doublings")
        hi *= 2.0
        f_hi = val(hi)
    iters += n
    bracket = (lo, hi)
    best, best_res = (lo, abs(f_lo - 1.0)) if abs(f_lo - 1.0) <= abs(f_hi - 1.0) \
        else (hi, abs(f_hi - 1.0))
    for _ in range(MAX_BISECT):
        if best_res <= RTOL or hi - lo <= RTOL * hi:
            break
        iters += 1
        mid = 0.5 * (lo + hi)
        fm = val(mid)
        if abs(fm - 1.0) < best_res:
            best, best_res = mid, abs(fm - 1.0)
        if fm > 1.0:
            lo = mid
        else:
            hi = mid
    return NormResult(best, best_res, iters, bracket)


def _conjugate_window(p_minus, p_plus):
    q_minus = p_plus / (p_plus - 1.0)
    q_plus = p_minus / (p_minus - 1.0)
    return q_minus, q_plus


def luxemburg(kind, grid, kernel, phi, u):
    """Norm induced by one of the functionals ``F``, ``G``, ``H``, ``Hstar``."""
    p_minus, p_plus, beta = phi.p_minus, phi.p_plus, phi.beta
    if kind == "F":
        func = lambda v: eval_F(grid, kernel, phi, v)  # noqa: E731
    elif kind == "G":
        func = lambda v: eval_G(grid, kernel, phi, p_minus, v)  # noqa: E731
    elif kind == "H":
        func = lambda v: eval_H(grid, kernel, phi, v)  # noqa: E731
    elif kind in ("Hstar", "H*"):
        func = lambda v: eval_H_star(grid, kernel, phi, v)  # noqa: E731
        p_minus, p_plus = _conjugate_window(p_minus, p_plus)
    else:
        raise ConfigError(f"unknown functional {kind!r}")
    return solve_root(func, u, p_minus, p_plus, beta)


def f_norm(grid, kernel, phi, u):
    """Luxemburg seminorm of ``F`` plus the ``L_{p-}`` norm."""
    return luxemburg("F", grid, kernel, phi, u).value + lp_norm(grid, u, phi.p_minus)


def g_norm(grid, kernel, phi, u):
    return luxemburg("G", grid, kernel, phi, u).value


def h_norm(grid, kernel, phi, U):
    return luxemburg("H", grid, kernel, phi, U).value


def h_star_norm(grid, kernel, phi, W):
    return luxemburg("Hstar", grid, kernel, phi, W).value


def decompose_mean_zero(grid, u):
    """``u = u_perp + mean`` with ``u_perp`` of zero weighted mean."""
    mean = integrate(grid, u.values) / grid.total_measure
    return u - mean, mean


def poincare_certificate(grid, kernel, p_minus, samples):
    """Largest ``||u_perp||_{p-}^{p-} / F_{p-}(u)`` over the non-constant samples."""
    if len(grid.boxes) != 1:
        raise ConfigError("the Poincare certificate needs a single-component grid")
    best = None
    for u in samples:
        denom = float(eval_F_power(grid, kernel, p_minus, u))
        if denom <= ZERO_TOL:
            continue
        u_perp, _ = decompose_mean_zero(grid, u)
        ratio = lp_power(grid, u_perp, p_minus) / denom
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise DegenerateSample("every sample is constant")
    return best


@dataclass(frozen=True)
class SandwichCertificate:
    passed: bool
    lam: float
    lower: float
    value: float
    upper: float
    slack: float

    def as_dict(self):
        return dict(self.__dict__)


def verify_sandwich(grid, kernel, phi, u, beta=None, tol=1e-12):
    """Check ``min(lam^p) / beta <= F(u) <= beta * max(lam^p)`` at the norm ``lam``.

    ``slack`` is the smaller relative distance to either bound; negative
    means a violation.
    """
    beta = phi.beta if beta is None else beta
    lam = luxemburg("F", grid, kernel, phi, u).value
    value = float(eval_F(grid, kernel, phi, u))
    if lam == 0.0:
        return SandwichCertificate(True, 0.0, 0.0, value, 0.0, 0.0)
    pw = [lam ** phi.p_minus, lam ** phi.p_plus]
    lower, upper = min(pw) / beta, beta * max(pw)
    slack = min(value - lower, upper - value) / max(value, 1e-300)
    return SandwichCertificate(bool(slack >= -tol), lam, lower, value, upper, slack)


def l1_ratio(grid, kernel, phi, u):
    """``sum |u_i - u_j| a_ij w_i w_j`` divided by the Luxemburg seminorm."""
    lam = luxemburg("F", grid, kernel, phi, u).value
    if lam == 0.0:
        return 0.0
    return float(eval_F_power(grid, kernel, 1.0, u)) / lam


def decomposition_ratios(grid, kernel, phi, u):
    """``f(u) / (|u_perp| + |mean|)``; bounded above and below over a family."""
    u_perp, mean = decompose_mean_zero(grid, u)
    denom = luxemburg("F", grid, kernel, phi, u_perp).value + abs(mean)
    if denom == 0.0:
        return math.nan
    return f_norm(grid, kernel, phi, u) / denom
