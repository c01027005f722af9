"""Integral functionals on discrete data.

All double integrals go through :func:`orlicz.grid.quadrature_double`, so
they share its summation order and are reproducible bit for bit.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConfigError, NonFiniteIntegrand
from .grid import GridFunction, PairFunction, integrate, quadrature_double
from .phi import conjugate_jet


@dataclass(frozen=True)
class FunctionalValue:
    """Extended non-negative real; ``infinite`` marks the value +inf."""

    value: float
    infinite: bool = False
    breakdown: dict = field(default_factory=dict)

    @classmethod
    def inf(cls, **breakdown):
        return cls(math.inf, True, breakdown)

    def __float__(self):
        return math.inf if self.infinite else self.value

    def as_dict(self):
        out = {"value": "inf" if self.infinite else self.value, "infinite": self.infinite}
        if self.breakdown:
            out["breakdown"] = dict(self.breakdown)
        return out


def _check_grid(grid, *objs):
    for o in objs:
        if o is not None and o.grid is not grid:
            raise ConfigError("function lives on a different grid")


def pair_jet(grid, phi):
    """The integrand jet bound to all node pairs of ``grid`` (cached on ``phi``)."""
    x, y = grid.pair_points()
    return phi.bound_on(("pairs", grid), x, y)


def pair_difference(u):
    v = u.values
    return v[:, None] - v[None, :]


def _phi_of(grid, phi, z):
    vals = pair_jet(grid, phi)(z, 0)[0]
    vals = np.where(z == 0, 0.0, np.broadcast_to(vals, z.shape))
    return vals


def _quad_or_inf(grid, kernel, f, **breakdown):
    if np.any(np.isnan(f)):
        idx = np.argwhere(np.isnan(f))[0]
        raise NonFiniteIntegrand(idx, float("nan"))
    if np.any(np.isinf(f)):
        return FunctionalValue.inf(**breakdown)
    with np.errstate(over="ignore"):
        q = quadrature_double(grid, kernel, f)
    if not math.isfinite(q):
        return FunctionalValue.inf(**breakdown)
    return FunctionalValue(q, False, breakdown)


def eval_F(grid, kernel, phi, u):
    """``F(u) = sum phi(|u_i - u_j|, x_i, x_j) a_ij w_i w_j``."""
    _check_grid(grid, u)
    z = np.abs(pair_difference(u))
    with np.errstate(over="ignore"):
        f = _phi_of(grid, phi, z)
    return _quad_or_inf(grid, kernel, f)


def lp_power(grid, u, p):
    """``sum |u_i|^p w_i``."""
    with np.errstate(over="ignore"):
        return integrate(grid, np.abs(u.values) ** p)


def lp_norm(grid, u, p):
    return lp_power(grid, u, p) ** (1.0 / p)


def eval_G(grid, kernel, phi, p_minus, u):
    """``F(u) + sum |u_i|^{p-} w_i``."""
    if p_minus is None:
        p_minus = phi.p_minus
    elif phi.growth is not None and abs(p_minus - phi.p_minus) > 1e-12 * phi.p_minus:
        raise ConfigError(f"p_minus {p_minus} does not match the integrand's {phi.p_minus}")
    fv = eval_F(grid, kernel, phi, u)
    local = lp_power(grid, u, p_minus)
    parts = {"F": float(fv), "Lp": local}
    if fv.infinite or not math.isfinite(local):
        return FunctionalValue.inf(**parts)
    return FunctionalValue(fv.value + local, False, parts)


def eval_F_power(grid, kernel, p, u):
    """``sum |u_i - u_j|^p a_ij w_i w_j``."""
    if not p >= 1:
        raise ConfigError(f"exponent must be >= 1, got {p}")
    _check_grid(grid, u)
    with np.errstate(over="ignore"):
        f = np.abs(pair_difference(u)) ** p
    return _quad_or_inf(grid, kernel, f)


def _pair_values(grid, U):
    if isinstance(U, PairFunction):
        _check_grid(grid, U)
        return U.values
    return np.asarray(U, dtype=np.float64)


def eval_H(grid, kernel, phi, U):
    """``sum phi(|U_ij|, x_i, x_j) a_ij w_i w_j`` for a pair function."""
    z = np.abs(_pair_values(grid, U))
    with np.errstate(over="ignore"):
        f = _phi_of(grid, phi, z)
    return _quad_or_inf(grid, kernel, f)


def conjugate_pairs(grid, phi, t):
    """``phi*(t_ij, x_i, x_j)`` on all pairs."""
    return conjugate_jet(pair_jet(grid, phi), np.abs(t))


def eval_H_star(grid, kernel, phi, W):
    """``sum phi*(|W_ij|, x_i, x_j) a_ij w_i w_j``."""
    t = np.abs(_pair_values(grid, W))
    return _quad_or_inf(grid, kernel, conjugate_pairs(grid, phi, t))


def prime_sign(grid, phi, w):
    """``phi'(|w_i - w_j|) sign(w_i - w_j)`` with 0 on coincidence pairs."""
    d = pair_difference(w)
    return prime_sign_pairs(grid, phi, d)


def prime_sign_pairs(grid, phi, d):
    z = np.abs(d)
    nz = z > 0
    d1 = pair_jet(grid, phi)(np.where(nz, z, 1.0), 1)[1]
    d1 = np.broadcast_to(d1, z.shape)
    return np.where(nz, d1 * np.sign(d), 0.0)


def eval_pairing_Phi(grid, kernel, phi, u, w):
    """``sum (u_i - u_j) phi'(|w_i - w_j|) sign(w_i - w_j) a_ij w_i w_j``.

    Linear in ``u``. Pairs with ``w_i = w_j`` contribute nothing.
    """
    _check_grid(grid, u, w)
    f = pair_difference(u) * prime_sign(grid, phi, w)
    return quadrature_double(grid, kernel, f)


def eval_ell(grid, kernel, phi, u, v):
    """First variation of ``F`` at ``u`` in direction ``v`` (kernel weight included)."""
    return eval_pairing_Phi(grid, kernel, phi, v, u)


def m_subspace_residual(grid, kernel, W):
    """``max_i |sum_j (W_ij a_ij - W_ji a_ji) w_j|``; zero on the subspace."""
    a = grid.kernel_matrix(kernel)
    Wa = _pair_values(grid, W) * a
    r = _backend.antisym_row_sums(Wa, grid.weights)
    return float(np.max(np.abs(r))) if r.size else 0.0


def pairing_with_kernel(grid, kernel, u, W):
    """``sum (u_i - u_j) W_ij a_ij w_i w_j``: the functional represented by ``W``."""
    _check_grid(grid, u)
    return quadrature_double(grid, kernel, pair_difference(u) * _pair_values(grid, W))


def as_function(grid, u):
    return u if isinstance(u, GridFunction) else GridFunction(grid, u)
