"""Minimisation of ``E(u) = F(u) + ||u||_{p-}^{p-} - <g, u>`` and the dual representation.

The gradient is the exact gradient of the discrete energy. Descent runs in
the weighted inner product (direction ``-grad_i / w_i``) so the step size
does not scale with the mesh.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConfigError, LineSearchStalled, ZeroDenominator
from .functionals import (
    eval_F,
    eval_pairing_Phi,
    lp_power,
    prime_sign,
)
from .grid import GridFunction, PairFunction, integrate
from .norms import luxemburg

MAX_HALVINGS = 60


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 5000
    grad_tol: float = 1e-8
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0

    def __post_init__(self):
        if not 0 < self.armijo_c < 1:
            raise ConfigError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigError(f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}")
        if not self.initial_step > 0 or not self.grad_tol > 0 or self.max_iters < 0:
            raise ConfigError("initial_step and grad_tol must be positive, max_iters >= 0")

    @classmethod
    def from_json(cls, obj):
        obj = obj or {}
        known = {k: obj[k] for k in cls.__dataclass_fields__ if k in obj}
        return cls(**known)


@dataclass(frozen=True)
class SolveResult:
    u_star: GridFunction
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    history: tuple = field(default=(), repr=False)

    def as_dict(self):
        return {"energy": self.energy, "grad_norm": self.grad_norm,
                "iterations": self.iterations, "converged": self.converged,
                "initial_energy": self.history[0] if self.history else self.energy}


def _local_term_grad(u, p):
    v = u.values
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = p * np.sign(v) * np.abs(v) ** (p - 1.0)
    return np.where(v == 0, 0.0, out)


def energy(grid, kernel, phi, p_minus, u, g):
    """``F(u) + sum |u_i|^{p-} w_i - sum g_i u_i w_i``."""
    gv = 0.0 if g is None else integrate(grid, g.values * u.values)
    return float(eval_F(grid, kernel, phi, u)) + lp_power(grid, u, p_minus) - gv


def energy_gradient(grid, kernel, phi, p_minus, u, g):
    """Exact gradient of :func:`energy` with respect to the node values."""
    a = grid.kernel_matrix(kernel)
    m = prime_sign(grid, phi, u) * a
    nonlocal_part = _backend.antisym_row_sums(m, grid.weights)
    rest = _local_term_grad(u, p_minus)
    if g is not None:
        rest = rest - g.values
    return GridFunction(grid, grid.weights * (nonlocal_part + rest))


def el_residual(grid, kernel, phi, p_minus, u, g):
    """Pointwise residual of the Euler-Lagrange equation (max norm)."""
    grad = energy_gradient(grid, kernel, phi, p_minus, u, g)
    return float(np.max(np.abs(grad.values / grid.weights)))


def el_operator(grid, kernel, phi, p_minus, u):
    """Left-hand side of the Euler-Lagrange equation at ``u``; used to manufacture data."""
    grad = energy_gradient(grid, kernel, phi, p_minus, u, None)
    return GridFunction(grid, grad.values / grid.weights)


def minimize(grid, kernel, phi, p_minus, g, u0=None, opts=None):
    """Gradient descent with Armijo backtracking."""
    opts = opts or SolverOptions()
    u = u0 if u0 is not None else GridFunction(grid, np.zeros(grid.size))
    w = grid.weights
    e = energy(grid, kernel, phi, p_minus, u, g)
    history = [e]
    step = opts.initial_step
    it = 0
    while True:
        grad = energy_gradient(grid, kernel, phi, p_minus, u, g).values
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        if gnorm <= opts.grad_tol or it >= opts.max_iters:
            break
        d = -grad / w
        slope = float(np.dot(grad, d))
        s = step
        for _ in range(MAX_HALVINGS + 1):
            trial = u + s * d
            e_new = energy(grid, kernel, phi, p_minus, trial, g)
            if math.isfinite(e_new) and e_new <= e + opts.armijo_c * s * slope:
                break
            s *= opts.backtrack_factor
        else:
            raise LineSearchStalled(
                f"no sufficient decrease after {MAX_HALVINGS} reductions at iteration {it}, "
                f"gradient norm {gnorm:.3e}")
        u, e = trial, e_new
        history.append(e)
        step = min(2.0 * s, 1e6 * opts.initial_step)
        it += 1
    return SolveResult(u, e, gnorm, it, gnorm <= opts.grad_tol, tuple(history))


# ----------------------------------------------------------------------------
# dual functional


def _normalised(grid, kernel, phi, w):
    lam = luxemburg("F", grid, kernel, phi, w).value
    if lam == 0.0:
        raise ZeroDenominator("w is constant on the grid, its seminorm vanishes")
    w_hat = w / lam
    denom = eval_pairing_Phi(grid, kernel, phi, w_hat, w_hat)
    if not denom > 0:
        raise ZeroDenominator(f"pairing of w with itself is {denom!r}, expected > 0")
    return lam, w_hat, denom


def dual_apply(grid, kernel, phi, w, u):
    """The functional generated by ``w``, applied to ``u``."""
    lam, w_hat, denom = _normalised(grid, kernel, phi, w)
    return lam * eval_pairing_Phi(grid, kernel, phi, u, w_hat) / denom


def dual_kernel_representation(grid, kernel, phi, w):
    """Pair function ``W`` with ``dual_apply(w, u) = sum (u_i - u_j) W_ij a_ij w_i w_j``."""
    lam, w_hat, denom = _normalised(grid, kernel, phi, w)
    return PairFunction(grid, (lam / denom) * prime_sign(grid, phi, w_hat))
