import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orlicz import errors
from orlicz.functionals import (
    FunctionalValue,
    eval_ell,
    eval_F,
    eval_F_power,
    eval_G,
    eval_H,
    eval_H_star,
    eval_pairing_Phi,
    lp_power,
    m_subspace_residual,
    pairing_with_kernel,
    prime_sign,
)
from orlicz.grid import GridFunction, PairFunction, build_grid, build_kernel
from orlicz.phi import Custom, build_phi, calibrate, power

from oracles import FAMILIES, SQUARE, brute_double, midpoint_nodes

N = 64
H = 1.0 / N
GRID = build_grid({"lo": [0.0], "hi": [1.0], "cells": [N]})
CONST = build_kernel({"kind": "constant", "c": 1.0})
SQ = build_phi(SQUARE)


def test_square_functional_of_identity():
    u = GRID.evaluate("x0")
    assert float(eval_F(GRID, CONST, SQ, u)) == pytest.approx(1 / 6 - H * H / 6, rel=1e-13)
    # continuum value 1/6
    assert abs(float(eval_F(GRID, CONST, SQ, u)) - 1 / 6) < 5e-5


def test_G_adds_local_term():
    u = GRID.evaluate("x0")
    gv = eval_G(GRID, CONST, SQ, 2.0, u)
    assert gv.value == pytest.approx((1 / 6 - H * H / 6) + (1 / 3 - H * H / 12), rel=1e-13)
    assert set(gv.breakdown) == {"F", "Lp"}
    with pytest.raises(errors.ConfigError):
        eval_G(GRID, CONST, SQ, 3.0, u)


def test_F_power_matches_brute_force():
    u = GRID.evaluate("sin(5*x0)")
    xs, ws = midpoint_nodes(0.0, 1.0, N)
    for p in (1.0, 1.5, 3.0):
        ref = brute_double(xs, ws, lambda a, b: abs(math.sin(5 * a) - math.sin(5 * b)) ** p)
        assert float(eval_F_power(GRID, CONST, p, u)) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(errors.ConfigError):
        eval_F_power(GRID, CONST, 0.5, u)


@pytest.mark.parametrize("name", list(FAMILIES))
def test_F_matches_brute_force(name):
    g = build_grid({"lo": [0.0], "hi": [1.0], "cells": [16]})
    k = build_kernel({"kind": "gaussian", "sigma": 0.5, "r0": 0.5})
    phi = build_phi(FAMILIES[name])
    u = g.evaluate("cos(3*x0)+x0")
    xs, ws = midpoint_nodes(0.0, 1.0, 16)

    def f(a, b):
        z = abs(math.cos(3 * a) + a - math.cos(3 * b) - b)
        if z == 0:
            return 0.0
        return float(phi.bind(np.array([a]), np.array([b]))(np.array([z]), 0)[0][0])

    ref = brute_double(xs, ws, f, lambda z: math.exp(-z * z / 0.5))
    assert float(eval_F(g, k, phi, u)) == pytest.approx(ref, rel=1e-12)


def test_constant_has_zero_F():
    u = GridFunction(GRID, np.full(N, 3.7))
    for e in FAMILIES.values():
        assert float(eval_F(GRID, CONST, build_phi(e), u)) == 0.0


def test_infinite_value_marker():
    phi = build_phi(Custom(lambda z, x, y: np.exp(z ** 2)), validate=False)
    g = build_grid({"lo": [0.0], "hi": [1.0], "cells": [8]})
    u = g.evaluate("100*x0")
    fv = eval_F(g, CONST, phi, u)
    assert fv.infinite and float(fv) == math.inf
    assert fv.as_dict()["value"] == "inf"
    assert FunctionalValue.inf().infinite


def test_H_of_difference_equals_F():
    u = GRID.evaluate("x0^2")
    phi = build_phi(FAMILIES["power_var"])
    U = PairFunction.difference(u)
    assert float(eval_H(GRID, CONST, phi, U)) == float(eval_F(GRID, CONST, phi, u))


def test_H_star_of_constant_for_square():
    # conjugate of z^2 is t^2/4; W = 1 on the unit square gives 1/4
    W = PairFunction(GRID, 1.0)
    assert float(eval_H_star(GRID, CONST, SQ, W)) == pytest.approx(0.25, rel=1e-9)


def test_pairing_with_itself_equals_p_times_F_for_powers():
    # z phi'(z) = p phi(z) for pure powers
    u = GRID.evaluate("sin(4*x0)")
    for p in (1.5, 2.0, 3.0):
        phi = build_phi(power(p))
        assert eval_pairing_Phi(GRID, CONST, phi, u, u) == pytest.approx(
            p * float(eval_F(GRID, CONST, phi, u)), rel=1e-12)


def test_square_pairing_identity():
    u = GRID.evaluate("x0")
    # 2 F(u) with F = 1/6 - h^2/6
    assert eval_pairing_Phi(GRID, CONST, SQ, u, u) == pytest.approx(2 * (1 / 6 - H * H / 6),
                                                                     rel=1e-12)


def test_prime_sign_antisymmetric_and_zero_on_ties():
    w = GridFunction(GRID, np.repeat([0.0, 1.0], N // 2))
    m = prime_sign(GRID, SQ, w)
    assert np.array_equal(m, -m.T)
    assert np.all(m[: N // 2, : N // 2] == 0)


def test_first_variation_matches_difference_quotient():
    phi = calibrate(build_phi(FAMILIES["sum_powers"]))
    u = GRID.evaluate("sin(3*x0)")
    v = GRID.evaluate("x0^2")
    t = 1e-6
    fd = (float(eval_F(GRID, CONST, phi, u + t * v))
          - float(eval_F(GRID, CONST, phi, u - t * v))) / (2 * t)
    assert eval_ell(GRID, CONST, phi, u, v) == pytest.approx(fd, rel=1e-7)


def test_m_subspace_residual():
    # antisymmetric W on an even kernel sums to zero row by row only if balanced;
    # W = 1 is symmetric so W a - W^T a^T = 0
    assert m_subspace_residual(GRID, CONST, PairFunction(GRID, 1.0)) == 0.0
    W = PairFunction(GRID, lambda x, y: x[..., 0] - y[..., 0])
    assert m_subspace_residual(GRID, CONST, W) > 0.5


def test_pairing_with_kernel_of_prime_sign():
    u = GRID.evaluate("cos(2*x0)")
    w = GRID.evaluate("x0^3")
    W = PairFunction(GRID, prime_sign(GRID, SQ, w))
    assert pairing_with_kernel(GRID, CONST, u, W) == pytest.approx(
        eval_pairing_Phi(GRID, CONST, SQ, u, w), rel=1e-14)


def test_grid_mismatch_rejected():
    other = build_grid({"lo": [0.0], "hi": [1.0], "cells": [N]})
    with pytest.raises(errors.ConfigError):
        eval_F(GRID, CONST, SQ, other.evaluate("x0"))


coeffs = st.lists(st.floats(-3, 3, allow_nan=False), min_size=4, max_size=4)


def _trig(c):
    x = GRID.nodes[:, 0]
    return GridFunction(GRID, sum(ck * np.sin((k + 1) * math.pi * x) for k, ck in enumerate(c)))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(list(FAMILIES)), coeffs, coeffs, st.floats(0.0, 1.0))
def test_F_is_convex(name, c1, c2, t):
    phi = build_phi(FAMILIES[name])
    u, v = _trig(c1), _trig(c2)
    F = lambda w: float(eval_F(GRID, CONST, phi, w))  # noqa: E731
    lhs = F(t * u + (1 - t) * v)
    assert lhs <= t * F(u) + (1 - t) * F(v) + 1e-10 * (1 + F(u) + F(v))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(list(FAMILIES)), coeffs, st.floats(-5, 5))
def test_F_invariant_under_constants_and_sign(name, c, shift):
    phi = build_phi(FAMILIES[name])
    u = _trig(c)
    base = float(eval_F(GRID, CONST, phi, u))
    assert float(eval_F(GRID, CONST, phi, u + shift)) == pytest.approx(base, rel=1e-9, abs=1e-14)
    # the integrand depends on |u_i - u_j|; -u swaps the pair order, kernel is even
    if name in ("sum_powers",):
        assert float(eval_F(GRID, CONST, phi, -u)) == pytest.approx(base, rel=1e-12, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(coeffs, coeffs, st.floats(-3, 3))
def test_pairing_linear_in_first_argument(c1, c2, s):
    phi = build_phi(FAMILIES["power_var"])
    u, v, w = _trig(c1), _trig(c2), GRID.evaluate("x0^2+sin(7*x0)")
    P = lambda z: eval_pairing_Phi(GRID, CONST, phi, z, w)  # noqa: E731
    scale = 1 + abs(P(u)) + abs(s * P(v))
    assert P(u + s * v) == pytest.approx(P(u) + s * P(v), abs=1e-11 * scale)


def test_lp_power_exact():
    u = GRID.evaluate("x0")
    assert lp_power(GRID, u, 2.0) == pytest.approx(1 / 3 - H * H / 12, rel=1e-13)
