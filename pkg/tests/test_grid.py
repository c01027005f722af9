import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orlicz import errors
from orlicz.grid import (
    GridFunction,
    PairFunction,
    approximate,
    build_grid,
    build_kernel,
    integrate,
    mollify,
    quadrature_double,
    small_cutoff,
    support_truncate,
    value_truncate,
)

from oracles import brute_double, gaussian_c0, midpoint_nodes

UNIT = {"lo": [0.0], "hi": [1.0], "cells": [64]}
CONST = build_kernel({"kind": "constant", "c": 1.0})


def unit(n=64):
    return build_grid({"lo": [0.0], "hi": [1.0], "cells": [n]})


def test_nodes_and_weights_are_midpoints():
    g = build_grid({"lo": [0.0], "hi": [2.0], "cells": [4]})
    assert np.allclose(g.nodes[:, 0], [0.25, 0.75, 1.25, 1.75], rtol=0, atol=0)
    assert np.all(g.weights == 0.5)
    assert g.total_measure == 2.0


def test_two_dimensional_grid():
    g = build_grid({"lo": [0.0, 0.0], "hi": [1.0, 2.0], "cells": [4, 8]})
    assert g.size == 32 and g.dim == 2
    assert g.total_measure == pytest.approx(2.0, rel=1e-15)


def test_grid_rejects_bad_boxes():
    with pytest.raises(errors.ConfigError):
        build_grid({"lo": [1.0], "hi": [0.0], "cells": [8]})
    with pytest.raises(errors.ConfigError):
        build_grid({"lo": [0.0], "hi": [1.0], "cells": [1]})
    with pytest.raises(errors.ConfigError):
        build_grid({"boxes": [{"lo": [0.0], "hi": [1.0], "cells": [8]},
                              {"lo": [0.5], "hi": [2.0], "cells": [8]}]})
    with pytest.raises(errors.ConfigError):
        build_grid({"lo": [0.0], "hi": [1.0], "cells": [5000]})


def test_component_gap_against_kernel_radius():
    k = build_kernel({"kind": "constant", "c": 1.0, "r0": 0.2})
    two = {"boxes": [{"lo": [0.0], "hi": [1.0], "cells": [8]},
                     {"lo": [1.2], "hi": [2.0], "cells": [8]}]}
    assert build_grid(two, k).size == 16
    far = {"boxes": [{"lo": [0.0], "hi": [1.0], "cells": [8]},
                     {"lo": [1.5], "hi": [2.0], "cells": [8]}]}
    with pytest.raises(errors.ComponentGapTooLarge):
        build_grid(far, k)


def test_grid_is_immutable():
    g = unit(8)
    with pytest.raises(ValueError):
        g.weights[0] = 1.0


# --- kernels -----------------------------------------------------------------

def test_kernel_families():
    z = np.array([[0.0], [0.5], [2.0]])
    assert np.all(build_kernel({"kind": "constant", "c": 2.0})(z) == 2.0)
    ind = build_kernel({"kind": "indicator", "r": 1.0})
    assert list(ind(z)) == [1.0, 1.0, 0.0]
    gk = build_kernel({"kind": "gaussian", "sigma": 1.0, "r0": 1.0})
    assert gk.c0 == pytest.approx(gaussian_c0(1.0, 1.0), rel=1e-12)
    assert gk.c0 == pytest.approx(0.6065306597126334, rel=1e-12)
    ek = build_kernel({"kind": "exp", "lam": 2.0, "r0": 0.5})
    assert ek.c0 == pytest.approx(math.exp(-1.0), rel=1e-12)
    assert gk.is_even and ek.is_even


def test_expr_kernel_and_lower_bound():
    k = build_kernel({"kind": "expr", "expr": "1+z0^2", "r0": 1.0})
    assert k.c0 == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(errors.KernelLowerBoundViolated):
        build_kernel({"kind": "expr", "expr": "-1"})
    with pytest.raises(errors.KernelLowerBoundViolated):
        build_kernel({"kind": "constant", "c": 0.0})
    with pytest.raises(errors.ConfigError):
        build_kernel({"kind": "nope"})


def test_kernel_matrix_cached():
    g = unit(16)
    a = g.kernel_matrix(CONST)
    assert g.kernel_matrix(CONST) is a
    assert not a.flags.writeable


# --- quadrature --------------------------------------------------------------

def test_double_integral_of_square_difference():
    g = unit(64)
    val = quadrature_double(g, CONST, lambda x, y: (x[..., 0] - y[..., 0]) ** 2)
    # discrete variance identity: the midpoint sum equals 1/6 - h^2/6 exactly
    h = 1.0 / 64
    assert val == pytest.approx(1.0 / 6.0 - h * h / 6.0, rel=1e-13)
    xs, ws = midpoint_nodes(0.0, 1.0, 64)
    ref = brute_double(xs, ws, lambda a, b: (a - b) ** 2)
    assert val == pytest.approx(ref, rel=1e-13)


def test_double_integral_indicator_kernel_oracle():
    g = unit(64)
    k = build_kernel({"kind": "indicator", "r": 0.25})
    val = quadrature_double(g, k, np.ones((g.size, g.size)))
    xs, ws = midpoint_nodes(0.0, 1.0, 64)
    ref = brute_double(xs, ws, lambda a, b: 1.0, lambda z: 1.0 if abs(z) <= 0.25 else 0.0)
    assert val == pytest.approx(ref, rel=1e-13)
    # continuum value 2r - r^2 = 0.4375; boundary pairs at distance r cost O(h)
    assert abs(val - 0.4375) < 2.0 / 64


def test_gaussian_double_integral_oracle():
    g = unit(32)
    k = build_kernel({"kind": "gaussian", "sigma": 0.3, "r0": 0.3})
    f = lambda x, y: np.sin(3 * x[..., 0]) * np.cos(y[..., 0])  # noqa: E731
    val = quadrature_double(g, k, f)
    xs, ws = midpoint_nodes(0.0, 1.0, 32)
    ref = brute_double(xs, ws, lambda a, b: math.sin(3 * a) * math.cos(b),
                       lambda z: math.exp(-z * z / 0.18))
    assert val == pytest.approx(ref, rel=1e-12)


def test_non_finite_integrand_reports_index():
    g = unit(8)
    f = np.ones((8, 8))
    f[2, 5] = np.inf
    with pytest.raises(errors.NonFiniteIntegrand) as ei:
        quadrature_double(g, CONST, f)
    assert list(ei.value.index) == [2, 5]


def test_single_integral():
    g = unit(128)
    assert integrate(g, g.evaluate("x0").values) == pytest.approx(0.5, rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8), st.floats(-3, 3))
def test_quadrature_linear_and_symmetric(vals, c):
    g = unit(8)
    rng = np.random.default_rng(len(vals))
    f = rng.standard_normal((8, 8))
    h = np.asarray(vals)[:, None] * np.ones((1, 8))
    q = lambda arr: quadrature_double(g, CONST, arr)  # noqa: E731
    assert q(f + c * h) == pytest.approx(q(f) + c * q(h), abs=1e-12 * (1 + abs(c)) * 50)
    # even kernel: swapping the roles of x and y leaves the value unchanged
    assert q(f.T) == pytest.approx(q(f), abs=1e-13)


# --- grid and pair functions -------------------------------------------------

def test_grid_function_arithmetic_and_immutability():
    g = unit(8)
    u = g.evaluate("x0")
    v = 2 * u - 1.0
    assert np.allclose(v.values, 2 * g.nodes[:, 0] - 1)
    with pytest.raises(ValueError):
        u.values[0] = 3.0
    with pytest.raises(ValueError):
        GridFunction(g, np.ones(3))
    with pytest.raises(ValueError):
        GridFunction(g, np.full(8, np.nan))


def test_grid_function_csv_round_trip(tmp_path):
    g = build_grid({"lo": [0.0, 0.0], "hi": [1.0, 1.0], "cells": [4, 4]})
    u = g.evaluate("sin(x0)*exp(x1)")
    text = u.to_csv()
    assert text.splitlines()[0] == "x0,x1,value"
    back = GridFunction.from_csv(g, text)
    assert np.array_equal(back.values, u.values)
    p = tmp_path / "u.csv"
    u.to_csv(p)
    assert np.array_equal(GridFunction.from_csv(g, str(p)).values, u.values)
    with pytest.raises(errors.ConfigError):
        GridFunction.from_csv(unit(16), text)


def test_expression_grammar_functions():
    g = unit(4)
    u = g.evaluate("step(x0-0.5)*abs(x0-1)+sqrt(x0)")
    x = g.nodes[:, 0]
    assert np.allclose(u.values, (x >= 0.5) * abs(x - 1) + np.sqrt(x), rtol=1e-15)
    with pytest.raises(errors.ExpressionError):
        g.evaluate("__import__('os')")


def test_pair_function_difference_and_transpose():
    g = unit(4)
    u = g.evaluate("x0")
    U = PairFunction.difference(u)
    assert np.allclose(U.values, -U.T.values)
    W = PairFunction(g, lambda x, y: x[..., 0] * y[..., 0])
    assert W.values.shape == (4, 4)
    assert np.allclose((W + 1).values, W.values + 1)


# --- approximation chain -----------------------------------------------------

def test_truncations():
    g = unit(8)
    u = g.evaluate("10*x0-5")
    assert np.max(np.abs(value_truncate(u, 2).values)) == 2.0
    s = small_cutoff(u, 1.0).values
    assert np.all((s == 0) | (np.abs(s) >= 1.0))
    t = support_truncate(u, 0.25, center=[0.5]).values
    x = g.nodes[:, 0]
    assert np.all(t[np.abs(x - 0.5) > 0.25] == 0)
    assert np.array_equal(t[np.abs(x - 0.5) <= 0.25], u.values[np.abs(x - 0.5) <= 0.25])


def test_mollify_preserves_constants_exactly():
    g = unit(64)
    u = GridFunction(g, np.full(64, 0.3))
    assert np.array_equal(mollify(u, 0.1).values, u.values)


def test_mollify_smooths_and_checks_width():
    g = unit(128)
    u = g.evaluate("step(x0-0.5)")
    m = mollify(u, 0.05).values
    assert np.all(np.diff(m) >= -1e-15)
    assert 0.0 <= m.min() and m.max() <= 1.0
    with pytest.raises(errors.MollifierTooWide):
        mollify(u, 0.6)


def test_approximate_dispatch():
    g = unit(8)
    u = g.evaluate("x0")
    assert np.array_equal(approximate(u, "value_truncate", 0.5).values,
                          value_truncate(u, 0.5).values)
    with pytest.raises(errors.ConfigError):
        approximate(u, "blur", 1.0)
