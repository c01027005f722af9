import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orlicz import _backend, _pure

try:
    from orlicz import _core
except ImportError:  # extension not built
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled extension not built")


def _data(n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)), rng.random((n, n)), rng.random(n)


def test_tree_sum_exact_cases():
    assert _pure.tree_sum(np.array([])) == 0.0
    assert _pure.tree_sum(np.array([1.0, 2.0, 3.0])) == 6.0
    # pairwise order: (1e16 + 1) + (-1e16 + 1) differs from left-to-right
    v = np.array([1e16, 1.0, -1e16, 1.0])
    assert _pure.tree_sum(v) == (1e16 + 1.0) + (-1e16 + 1.0)


@pytest.mark.parametrize("n", [1, 2, 3, 17, 64, 100])
def test_pure_row_sums_close_to_numpy(n):
    f, a, w = _data(n, n)
    ref = (f * a) @ w
    assert np.allclose(_pure.row_sums(f, a, w), ref, rtol=1e-12, atol=1e-12)
    anti = f @ w - f.T @ w
    assert np.allclose(_pure.antisym_row_sums(f, w), anti, rtol=1e-12, atol=1e-12)


@needs_core
@pytest.mark.parametrize("n", [1, 2, 3, 17, 64, 129, 300])
def test_compiled_matches_fallback_bitwise(n):
    f, a, w = _data(n, 100 + n)
    assert np.array_equal(_core.row_sums(f, a, w, 1), _pure.row_sums(f, a, w))
    assert np.array_equal(_core.antisym_row_sums(f, w, 1), _pure.antisym_row_sums(f, w))
    assert _core.tree_sum(w) == _pure.tree_sum(w)


@needs_core
@pytest.mark.parametrize("threads", [2, 3, 8])
def test_compiled_independent_of_threads(threads):
    f, a, w = _data(257, 7)
    assert np.array_equal(np.asarray(_core.row_sums(f, a, w, threads)),
                          np.asarray(_core.row_sums(f, a, w, 1)))
    assert np.array_equal(np.asarray(_core.antisym_row_sums(f, w, threads)),
                          np.asarray(_core.antisym_row_sums(f, w, 1)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_backend_dispatch_matches_fallback(n, seed):
    f, a, w = _data(n, seed)
    assert np.array_equal(_backend.row_sums(f, a, w), _pure.row_sums(f, a, w))
    assert np.array_equal(_backend.antisym_row_sums(f, w), _pure.antisym_row_sums(f, w))


def test_thread_setting_and_env(monkeypatch):
    saved = _backend.get_threads()
    try:
        _backend.set_threads(0)
        assert _backend.get_threads() == 1
        monkeypatch.setenv("ORLICZ_THREADS", "6")
        assert _backend.default_threads() == 6
        monkeypatch.setenv("ORLICZ_THREADS", "many")
        assert _backend.default_threads() == 1
    finally:
        _backend.set_threads(saved)


def test_backend_name():
    assert _backend.BACKEND in ("compiled", "pure")
