"""Select the compiled pair kernels, or the numpy fallback.

Set ``ORLICZ_PURE=1`` to force the fallback.
"""
import os

import numpy as np

from . import _pure

BACKEND = "pure"
_impl = _pure

if os.environ.get("ORLICZ_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # noqa: F811

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _pure


def default_threads():
    """Thread count from ``ORLICZ_THREADS``; 1 when unset."""
    try:
        return max(1, int(os.environ.get("ORLICZ_THREADS", "1")))
    except ValueError:
        return 1


_threads = default_threads()


def set_threads(n):
    global _threads
    _threads = max(1, int(n))


def get_threads():
    return _threads


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def tree_sum(v):
    return float(_impl.tree_sum(_c(v)))


def row_sums(f, a, w):
    return np.asarray(_impl.row_sums(_c(f), _c(a), _c(w), _threads))


def antisym_row_sums(f, w):
    return np.asarray(_impl.antisym_row_sums(_c(f), _c(w), _threads))
