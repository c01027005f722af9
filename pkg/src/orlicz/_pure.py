"""Numpy fallback for the pair-reduction kernels.

Every routine reproduces the exact floating-point operation order of the
compiled module, so both backends return bit-identical results.
"""
import numpy as np


def _tree_last_axis(buf):
    n = buf.shape[-1]
    p = 1
    while p < n:
        p <<= 1
    if p != n:
        pad = np.zeros(buf.shape[:-1] + (p - n,))
        buf = np.concatenate([buf, pad], axis=-1)
    while buf.shape[-1] > 1:
        buf = buf[..., 0::2] + buf[..., 1::2]
    return buf[..., 0]


def tree_sum(v):
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.shape[0] == 0:
        return 0.0
    return float(_tree_last_axis(v))


def row_sums(f, a, w, nthreads=1):
    f = np.asarray(f, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if f.shape != a.shape or w.shape[0] != f.shape[1]:
        raise ValueError("shape mismatch in row_sums")
    if f.size == 0:
        return np.zeros(f.shape[0])
    return _tree_last_axis((f * a) * w[None, :])


def antisym_row_sums(f, w, nthreads=1):
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if f.shape[0] != f.shape[1] or w.shape[0] != f.shape[0]:
        raise ValueError("shape mismatch in antisym_row_sums")
    if f.size == 0:
        return np.zeros(f.shape[0])
    return _tree_last_axis((f - f.T) * w[None, :])
