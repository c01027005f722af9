# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pair-reduction kernels.

The summation order is fixed (padded binary tree, row by row) so that the
result is bit-identical to :mod:`orlicz._pure` and independent of the number
of threads used over rows.
"""
import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange, threadid
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef Py_ssize_t _pow2(Py_ssize_t n) nogil:
    cdef Py_ssize_t p = 1
    while p < n:
        p <<= 1
    return p


cdef double _tree(double* buf, Py_ssize_t p) noexcept nogil:
    # buf has length p (a power of two), zero padded; reduced in place
    cdef Py_ssize_t half, k
    half = p >> 1
    while half >= 1:
        for k in range(half):
            buf[k] = buf[2 * k] + buf[2 * k + 1]
        half >>= 1
    return buf[0]


def tree_sum(const double[::1] v):
    """Pairwise sum of a vector, padded to the next power of two."""
    cdef Py_ssize_t n = v.shape[0], p, k
    cdef double out
    cdef double* buf
    if n == 0:
        return 0.0
    p = _pow2(n)
    buf = <double*> malloc(p * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    for k in range(n):
        buf[k] = v[k]
    for k in range(n, p):
        buf[k] = 0.0
    out = _tree(buf, p)
    free(buf)
    return out


def row_sums(const double[:, ::1] f, const double[:, ::1] a,
             const double[::1] w, int nthreads=1):
    """Row reductions ``r_i = sum_j (f_ij * a_ij) * w_j``."""
    cdef Py_ssize_t n = f.shape[0], m = f.shape[1], p, i, j, k, tid
    cdef int nt = nthreads if nthreads > 0 else 1
    if a.shape[0] != n or a.shape[1] != m or w.shape[0] != m:
        raise ValueError("shape mismatch in row_sums")
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] r = out
    if m == 0 or n == 0:
        return out
    p = _pow2(m)
    cdef double* scratch = <double*> malloc(nt * p * sizeof(double))
    if scratch == NULL:
        raise MemoryError()
    cdef double* buf
    try:
        for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
            tid = threadid()
            buf = scratch + tid * p
            for j in range(m):
                buf[j] = (f[i, j] * a[i, j]) * w[j]
            for k in range(m, p):
                buf[k] = 0.0
            r[i] = _tree(buf, p)
    finally:
        free(scratch)
    return out


def antisym_row_sums(const double[:, ::1] f, const double[::1] w,
                     int nthreads=1):
    """Row reductions ``r_i = sum_j (f_ij - f_ji) * w_j`` for square ``f``."""
    cdef Py_ssize_t n = f.shape[0], p, i, j, k, tid
    cdef int nt = nthreads if nthreads > 0 else 1
    if f.shape[1] != n or w.shape[0] != n:
        raise ValueError("shape mismatch in antisym_row_sums")
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] r = out
    if n == 0:
        return out
    p = _pow2(n)
    cdef double* scratch = <double*> malloc(nt * p * sizeof(double))
    if scratch == NULL:
        raise MemoryError()
    cdef double* buf
    try:
        for i in prange(n, nogil=True, num_threads=nt, schedule="static"):
            tid = threadid()
            buf = scratch + tid * p
            for j in range(n):
                buf[j] = (f[i, j] - f[j, i]) * w[j]
            for k in range(n, p):
                buf[k] = 0.0
            r[i] = _tree(buf, p)
    finally:
        free(scratch)
    return out
