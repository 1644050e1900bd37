# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: fused Adam update and k-nearest row sums."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow
from libc.stdlib cimport malloc, free

cnp.import_array()


def adam_update(double[::1] theta, const double[::1] grad, double[::1] m,
                double[::1] v, double lr, double beta1, double beta2,
                double eps, long step):
    """In-place Adam step on flat buffers. ``step`` is 1-based."""
    cdef Py_ssize_t i, n = theta.shape[0]
    cdef double g, mhat, vhat
    cdef double c1 = 1.0 - pow(beta1, <double>step)
    cdef double c2 = 1.0 - pow(beta2, <double>step)
    if grad.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("buffer length mismatch")
    with nogil:
        for i in range(n):
            g = grad[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
            mhat = m[i] / c1
            vhat = v[i] / c2
            theta[i] -= lr * mhat / (sqrt(vhat) + eps)


cdef double _kth_smallest(double* a, Py_ssize_t n, Py_ssize_t k) noexcept nogil:
    # Hoare quickselect; leaves a[0:k+1] holding the k+1 smallest values.
    cdef Py_ssize_t lo = 0, hi = n - 1, i, j
    cdef double pivot, tmp
    while lo < hi:
        pivot = a[(lo + hi) >> 1]
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                tmp = a[i]; a[i] = a[j]; a[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    return a[k]


def knn_row_sums(const double[:, ::1] dist, Py_ssize_t k):
    """Sum of the ``k`` smallest off-diagonal entries of each row."""
    cdef Py_ssize_t n = dist.shape[0]
    cdef Py_ssize_t i, j, c
    cdef double total
    cdef double* buf
    if dist.shape[1] != n:
        raise ValueError("distance matrix must be square")
    if k < 1 or k > n - 1:
        raise ValueError("k must satisfy 1 <= k <= n-1")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    buf = <double*> malloc((n - 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                c = 0
                for j in range(n):
                    if j != i:
                        buf[c] = dist[i, j]
                        c += 1
                _kth_smallest(buf, n - 1, k - 1)
                total = 0.0
                for j in range(k):
                    total += buf[j]
                res[i] = total
    finally:
        free(buf)
    return out
