# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled Gram / cross-kernel loops for the cross-norm Gaussian tensor kernel.

Component arrays are ``(n, r, sum(P_j))`` with mode ``j`` occupying columns
``offsets[j]:offsets[j+1]``; ``mask[i, k]`` is 1.0 for a real component and
0.0 for rank padding.  Each pair kernel sums the diagonal terms first, then
``T[a, b] + T[b, a]`` for ``a < b``, which makes ``K(x, y) == K(y, x)``
bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


cdef inline double _term(const double[:, :, ::1] A, Py_ssize_t i, Py_ssize_t k,
                         const double[:, :, ::1] B, Py_ssize_t m, Py_ssize_t l,
                         const Py_ssize_t[::1] offsets, const double[::1] inv2s2) noexcept nogil:
    cdef Py_ssize_t j, p
    cdef double e = 0.0
    cdef double s, diff
    for j in range(inv2s2.shape[0]):
        s = 0.0
        for p in range(offsets[j], offsets[j + 1]):
            diff = A[i, k, p] - B[m, l, p]
            s += diff * diff
        e += s * inv2s2[j]
    return exp(-e)


cdef inline double _pair(const double[:, :, ::1] A, const double[:, ::1] wa, Py_ssize_t i,
                         const double[:, :, ::1] B, const double[:, ::1] wb, Py_ssize_t m,
                         const Py_ssize_t[::1] offsets, const double[::1] inv2s2) noexcept nogil:
    cdef Py_ssize_t r = A.shape[1]
    cdef Py_ssize_t a, b
    cdef double total = 0.0
    cdef double t_ab, t_ba, w
    for a in range(r):
        w = wa[i, a] * wb[m, a]
        if w != 0.0:
            total += w * _term(A, i, a, B, m, a, offsets, inv2s2)
    for a in range(r):
        for b in range(a + 1, r):
            t_ab = 0.0
            t_ba = 0.0
            w = wa[i, a] * wb[m, b]
            if w != 0.0:
                t_ab = w * _term(A, i, a, B, m, b, offsets, inv2s2)
            w = wa[i, b] * wb[m, a]
            if w != 0.0:
                t_ba = w * _term(A, i, b, B, m, a, offsets, inv2s2)
            total += t_ab + t_ba
    return total


def gram(const double[:, :, ::1] comps, const double[:, ::1] mask,
         const Py_ssize_t[::1] offsets, const double[::1] inv2s2):
    cdef Py_ssize_t n = comps.shape[0]
    cdef Py_ssize_t i, m
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] K = out
    cdef double v
    with nogil:
        for i in range(n):
            for m in range(i + 1):
                v = _pair(comps, mask, i, comps, mask, m, offsets, inv2s2)
                K[i, m] = v
                K[m, i] = v
    return out


def cross(const double[:, :, ::1] a, const double[:, ::1] mask_a,
          const double[:, :, ::1] b, const double[:, ::1] mask_b,
          const Py_ssize_t[::1] offsets, const double[::1] inv2s2):
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t i, m
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] K = out
    with nogil:
        for i in range(na):
            for m in range(nb):
                K[i, m] = _pair(a, mask_a, i, b, mask_b, m, offsets, inv2s2)
    return out
