# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see _kernels_py for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


def dp_backward(const double[::1] weights, const cnp.intp_t[::1] offsets,
                const cnp.intp_t[::1] template_of, const cnp.intp_t[::1] template_start,
                const cnp.intp_t[::1] indptr, const cnp.intp_t[::1] indices):
    cdef Py_ssize_t L = offsets.shape[0] - 1
    cdef Py_ssize_t total = offsets[L]
    best_arr = np.empty(total, dtype=np.float64)
    nxt_arr = np.full(total, -1, dtype=np.intp)
    cdef double[::1] best = best_arr
    cdef cnp.intp_t[::1] nxt = nxt_arr
    cdef Py_ssize_t l, a, e, b, base, nbase, row, arg
    cdef double m, v
    with nogil:
        for a in range(offsets[L - 1], total):
            best[a] = weights[a]
        for l in range(L - 2, -1, -1):
            base = offsets[l]
            nbase = offsets[l + 1]
            row = template_start[template_of[l]]
            for a in range(offsets[l + 1] - base):
                m = -INFINITY
                arg = -1
                for e in range(indptr[row + a], indptr[row + a + 1]):
                    b = indices[e]
                    v = best[nbase + b]
                    if v > m:
                        m = v
                        arg = b
                if arg >= 0:
                    best[base + a] = weights[base + a] + m
                else:
                    best[base + a] = -INFINITY
                nxt[base + a] = arg
    return best_arr, nxt_arr


def max_pair_quotient(const double[:, :, ::1] values, const double[:, ::1] points,
                      const cnp.intp_t[::1] group, double min_dist):
    cdef Py_ssize_t T = values.shape[0], n = values.shape[1], N = values.shape[2]
    cdef Py_ssize_t d = points.shape[1]
    best_arr = np.zeros(T, dtype=np.float64)
    ia_arr = np.full(T, -1, dtype=np.intp)
    ib_arr = np.full(T, -1, dtype=np.intp)
    cdef double[::1] best = best_arr
    cdef cnp.intp_t[::1] ia = ia_arr
    cdef cnp.intp_t[::1] ib = ib_arr
    cdef Py_ssize_t k, a, b, c
    cdef double dx, dv, s, q
    with nogil:
        for k in range(T):
            for a in range(n):
                for b in range(a + 1, n):
                    if group[a] != group[b]:
                        continue
                    s = 0.0
                    for c in range(d):
                        dx = points[a, c] - points[b, c]
                        s = s + dx * dx
                    s = sqrt(s)
                    if s < min_dist:
                        continue
                    q = 0.0
                    for c in range(N):
                        dv = values[k, a, c] - values[k, b, c]
                        q = q + dv * dv
                    q = sqrt(q) / s
                    if q > best[k]:
                        best[k] = q
                        ia[k] = a
                        ib[k] = b
    return best_arr, ia_arr, ib_arr
