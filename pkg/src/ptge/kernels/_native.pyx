# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel implementations.

Mirrors ``_pure`` exactly: float64 accumulators, left-to-right order.  Built
with -ffp-contract=off so results are bitwise-identical to the fallback.
"""

import numpy as np

BACKEND = "native"


def dot_norms(const float[::1] a, const float[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double dot = 0.0, sq_a = 0.0, sq_b = 0.0
    cdef double x, y
    for i in range(n):
        x = <double> a[i]
        y = <double> b[i]
        dot += x * y
        sq_a += x * x
        sq_b += y * y
    return dot, sq_a, sq_b


def cosine_against_matrix(const float[::1] q, const float[:, ::1] m):
    cdef Py_ssize_t r, i
    cdef Py_ssize_t rows = m.shape[0], d = m.shape[1]
    cdef double q_sq = 0.0, dot, sq
    cdef double x, y
    dots_arr = np.empty(rows, dtype=np.float64)
    row_sq_arr = np.empty(rows, dtype=np.float64)
    cdef double[::1] dots = dots_arr
    cdef double[::1] row_sq = row_sq_arr
    for i in range(d):
        x = <double> q[i]
        q_sq += x * x
    for r in range(rows):
        dot = 0.0
        sq = 0.0
        for i in range(d):
            x = <double> q[i]
            y = <double> m[r, i]
            dot += x * y
            sq += y * y
        dots[r] = dot
        row_sq[r] = sq
    return dots_arr, row_sq_arr, q_sq


def assign_to_centroids(const double[:, ::1] x, const double[:, ::1] centroids):
    cdef Py_ssize_t i, j, c
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], k = centroids.shape[0]
    cdef double best_d, dist, diff
    cdef Py_ssize_t best
    labels_arr = np.empty(n, dtype=np.int64)
    min_sq_arr = np.empty(n, dtype=np.float64)
    cdef long long[::1] labels = labels_arr
    cdef double[::1] min_sq = min_sq_arr
    for i in range(n):
        best = -1
        best_d = 0.0
        for j in range(k):
            dist = 0.0
            for c in range(d):
                diff = x[i, c] - centroids[j, c]
                dist += diff * diff
            if best < 0 or dist < best_d:
                best = j
                best_d = dist
        labels[i] = best
        min_sq[i] = best_d
    return labels_arr, min_sq_arr
