"""Pure-Python kernel implementations.

Fallback used when the compiled extension is unavailable (or when
``PTGE_PURE_PYTHON`` is set).  Each function accumulates in 64-bit floats in
the same left-to-right order as the native kernels, so both backends return
bitwise-identical results; the native side is compiled with fp-contraction
disabled for the same reason.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"


def dot_norms(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
    """Single-pass dot product and squared norms of two float32 vectors.

    Returns (a.b, |a|^2, |b|^2) accumulated sequentially in float64.
    """
    av = a.tolist()
    bv = b.tolist()
    dot = 0.0
    sq_a = 0.0
    sq_b = 0.0
    for x, y in zip(av, bv):
        dot += x * y
        sq_a += x * x
        sq_b += y * y
    return dot, sq_a, sq_b


def cosine_against_matrix(
    q: np.ndarray, m: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Dot products and squared norms of a query against every matrix row.

    Returns (dots[rows], row_sq_norms[rows], q_sq_norm); same accumulation
    order as `dot_norms` applied row by row.
    """
    qv = q.tolist()
    rows = m.shape[0]
    dots = np.empty(rows, dtype=np.float64)
    row_sq = np.empty(rows, dtype=np.float64)
    q_sq = 0.0
    for x in qv:
        q_sq += x * x
    for r in range(rows):
        rv = m[r].tolist()
        dot = 0.0
        sq = 0.0
        for x, y in zip(qv, rv):
            dot += x * y
            sq += y * y
        dots[r] = dot
        row_sq[r] = sq
    return dots, row_sq, q_sq


def assign_to_centroids(
    x: np.ndarray, centroids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid assignment by squared Euclidean distance.

    Ties go to the lowest centroid index.  Returns (labels[n], min_sq[n]).
    """
    n = x.shape[0]
    k = centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    min_sq = np.empty(n, dtype=np.float64)
    xs = x.tolist()
    cs = centroids.tolist()
    for i in range(n):
        xi = xs[i]
        best = -1
        best_d = 0.0
        for j in range(k):
            cj = cs[j]
            d = 0.0
            for a, b in zip(xi, cj):
                diff = a - b
                d += diff * diff
            if best < 0 or d < best_d:
                best = j
                best_d = d
        labels[i] = best
        min_sq[i] = best_d
    return labels, min_sq
