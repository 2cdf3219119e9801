"""Numeric kernels: compiled extension when available, pure Python otherwise.

The active backend is chosen once at import time.  Set ``PTGE_PURE_PYTHON=1``
to force the fallback (useful for the benchmark and for debugging).  Both
backends implement the same contract and return bitwise-identical results;
see ``benchmarks/bench_kernels.py`` for the speed comparison.

Kernel contract (all arrays C-contiguous):

- ``dot_norms(a, b)``: float32 vectors -> (dot, |a|^2, |b|^2) as floats.
- ``cosine_against_matrix(q, m)``: float32 query and (rows, d) matrix ->
  (dots, row_sq_norms, q_sq_norm).
- ``assign_to_centroids(x, c)``: float64 points and centroids ->
  (labels, min_sq_dists), ties to the lowest centroid index.

Accumulation is sequential left-to-right in float64 within each vector;
this fixed order is what makes parallel and sequential pipeline runs
produce identical scores.
"""

import importlib
import os

if os.environ.get("PTGE_PURE_PYTHON"):
    from ptge.kernels import _pure as _impl
else:
    try:
        from ptge.kernels import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        from ptge.kernels import _pure as _impl

BACKEND = _impl.BACKEND
dot_norms = _impl.dot_norms
cosine_against_matrix = _impl.cosine_against_matrix
assign_to_centroids = _impl.assign_to_centroids


def available_backends() -> dict:
    """Importable backend modules by name; used by tests and the benchmark."""
    backends = {"pure": importlib.import_module("ptge.kernels._pure")}
    try:
        backends["native"] = importlib.import_module("ptge.kernels._native")
    except ImportError:
        pass
    return backends
