"""Gibbs-simplex geometry: Euclidean projection and nearest-vertex thresholding.

The Gibbs simplex is the set of length-K vectors with nonnegative entries
summing to one. Projection uses the sort-based O(K log K) algorithm
(descending sort, running-sum threshold).
"""

import numpy as np

__all__ = ["project_to_simplex", "project_rows", "nearest_vertex", "nearest_vertices"]


def _check_finite(a):
    if not np.all(np.isfinite(a)):
        raise ValueError("simplex operation received non-finite entries")


def project_to_simplex(v):
    """Euclidean projection of a length-K vector onto the Gibbs simplex.

    Returns argmin_{s in simplex} ||s - v||_2.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("expected a 1-D vector with at least one entry")
    return project_rows(v[None, :])[0]


def project_rows(V):
    """Project each row of an (n, K) array onto the Gibbs simplex."""
    V = np.asarray(V, dtype=float)
    _check_finite(V)
    n, k = V.shape
    # descending sort per row; threshold is the largest rho with
    # s[rho] - (cumsum(s)[rho] - 1)/(rho+1) > 0
    s = -np.sort(-V, axis=1)
    cssum = np.cumsum(s, axis=1)
    idx = np.arange(1, k + 1)
    cond = s - (cssum - 1.0) / idx > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = (cssum[np.arange(n), rho] - 1.0) / (rho + 1)
    out = np.maximum(V - theta[:, None], 0.0)
    return out


def nearest_vertex(v):
    """Index of the simplex vertex e_k closest to v (ties -> lowest index)."""
    v = np.asarray(v, dtype=float)
    _check_finite(v)
    return int(np.argmax(v))


def nearest_vertices(V):
    """Row-wise nearest simplex vertex indices for an (n, K) array."""
    V = np.asarray(V, dtype=float)
    _check_finite(V)
    return np.argmax(V, axis=1)
