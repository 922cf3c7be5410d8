"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Each public kernel is bound at import time to ``_<name>_numba`` or
``_<name>_numpy`` according to :data:`roipose._backend.BACKEND`. Both variants
stay importable so tests and the benchmark can compare them directly.
"""
import numpy as np

from ._backend import BACKEND, njit

# Rows per block in the numpy fallbacks; bounds the (block, m, 3) temporaries.
_BLOCK = 256


@njit
def _min_distances_numba(a, b):
    # for each row of a (n, 3): distance to the nearest row of b (m, 3)
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty(n)
    for i in range(n):
        ax = a[i, 0]
        ay = a[i, 1]
        az = a[i, 2]
        best = np.inf
        for j in range(m):
            dx = ax - b[j, 0]
            dy = ay - b[j, 1]
            dz = az - b[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
        out[i] = np.sqrt(best)
    return out


def _min_distances_numpy(a, b):
    out = np.empty(a.shape[0])
    for start in range(0, a.shape[0], _BLOCK):
        diff = a[start:start + _BLOCK, None, :] - b[None, :, :]
        d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
        out[start:start + _BLOCK] = np.sqrt(d2.min(axis=1))
    return out


@njit
def _max_pairwise_distance_numba(pts):
    n = pts.shape[0]
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            dz = pts[i, 2] - pts[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 > best:
                best = d2
    return np.sqrt(best)


def _max_pairwise_distance_numpy(pts):
    best = 0.0
    for start in range(0, pts.shape[0], _BLOCK):
        diff = pts[start:start + _BLOCK, None, :] - pts[None, :, :]
        d2 = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
        best = max(best, float(d2.max()))
    return np.sqrt(best)


@njit
def _smooth_l1_terms_numba(e):
    n = e.shape[0]
    val = np.empty(n)
    der = np.empty(n)
    for k in range(n):
        x = e[k]
        ax = abs(x)
        if ax < 1.0:
            val[k] = 0.5 * x * x
            der[k] = x
        else:
            val[k] = ax - 0.5
            der[k] = 1.0 if x > 0 else -1.0
    return val, der


def _smooth_l1_terms_numpy(e):
    ae = np.abs(e)
    quad = ae < 1.0
    val = np.where(quad, 0.5 * e * e, ae - 0.5)
    der = np.where(quad, e, np.sign(e))
    return val, der


if BACKEND == "numba":
    min_distances = _min_distances_numba
    max_pairwise_distance = _max_pairwise_distance_numba
    smooth_l1_terms = _smooth_l1_terms_numba
else:
    min_distances = _min_distances_numpy
    max_pairwise_distance = _max_pairwise_distance_numpy
    smooth_l1_terms = _smooth_l1_terms_numpy
