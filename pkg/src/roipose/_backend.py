"""Kernel backend selection.

Hot loops are written once as plain Python/numpy-compatible loops and compiled
with numba when available. Setting ``ROIPOSE_BACKEND=numpy`` (or running without
numba installed) routes every kernel to its vectorized numpy fallback instead.
The choice affects speed only; results agree to floating-point rounding.
"""
import functools
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None

_requested = os.environ.get("ROIPOSE_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"ROIPOSE_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

HAS_NUMBA = numba is not None
BACKEND = "numba" if (_requested == "numba" and HAS_NUMBA) else "numpy"


def njit(fn=None, **kwargs):
    """``numba.njit`` with project defaults; identity decorator without numba."""
    if fn is None:
        return functools.partial(njit, **kwargs)
    if not HAS_NUMBA:
        return fn
    opts = dict(cache=True, nogil=True)
    opts.update(kwargs)
    return numba.njit(**opts)(fn)
