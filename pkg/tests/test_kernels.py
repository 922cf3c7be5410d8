import os
import subprocess
import sys

import numpy as np
import pytest

from roipose import kernels
from roipose._backend import HAS_NUMBA


def test_min_distances_backends_agree(rng):
    a = rng.standard_normal((700, 3))
    b = rng.standard_normal((300, 3))
    ref = np.array([np.sqrt(((b - p) ** 2).sum(axis=1)).min() for p in a])
    np.testing.assert_allclose(kernels._min_distances_numpy(a, b), ref, rtol=1e-14)
    np.testing.assert_allclose(kernels._min_distances_numba(a, b), ref, rtol=1e-14)


def test_max_pairwise_backends_agree(rng):
    pts = rng.standard_normal((600, 3))
    ref = max(np.linalg.norm(p - q) for p in pts[:50] for q in pts)
    full = kernels._max_pairwise_distance_numpy(pts)
    assert full >= ref
    assert kernels._max_pairwise_distance_numba(pts) == pytest.approx(full, rel=1e-15)


def test_smooth_l1_terms_backends_agree(rng):
    e = rng.normal(0, 2, 1000)
    e[:3] = [1.0, -1.0, 0.0]
    v1, d1 = kernels._smooth_l1_terms_numpy(e)
    v2, d2 = kernels._smooth_l1_terms_numba(e)
    np.testing.assert_array_equal(v1, v2)
    np.testing.assert_array_equal(d1, d2)
    assert v1[0] == 0.5 and d1[1] == -1.0 and d1[2] == 0.0


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_env_flag_selects_backend(backend):
    env = dict(os.environ, ROIPOSE_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", "import roipose; print(roipose.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == (backend if HAS_NUMBA else "numpy")


def test_env_flag_rejects_unknown():
    env = dict(os.environ, ROIPOSE_BACKEND="cuda")
    proc = subprocess.run([sys.executable, "-c", "import roipose"], env=env, capture_output=True, text=True)
    assert proc.returncode != 0 and "ROIPOSE_BACKEND" in proc.stderr
