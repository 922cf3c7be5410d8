"""Oracle suites run by ``roipose check`` and the acceptance tests.

Each check returns a :class:`CheckResult`; a suite passes when every result
does. ``inject_fault`` perturbs the quantity under test so the harness itself
can be shown to fail.
"""
from dataclasses import dataclass

import numpy as np

from .attention import (
    FeatureMap,
    NonLocalParams,
    nonlocal_bruteforce,
    nonlocal_forward,
    nonlocal_grad_check,
    relative_error,
)
from .geometry import CameraIntrinsics, Pose, Quaternion, Rect2D
from .loss import LossMode, loss_and_grad, target_coords
from .roi import apply_homography, build_virtual_camera, infinite_homography

CHANNELS = (1, 2, 4, 8)
SIDES = (1, 2, 3, 5)
FAULT = 1e-6


@dataclass
class CheckResult:
    name: str
    max_error: float
    tol: float

    @property
    def passed(self):
        return bool(self.max_error <= self.tol)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: max error {self.max_error:.3e} (tol {self.tol:.1e})"


def attention_suite(seed=1, seeds_per_shape=10, inject_fault=False):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for C in CHANNELS:
        for H in SIDES:
            for W in SIDES:
                for _ in range(seeds_per_shape):
                    x = FeatureMap(rng.standard_normal((C, H, W)))
                    p = NonLocalParams.random(C, rng)
                    fast = nonlocal_forward(x, p).data
                    if inject_fault:
                        fast = fast + FAULT
                    slow = nonlocal_bruteforce(x, p).data
                    worst = max(worst, float(np.abs(fast - slow).max()))
    results = [CheckResult("attention.bruteforce_equivalence", worst, 1e-10)]

    # uniform attention: zero query/key weights make every output position equal the mean of g
    uni = 0.0
    res = 0.0
    for C in CHANNELS:
        x = FeatureMap(rng.standard_normal((C, 3, 5)))
        p = NonLocalParams.random(C, rng)
        p = p.replace(w_theta=np.zeros_like(p.w_theta), w_phi=np.zeros_like(p.w_phi))
        X = x.data.reshape(C, -1)
        expect = p.w_z @ (p.w_g @ X).mean(axis=1, keepdims=True) + X
        z = nonlocal_forward(x, p).data.reshape(C, -1)
        uni = max(uni, float(np.abs(z - expect).max()))
        p0 = p.replace(w_z=np.zeros_like(p.w_z))
        z0 = nonlocal_forward(x, p0).data
        res = max(res, float(np.abs(z0 - x.data).max()))
    if inject_fault:
        res += FAULT
    results.append(CheckResult("attention.uniform_attention", uni, 1e-12))
    results.append(CheckResult("attention.residual_identity", res, 0.0))
    return results


def random_loss_instance(rng, mode, margin=1e-3):
    """(u, t, pts, target, k) for a gradient check, resampled until no residual is within ``margin`` of a kink."""
    k = CameraIntrinsics(5.0, 5.0, 0.5, 0.5)
    while True:
        pts = rng.uniform(-0.5, 0.5, size=(8, 3))
        q = Quaternion.from_array(rng.standard_normal(4))
        t = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(3.0, 6.0)])
        label = Pose(q, t)
        dq = Quaternion.from_axis_angle(rng.standard_normal(3), rng.uniform(0.05, 0.6))
        pred = Pose(dq * q, t + rng.normal(0.0, 0.3, size=3))
        target = target_coords(label, pts, mode, k)
        e = target_coords(pred, pts, mode, k) - target
        if np.all(np.abs(np.abs(e) - 1.0) > margin) and np.any(e != 0):
            return pred.rotation.as_array(), pred.t, pts, target, k


def loss_fd_error(u, t, pts, target, mode, k, step=1e-6):
    _, gu, gt = loss_and_grad(u, t, pts, target, mode, k)
    params = np.concatenate((u, t))
    num = np.empty(7)
    for i in range(7):
        pp = params.copy()
        pm = params.copy()
        pp[i] += step
        pm[i] -= step
        lp = loss_and_grad(pp[:4], pp[4:], pts, target, mode, k)[0]
        lm = loss_and_grad(pm[:4], pm[4:], pts, target, mode, k)[0]
        num[i] = (lp - lm) / (2 * step)
    return relative_error(np.concatenate((gu, gt)), num)


def gradient_suite(seed=1, instances=100, inject_fault=False):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        C = int(rng.choice((1, 2, 4)))
        H, W = (int(v) for v in rng.integers(1, 4, size=2))
        x = FeatureMap(rng.standard_normal((C, H, W)))
        p = NonLocalParams.random(C, rng)
        worst = max(worst, nonlocal_grad_check(x, p, step=1e-5))
    if inject_fault:
        worst += 1.0
    results = [CheckResult("gradients.nonlocal", worst, 1e-4)]
    for mode in LossMode:
        worst = 0.0
        for _ in range(instances):
            u, t, pts, target, k = random_loss_instance(rng, mode)
            worst = max(worst, loss_fd_error(u, t, pts, target, mode, k))
        results.append(CheckResult(f"gradients.coord_loss_{mode.value}", worst, 1e-4))
    return results


def random_roi(rng, width=640, height=480):
    w = rng.uniform(8.0, 0.8 * width)
    h = rng.uniform(8.0, 0.8 * height)
    return Rect2D(rng.uniform(-0.2 * width, width - 0.8 * w), rng.uniform(-0.2 * height, height - 0.8 * h), w, h)


def homography_suite(seed=1, rois=1000, inject_fault=False):
    rng = np.random.default_rng(seed)
    k_c = CameraIntrinsics(500.0, 500.0, 320.0, 240.0)
    worst = 0.0
    for _ in range(rois):
        roi = random_roi(rng)
        cam = build_virtual_camera(k_c, roi)
        H = infinite_homography(cam, k_c)
        mapped = apply_homography(H, [roi.center])[0]
        worst = max(worst, float(np.abs(mapped - 0.5).max()))
    if inject_fault:
        worst += FAULT
    centred = build_virtual_camera(k_c, Rect2D(320.0 - 50.0, 240.0 - 30.0, 100.0, 60.0))
    ident = float(np.abs(centred.r_roi - np.eye(3)).max())
    return [
        CheckResult("homography.center_anchor", worst, 1e-12),
        CheckResult("homography.principal_point_identity", ident, 0.0),
    ]


SUITES = {
    "attention": attention_suite,
    "gradients": gradient_suite,
    "homography": homography_suite,
}


def run_suite(name, seed=1, inject_fault=False):
    names = list(SUITES) if name == "all" else [name]
    results = []
    for n in names:
        results.extend(SUITES[n](seed=seed, inject_fault=inject_fault))
    return results
