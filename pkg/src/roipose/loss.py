"""Smooth-L1 loss on transformed model coordinates and a gradient-descent pose refiner."""
import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ProjectionError, ValidationError
from .geometry import (
    Pose,
    Quaternion,
    as_points,
    project_camera_points,
    quat_matrix_partials,
    quat_to_matrix,
    transform_points,
)


class LossMode(str, enum.Enum):
    COORDS3D = "coords3d"
    COORDS2D = "coords2d"


def smooth_l1(a, b):
    """Mean smooth-L1 kernel of ``a - b`` (quadratic below |e| = 1, linear above)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or a.size != b.size:
        raise ValidationError(f"smooth_l1 needs equal nonempty inputs, got sizes {a.size} and {b.size}")
    val, _ = kernels.smooth_l1_terms(a - b)
    return float(val.mean())


def _mode(mode):
    try:
        return LossMode(mode)
    except ValueError:
        raise ValidationError(f"unknown loss mode {mode!r}") from None


def target_coords(T, pts, mode, k=None):
    """Coordinates the loss compares: 3D transformed points or their 2D projections."""
    mode = _mode(mode)
    P = transform_points(T, pts)
    if mode is LossMode.COORDS3D:
        return P
    if k is None:
        raise ValidationError("coords2d mode requires camera intrinsics")
    return project_camera_points(k, P)


def loss_and_grad(u, t, pts, target, mode, k=None):
    """Loss at raw parameters (u, t) against fixed target coordinates.

    ``u`` is an unnormalized quaternion; normalization happens inside the
    chain rule, so the returned quaternion gradient is orthogonal to ``u``.
    Returns ``(loss, d_loss/d_u, d_loss/d_t)``.
    """
    u = np.asarray(u, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    nu = np.sqrt(u @ u)
    q = u / nu
    R = quat_to_matrix(q)
    P = pts @ R.T + t

    if mode is LossMode.COORDS3D:
        e = (P - target).ravel()
        val, der = kernels.smooth_l1_terms(e)
        G = (der / e.size).reshape(P.shape)
    else:
        uv = project_camera_points(k, P)
        e = (uv - target).ravel()
        val, der = kernels.smooth_l1_terms(e)
        D = (der / e.size).reshape(uv.shape)
        Z = P[:, 2]
        gx = D[:, 0] * k.fx / Z
        gy = D[:, 1] * k.fy / Z
        gz = -(gx * P[:, 0] + gy * P[:, 1]) / Z
        G = np.column_stack((gx, gy, gz))

    dR = G.T @ pts
    gq = np.einsum("kij,ij->k", quat_matrix_partials(q), dR)
    gu = (gq - (gq @ q) * q) / nu
    return float(val.mean()), gu, G.sum(axis=0)


def coord_loss(T_pred, T_label, pts, mode=LossMode.COORDS3D, k=None):
    mode = _mode(mode)
    pts = as_points(pts)
    if pts.shape[0] == 0:
        raise ValidationError("model point set is empty")
    return smooth_l1(target_coords(T_pred, pts, mode, k), target_coords(T_label, pts, mode, k))


def coord_loss_grad(T_pred, T_label, pts, mode=LossMode.COORDS3D, k=None):
    """Gradient of :func:`coord_loss` wrt the quaternion (4,) and translation (3,) of ``T_pred``."""
    mode = _mode(mode)
    pts = as_points(pts)
    target = target_coords(T_label, pts, mode, k)
    _, gq, gt = loss_and_grad(T_pred.rotation.as_array(), T_pred.t, pts, target, mode, k)
    return gq, gt


@dataclass(frozen=True)
class RefineConfig:
    max_iters: int = 500
    step0: float = 1e-2
    backtrack: float = 0.5
    grad_tol: float = 1e-10
    mode: LossMode = LossMode.COORDS3D
    max_backtracks: int = 60

    def __post_init__(self):
        object.__setattr__(self, "mode", _mode(self.mode))
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValidationError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.step0 > 0:
            raise ValidationError(f"step0 must be positive, got {self.step0}")
        if not 0 < self.backtrack < 1:
            raise ValidationError(f"backtrack factor must lie in (0, 1), got {self.backtrack}")
        if not self.grad_tol >= 0:
            raise ValidationError(f"grad_tol must be non-negative, got {self.grad_tol}")
        if self.max_backtracks < 1:
            raise ValidationError("max_backtracks must be positive")


@dataclass
class RefineReport:
    pose: Pose
    loss: float
    iterations: int
    trace: list = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""

    def to_dict(self):
        return {
            "pose": {"q": list(self.pose.rotation.as_array()), "t": list(self.pose.translation)},
            "loss": self.loss,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "trace": list(self.trace),
        }


# Armijo sufficient-decrease constant.
_ARMIJO = 1e-4


def refine_pose(T_init, T_label, pts, cfg=None, k=None):
    """Minimize :func:`coord_loss` over (q, t) by gradient descent with backtracking.

    Each iteration starts from the previous accepted step enlarged by
    ``1 / cfg.backtrack`` and shrinks it until the Armijo condition holds, so
    every accepted step strictly lowers the loss. Stops when the gradient norm
    drops to ``cfg.grad_tol`` (``converged``), after ``cfg.max_iters`` steps,
    or when no trial step decreases the loss.
    """
    cfg = cfg or RefineConfig()
    pts = as_points(pts)
    if cfg.mode is LossMode.COORDS2D and k is None:
        raise ValidationError("coords2d mode requires camera intrinsics")
    target = target_coords(T_label, pts, cfg.mode, k)

    u = T_init.rotation.as_array()
    t = T_init.t
    loss, gu, gt = loss_and_grad(u, t, pts, target, cfg.mode, k)
    trace = [loss]
    step = cfg.step0
    iters = 0
    reason = "max_iters"
    converged = False

    while True:
        g2 = gu @ gu + gt @ gt
        if np.sqrt(g2) <= cfg.grad_tol:
            converged, reason = True, "grad_tol"
            break
        if iters >= cfg.max_iters:
            break
        s = step
        for _ in range(cfg.max_backtracks):
            u_new = u - s * gu
            u_new /= np.sqrt(u_new @ u_new)
            t_new = t - s * gt
            try:
                new = loss_and_grad(u_new, t_new, pts, target, cfg.mode, k)
            except ProjectionError:
                new = None
            if new is not None and new[0] < loss - _ARMIJO * s * g2:
                break
            s *= cfg.backtrack
        else:
            reason = "no_descent"
            break
        u, t = u_new, t_new
        loss, gu, gt = new
        trace.append(loss)
        iters += 1
        step = s / cfg.backtrack

    pose = Pose(Quaternion.from_array(u), t)
    return RefineReport(pose, loss, iters, trace, converged, reason)
