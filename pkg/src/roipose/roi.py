"""Virtual RoI camera and RoI-relative pose normalization.

A proposal rectangle on the image defines a virtual pinhole camera sharing the
image camera's centre: its principal axis is the ray through the RoI centre and
its intrinsics scale the RoI to the unit square. Poses are normalized into that
view for regression and mapped back afterwards.

Conventions used throughout (see README for the derivation):

* ``r_roi`` rotates the RoI centre ray onto the optical axis (0, 0, 1);
* the image -> RoI homography is ``K_roi @ r_roi @ inv(K_c)``;
* normalized rotation is ``r_roi @ R``;
* translation (X, Y, d) is encoded as the rotated ray (X/d, Y/d, 1) rescaled to
  unit third component, plus the log-depth code ``log(m_roi / (m_I * d))``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, RangeError, ValidationError
from .geometry import (
    CameraIntrinsics,
    DEPTH_EPS,
    Pose,
    Quaternion,
    Rect2D,
    bbox2d_of,
    matrix_to_quat,
    project_points,
    quat_to_matrix,
    rodrigues_between,
)

OPTICAL_AXIS = np.array([0.0, 0.0, 1.0])
CANONICAL_POSE = Pose(Quaternion.identity(), (0.0, 0.0, 1.0))
MAX_LOG_DEPTH = 700.0


@dataclass(frozen=True)
class VirtualRoICamera:
    k_roi: CameraIntrinsics
    r_roi: np.ndarray
    roi: Rect2D

    @property
    def m_roi(self):
        return self.roi.area


@dataclass(frozen=True)
class NormalizedPose:
    q_obj: Quaternion
    x_obj: float
    y_obj: float
    d_obj: float

    def __post_init__(self):
        for name in ("x_obj", "y_obj", "d_obj"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ValidationError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    @property
    def t_obj(self):
        return np.array([self.x_obj, self.y_obj, self.d_obj])


@dataclass(frozen=True)
class NormalizedBox:
    t_x: float
    t_y: float
    t_w: float
    t_h: float


def _check_roi(roi):
    if not isinstance(roi, Rect2D):
        roi = Rect2D(*roi)
    return roi


def virtual_intrinsics(k_c, roi):
    roi = _check_roi(roi)
    return CameraIntrinsics(k_c.fx / roi.w, k_c.fy / roi.h, 0.5, 0.5)


def roi_axis(k_c, roi):
    """Unit viewing ray through the RoI centre, in image-camera coordinates."""
    roi = _check_roi(roi)
    cx, cy = roi.center
    ray = np.array([(cx - k_c.px) / k_c.fx, (cy - k_c.py) / k_c.fy, 1.0])
    return ray / np.sqrt(ray @ ray)


def build_virtual_camera(k_c, roi):
    roi = _check_roi(roi)
    r_roi = rodrigues_between(roi_axis(k_c, roi), OPTICAL_AXIS)
    return VirtualRoICamera(virtual_intrinsics(k_c, roi), r_roi, roi)


def infinite_homography(cam, k_c):
    """Image pixels -> normalized RoI coordinates, scaled so the RoI centre has w = 1."""
    H = cam.k_roi.matrix() @ cam.r_roi @ k_c.inverse_matrix()
    cx, cy = cam.roi.center
    return H / (H[2] @ np.array([cx, cy, 1.0]))


def apply_homography(H, pts2d):
    pts2d = np.atleast_2d(np.asarray(pts2d, dtype=np.float64))
    hom = np.column_stack((pts2d, np.ones(len(pts2d)))) @ H.T
    return hom[:, :2] / hom[:, 2:3]


def normalize_bbox(obj, roi):
    obj, roi = _check_roi(obj), _check_roi(roi)
    return NormalizedBox(
        (obj.x - roi.x) / roi.w,
        (obj.y - roi.y) / roi.h,
        np.log(obj.w / roi.w),
        np.log(obj.h / roi.h),
    )


def recover_bbox(nb, roi):
    roi = _check_roi(roi)
    return Rect2D(
        nb.t_x * roi.w + roi.x,
        nb.t_y * roi.h + roi.y,
        np.exp(nb.t_w) * roi.w,
        np.exp(nb.t_h) * roi.h,
    )


def identity_area(k_c, model_corners):
    """Area in pixels^2 of the 2D box of the model's 3D box at the canonical pose.

    The canonical pose places the model origin one unit in front of the camera
    with identity rotation.
    """
    corners = np.asarray(model_corners, dtype=np.float64)
    if corners.shape != (8, 3):
        raise ValidationError(f"expected 8 box corners, got shape {corners.shape}")
    box = bbox2d_of(project_points(k_c, CANONICAL_POSE, corners))
    return box.area


def normalize_pose(pose, cam, m_I):
    if not m_I > 0:
        raise ValidationError(f"identity area must be positive, got {m_I}")
    X, Y, d = pose.translation
    if not d > 0:
        raise ValidationError(f"pose depth must be positive, got d={d}")
    q_obj = Quaternion.from_array(matrix_to_quat(cam.r_roi @ pose.R))
    v = cam.r_roi @ np.array([X / d, Y / d, 1.0])
    if v[2] <= DEPTH_EPS:
        raise DegenerateInputError(f"object ray is behind the virtual camera (v_z={v[2]!r})")
    return NormalizedPose(q_obj, v[0] / v[2], v[1] / v[2], np.log(cam.m_roi / (m_I * d)))


def recover_pose(np_, cam, m_I):
    if not m_I > 0:
        raise ValidationError(f"identity area must be positive, got {m_I}")
    if abs(np_.d_obj) > MAX_LOG_DEPTH:
        raise RangeError(f"log-depth code {np_.d_obj!r} outside [-{MAX_LOG_DEPTH}, {MAX_LOG_DEPTH}]")
    Rt = cam.r_roi.T
    R = Rt @ quat_to_matrix(np_.q_obj.as_array())
    d = cam.m_roi / (m_I * np.exp(np_.d_obj))
    r = Rt @ np.array([np_.x_obj, np_.y_obj, 1.0])
    if r[2] <= DEPTH_EPS:
        raise DegenerateInputError(f"recovered ray is behind the image camera (r_z={r[2]!r})")
    return Pose.from_rt(R, (r[0] / r[2] * d, r[1] / r[2] * d, d))
