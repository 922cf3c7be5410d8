"""Rotations, rigid transforms, pinhole projection and 2D boxes.

Conventions: quaternions are (w, x, y, z) with w >= 0 after canonicalization,
rotation matrices act on column vectors, image coordinates are continuous
pixels with no half-pixel offset.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ProjectionError, SingularConfigurationError, ValidationError

QUAT_EPS = 1e-12
DEPTH_EPS = 1e-9
ANTIPODAL_EPS = 1e-9


def _canonical(q):
    # w >= 0; on w == 0 the first nonzero of (x, y, z) is made positive
    for c in q:
        if c != 0.0:
            return q if c > 0.0 else -q
    return q


def normalize_quat(q):
    """Unit-norm, canonically signed copy of a raw 4-vector."""
    q = np.asarray(q, dtype=np.float64).reshape(4)
    if not np.all(np.isfinite(q)):
        raise ValidationError(f"quaternion has non-finite entries: {q}")
    n = np.sqrt(q @ q)
    if n < QUAT_EPS:
        raise DegenerateInputError(f"quaternion norm {n!r} is below {QUAT_EPS}")
    return _canonical(q / n)


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        q = normalize_quat((self.w, self.x, self.y, self.z))
        for name, v in zip("wxyz", q):
            object.__setattr__(self, name, float(v))

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, q):
        return cls(*np.asarray(q, dtype=np.float64).reshape(4))

    @classmethod
    def from_matrix(cls, R):
        return cls.from_array(matrix_to_quat(R))

    @classmethod
    def from_axis_angle(cls, axis, angle):
        axis = np.asarray(axis, dtype=np.float64)
        n = np.linalg.norm(axis)
        if n < QUAT_EPS:
            raise DegenerateInputError("rotation axis has zero length")
        s = np.sin(0.5 * angle) / n
        return cls(np.cos(0.5 * angle), *(axis * s))

    def as_array(self):
        return np.array([self.w, self.x, self.y, self.z])

    def matrix(self):
        return quat_to_matrix(self.as_array())

    def __mul__(self, other):
        return Quaternion.from_array(quat_multiply(self.as_array(), other.as_array()))


def quat_multiply(a, b):
    """Hamilton product; ``quat_to_matrix(a * b) == quat_to_matrix(a) @ quat_to_matrix(b)``."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def _as_quat_array(q):
    if isinstance(q, Quaternion):
        return q.as_array()
    return np.asarray(q, dtype=np.float64).reshape(4)


def quat_to_matrix(q):
    """Rotation matrix of a quaternion (normalized internally).

    Only pairwise products of components enter the result, so ``q`` and ``-q``
    give bit-identical matrices.
    """
    q = _as_quat_array(q)
    if not np.all(np.isfinite(q)):
        raise ValidationError(f"quaternion has non-finite entries: {q}")
    n = np.sqrt(q @ q)
    if n < QUAT_EPS:
        raise DegenerateInputError(f"quaternion norm {n!r} is below {QUAT_EPS}")
    w, x, y, z = q / n
    return _quat_matrix_unit(w, x, y, z)


def _quat_matrix_unit(w, x, y, z):
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array([
        [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
    ])


def quat_matrix_partials(q):
    """Partial derivatives dR/dq_k of the unit-quaternion matrix formula, shape (4, 3, 3).

    ``q`` is treated as a free 4-vector in the polynomial; callers account for
    normalization separately.
    """
    w, x, y, z = q
    return 2.0 * np.array([
        [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]],
        [[0.0, y, z], [y, -2.0 * x, -w], [z, w, -2.0 * x]],
        [[-2.0 * y, x, w], [x, 0.0, z], [-w, z, -2.0 * y]],
        [[-2.0 * z, -w, x], [w, -2.0 * z, y], [x, y, 0.0]],
    ])


def check_rotation(R, tol=1e-8):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValidationError(f"expected a finite 3x3 matrix, got shape {R.shape}")
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > tol:
        raise ValidationError(f"matrix is not orthonormal (max |R^T R - I| = {err:.3g})")
    det = np.linalg.det(R)
    if abs(det - 1.0) > tol:
        raise ValidationError(f"matrix is a reflection or not a rotation (det = {det:.6g})")
    return R


def matrix_to_quat(R):
    """Canonical unit quaternion of a rotation matrix (Shepperd's branch selection)."""
    R = check_rotation(R)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    diag = (tr, R[0, 0], R[1, 1], R[2, 2])
    k = int(np.argmax(diag))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return normalize_quat(q)


def skew(v):
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rodrigues_between(a, b):
    """Rotation taking unit vector ``a`` onto unit vector ``b``.

    R = I + [v]x + [v]x^2 / (1 + a.b) with v = a x b. Antipodal pairs have no
    unique axis and raise :class:`SingularConfigurationError`.
    """
    a = np.asarray(a, dtype=np.float64).reshape(3)
    b = np.asarray(b, dtype=np.float64).reshape(3)
    for name, u in (("a", a), ("b", b)):
        if not np.all(np.isfinite(u)) or abs(np.sqrt(u @ u) - 1.0) > 1e-9:
            raise ValidationError(f"{name} must be a unit vector, got {u}")
    c = float(a @ b)
    if c <= -1.0 + ANTIPODAL_EPS:
        raise SingularConfigurationError(f"vectors are antipodal (a.b = {c!r}); rotation axis undefined")
    V = skew(np.cross(a, b))
    return np.eye(3) + V + (V @ V) / (1.0 + c)


@dataclass(frozen=True)
class Pose:
    """Rigid transform p -> R p + t with t = (x, y, d), d the depth along the optical axis."""

    rotation: Quaternion
    translation: tuple

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValidationError(f"translation has non-finite entries: {t}")
        object.__setattr__(self, "translation", tuple(float(v) for v in t))

    @classmethod
    def identity(cls):
        return cls(Quaternion.identity(), (0.0, 0.0, 0.0))

    @classmethod
    def from_rt(cls, R, t):
        return cls(Quaternion.from_matrix(R), t)

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=np.float64)
        return cls.from_rt(T[:3, :3], T[:3, 3])

    @property
    def R(self):
        return self.rotation.matrix()

    @property
    def t(self):
        return np.array(self.translation)

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.translation
        return T

    def compose(self, other):
        """``self ∘ other``: apply ``other`` first."""
        q = quat_multiply(self.rotation.as_array(), other.rotation.as_array())
        return Pose(Quaternion.from_array(q), self.R @ other.t + self.t)

    def inverse(self):
        Rt = self.R.T
        return Pose(Quaternion.from_matrix(Rt), -Rt @ self.t)


def as_points(pts, dim=3):
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim == 1 and pts.size == dim:
        pts = pts.reshape(1, dim)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise ValidationError(f"expected an (n, {dim}) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("point array has non-finite entries")
    return pts


def transform_points(T, pts):
    pts = as_points(pts)
    return pts @ T.R.T + T.t


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    px: float
    py: float

    def __post_init__(self):
        vals = (self.fx, self.fy, self.px, self.py)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError(f"intrinsics must be finite, got {vals}")
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        for name, v in zip(("fx", "fy", "px", "py"), vals):
            object.__setattr__(self, name, float(v))

    def matrix(self):
        return np.array([
            [self.fx, 0.0, self.px],
            [0.0, self.fy, self.py],
            [0.0, 0.0, 1.0],
        ])

    def inverse_matrix(self):
        return np.array([
            [1.0 / self.fx, 0.0, -self.px / self.fx],
            [0.0, 1.0 / self.fy, -self.py / self.fy],
            [0.0, 0.0, 1.0],
        ])


def project_camera_points(K, P):
    """Pinhole projection of camera-frame points (n, 3) -> pixels (n, 2)."""
    Z = P[:, 2]
    bad = np.flatnonzero(~(Z > DEPTH_EPS))
    if bad.size:
        raise ProjectionError(bad[0], Z[bad[0]])
    return np.column_stack((K.fx * P[:, 0] / Z + K.px, K.fy * P[:, 1] / Z + K.py))


def project_points(K, T, pts):
    return project_camera_points(K, transform_points(T, pts))


@dataclass(frozen=True)
class Rect2D:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError(f"rectangle must be finite, got {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"rectangle extent must be positive, got w={self.w}, h={self.h}")
        for name, v in zip("xywh", vals):
            object.__setattr__(self, name, float(v))

    @property
    def center(self):
        return (self.x + 0.5 * self.w, self.y + 0.5 * self.h)

    @property
    def area(self):
        return self.w * self.h

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)


def bbox2d_of(pts2d):
    pts2d = np.asarray(pts2d, dtype=np.float64)
    if pts2d.size == 0:
        raise ValidationError("cannot bound an empty point set")
    pts2d = as_points(pts2d, dim=2)
    lo = pts2d.min(axis=0)
    hi = pts2d.max(axis=0)
    w, h = hi - lo
    if not (w > 0 and h > 0):
        raise DegenerateInputError(f"point set has zero extent (w={w}, h={h})")
    return Rect2D(lo[0], lo[1], w, h)
