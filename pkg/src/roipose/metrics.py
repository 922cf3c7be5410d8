"""ADD / ADD-S pose errors and threshold-accuracy curves."""
from dataclasses import dataclass
import itertools

import numpy as np

from . import kernels
from .errors import ValidationError
from .geometry import as_points, transform_points

DEFAULT_MAX_THRESHOLD = 0.1


@dataclass(frozen=True)
class ModelPoints:
    """Model-frame point set with its diameter (max pairwise distance)."""

    points: np.ndarray
    diameter: float

    def __post_init__(self):
        pts = as_points(self.points).copy()
        if pts.shape[0] == 0:
            raise ValidationError("model has no points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not self.diameter > 0:
            raise ValidationError(f"model diameter must be positive, got {self.diameter}")

    @classmethod
    def from_points(cls, pts):
        pts = as_points(pts)
        if pts.shape[0] == 0:
            raise ValidationError("model has no points")
        return cls(pts, float(kernels.max_pairwise_distance(np.ascontiguousarray(pts))))

    @property
    def bbox_corners(self):
        """8 corners of the axis-aligned extent, x-major order over (min, max)."""
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return np.array([[xs[0], ys[1], zs[2]]
                         for xs, ys, zs in itertools.product((lo, hi), repeat=3)])


def _points(m):
    return m.points if isinstance(m, ModelPoints) else as_points(m)


def add(T_est, T_gt, m):
    """Mean distance between corresponding model points under the two poses."""
    pts = _points(m)
    diff = transform_points(T_est, pts) - transform_points(T_gt, pts)
    return float(np.mean(np.sqrt(np.sum(diff * diff, axis=1))))


def add_s(T_est, T_gt, m):
    """Mean distance from each estimated point to the closest ground-truth point."""
    pts = _points(m)
    est = np.ascontiguousarray(transform_points(T_est, pts))
    gt = np.ascontiguousarray(transform_points(T_gt, pts))
    return float(np.mean(kernels.min_distances(est, gt)))


def _check_errors(errors, max_threshold):
    if not (np.isfinite(max_threshold) and max_threshold > 0):
        raise ValidationError(f"max_threshold must be positive, got {max_threshold}")
    e = np.asarray(errors, dtype=np.float64).ravel()
    if e.size == 0:
        raise ValidationError("error list is empty")
    if np.any(np.isnan(e)) or np.any(e < 0):
        raise ValidationError("errors must be non-negative numbers")
    return e


def auc_area(errors, max_threshold=DEFAULT_MAX_THRESHOLD):
    """Un-normalized area under accuracy(tau) on [0, max_threshold].

    accuracy(tau) is the fraction of errors <= tau, a right-continuous step
    function; integrating it between consecutive sorted errors gives the
    exact area.
    """
    e = np.sort(_check_errors(errors, max_threshold))
    n = e.size
    area = 0.0
    for i, ei in enumerate(e):
        if ei >= max_threshold:
            break
        right = e[i + 1] if i + 1 < n else max_threshold
        area += (i + 1) / n * (min(right, max_threshold) - ei)
    return float(area)


def auc_threshold(errors, max_threshold=DEFAULT_MAX_THRESHOLD):
    """Area under the accuracy-threshold curve, normalized to [0, 1]."""
    return float(min(1.0, max(0.0, auc_area(errors, max_threshold) / max_threshold)))


def accuracy_at(errors, threshold=DEFAULT_MAX_THRESHOLD):
    """Fraction of errors strictly below ``threshold``."""
    e = _check_errors(errors, threshold)
    return float(np.mean(e < threshold))
