import numpy as np
import pytest

from roipose.errors import RangeError, ValidationError
from roipose.geometry import CameraIntrinsics, Pose, Quaternion, Rect2D, project_points
from roipose.roi import (
    NormalizedBox,
    NormalizedPose,
    apply_homography,
    build_virtual_camera,
    identity_area,
    infinite_homography,
    normalize_bbox,
    normalize_pose,
    recover_bbox,
    recover_pose,
    roi_axis,
    virtual_intrinsics,
)

CUBE = np.array([[x, y, z] for x in (-.5, .5) for y in (-.5, .5) for z in (-.5, .5)])


def centred_roi(k_c, w=100.0, h=60.0):
    return Rect2D(k_c.px - w / 2, k_c.py - h / 2, w, h)


def random_roi(rng):
    w, h = rng.uniform(10, 400, 2)
    return Rect2D(rng.uniform(-100, 600), rng.uniform(-100, 400), w, h)


def test_virtual_intrinsics(k_c):
    assert virtual_intrinsics(k_c, Rect2D(7, 9, 100, 50)) == CameraIntrinsics(5.0, 10.0, 0.5, 0.5)
    assert virtual_intrinsics(k_c, Rect2D(0, 0, 1, 1)) == CameraIntrinsics(500.0, 500.0, 0.5, 0.5)
    with pytest.raises(ValidationError):
        virtual_intrinsics(k_c, (0, 0, 0, 1))


def test_roi_maps_to_unit_square(k_c):
    roi = centred_roi(k_c)
    cam = build_virtual_camera(k_c, roi)
    H = infinite_homography(cam, k_c)
    corners = [(roi.x, roi.y), (roi.x + roi.w, roi.y + roi.h)]
    np.testing.assert_allclose(apply_homography(H, corners), [[0, 0], [1, 1]], atol=1e-12)


def test_roi_axis(k_c):
    np.testing.assert_array_equal(roi_axis(k_c, centred_roi(k_c)), [0, 0, 1])
    # centre (820, 240): back-projection (1, 0, 1)
    a = roi_axis(k_c, Rect2D(770, 215, 100, 50))
    np.testing.assert_allclose(a, [np.sqrt(0.5), 0, np.sqrt(0.5)], atol=1e-15)


def test_roi_axis_unit_norm(k_c, rng):
    for _ in range(200):
        a = roi_axis(k_c, random_roi(rng))
        assert abs(np.linalg.norm(a) - 1) < 1e-12 and a[2] > 0


def test_virtual_camera_centred_is_identity(k_c):
    cam = build_virtual_camera(k_c, centred_roi(k_c))
    assert np.array_equal(cam.r_roi, np.eye(3))
    H = infinite_homography(cam, k_c)
    np.testing.assert_allclose(H, cam.k_roi.matrix() @ k_c.inverse_matrix(), atol=1e-15)
    assert cam.k_roi.px == cam.k_roi.py == 0.5


def test_virtual_camera_aligns_axis(k_c, rng):
    for _ in range(1000):
        roi = random_roi(rng)
        cam = build_virtual_camera(k_c, roi)
        assert np.abs(cam.r_roi @ roi_axis(k_c, roi) - [0, 0, 1]).max() < 1e-10
        assert np.abs(cam.r_roi.T @ cam.r_roi - np.eye(3)).max() < 1e-10


def test_homography_anchor_and_ray_sampling(k_c, rng):
    for _ in range(200):
        roi = random_roi(rng)
        cam = build_virtual_camera(k_c, roi)
        H = infinite_homography(cam, k_c)
        assert np.abs(apply_homography(H, [roi.center])[0] - 0.5).max() < 1e-12
        # any point on the centre ray projects to a pixel mapped to the RoI centre
        ray = roi_axis(k_c, roi)
        pts = np.outer(rng.uniform(0.5, 50, 5), ray)
        uv = project_points(k_c, Pose.identity(), pts)
        assert np.abs(apply_homography(H, uv) - 0.5).max() < 1e-10


def test_normalize_bbox_cases():
    roi = Rect2D(0, 0, 100, 100)
    nb = normalize_bbox(roi, roi)
    assert nb == NormalizedBox(0.0, 0.0, 0.0, 0.0)
    nb = normalize_bbox(Rect2D(10, 20, 50, 100), roi)
    assert (nb.t_x, nb.t_y, nb.t_w, nb.t_h) == (0.1, 0.2, np.log(0.5), 0.0)
    with pytest.raises(ValidationError):
        normalize_bbox((0, 0, 0, 1), roi)


def test_bbox_round_trip(rng):
    for _ in range(1000):
        obj = random_roi(rng)
        roi = random_roi(rng)
        back = recover_bbox(normalize_bbox(obj, roi), roi)
        np.testing.assert_allclose(back.as_tuple(), obj.as_tuple(), rtol=1e-12, atol=1e-12)


def test_identity_area_unit_cube(k_c):
    # hand projection: near face at z = 0.5 spans +-0.5 / 0.5 * 500 = +-500 px
    assert identity_area(k_c, CUBE) == pytest.approx(1e6, rel=1e-14)
    k2 = CameraIntrinsics(1500.0, 1500.0, 10.0, 20.0)
    assert identity_area(k2, CUBE) == pytest.approx(9 * identity_area(k_c, CUBE), rel=1e-14)


def test_identity_area_flat_and_degenerate(k_c):
    flat = CUBE.copy()
    flat[:, 2] = 0.0
    assert identity_area(k_c, flat) == pytest.approx(500.0 ** 2, rel=1e-14)
    with pytest.raises(ValidationError):
        identity_area(k_c, np.zeros((8, 3)))


def random_pose(rng, k_c, roi):
    ray = roi_axis(k_c, roi)
    d = rng.uniform(0.1, 100)
    offset = rng.normal(0, 0.05, 3)
    t = ray / ray[2] * d + offset * d
    t[2] = d
    return Pose(Quaternion.from_array(rng.standard_normal(4)), t)


def test_centred_object_normalizes_to_origin(k_c, rng):
    m_I = identity_area(k_c, CUBE)
    for _ in range(200):
        roi = random_roi(rng)
        cam = build_virtual_camera(k_c, roi)
        ray = roi_axis(k_c, roi)
        pose = Pose(Quaternion.from_array(rng.standard_normal(4)), ray * rng.uniform(1, 20))
        npose = normalize_pose(pose, cam, m_I)
        assert abs(npose.x_obj) < 1e-10 and abs(npose.y_obj) < 1e-10


def test_depth_code_zero():
    k_c = CameraIntrinsics(500.0, 500.0, 320.0, 240.0)
    m_I = identity_area(k_c, CUBE)
    side = np.sqrt(m_I)
    cam = build_virtual_camera(k_c, Rect2D(320 - side / 2, 240 - side / 2, side, side))
    assert cam.m_roi == m_I
    npose = normalize_pose(Pose(Quaternion.identity(), (0, 0, 1)), cam, m_I)
    assert npose.d_obj == 0.0
    assert (npose.x_obj, npose.y_obj) == (0.0, 0.0)


def test_depth_monotone(k_c):
    cam = build_virtual_camera(k_c, Rect2D(400, 100, 80, 120))
    ray = roi_axis(k_c, cam.roi)
    codes = [normalize_pose(Pose(Quaternion.identity(), ray / ray[2] * d), cam, 1234.0).d_obj
             for d in np.linspace(0.1, 100, 100)]
    assert np.all(np.diff(codes) < 0)


def test_rotation_normalization_consistency(k_c, rng):
    m_I = identity_area(k_c, CUBE)
    for _ in range(200):
        roi = random_roi(rng)
        cam = build_virtual_camera(k_c, roi)
        pose = random_pose(rng, k_c, roi)
        npose = normalize_pose(pose, cam, m_I)
        assert np.abs(npose.q_obj.matrix() - cam.r_roi @ pose.R).max() < 1e-10


def test_round_trip(k_c, rng):
    m_I = identity_area(k_c, CUBE)
    for _ in range(2000):
        roi = random_roi(rng)
        cam = build_virtual_camera(k_c, roi)
        pose = random_pose(rng, k_c, roi)
        back = recover_pose(normalize_pose(pose, cam, m_I), cam, m_I)
        assert np.abs(back.R - pose.R).max() < 1e-9
        assert np.abs(back.t - pose.t).max() <= 1e-9 * np.linalg.norm(pose.t)


def test_recover_trivial(k_c):
    m_I = identity_area(k_c, CUBE)
    side = np.sqrt(m_I)
    cam = build_virtual_camera(k_c, Rect2D(320 - side / 2, 240 - side / 2, side, side))
    pose = recover_pose(NormalizedPose(Quaternion.identity(), 0.0, 0.0, 0.0), cam, m_I)
    np.testing.assert_allclose(pose.R, np.eye(3), atol=0)
    np.testing.assert_allclose(pose.t, [0, 0, 1], rtol=1e-15)


def test_errors(k_c):
    cam = build_virtual_camera(k_c, centred_roi(k_c))
    with pytest.raises(ValidationError):
        normalize_pose(Pose(Quaternion.identity(), (0, 0, -1)), cam, 100.0)
    with pytest.raises(RangeError):
        recover_pose(NormalizedPose(Quaternion.identity(), 0.0, 0.0, 1e4), cam, 100.0)
