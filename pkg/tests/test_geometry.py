"""Projection, range extraction, and calibration I/O."""

import json

import numpy as np
import pytest

from nearcollision.errors import ConfigurationError
from nearcollision.geometry import (
    BBox,
    CameraModel,
    PixelRange,
    Point3,
    bbox_median_range,
    camera_from_dict,
    camera_to_dict,
    load_camera,
    project_cloud,
    project_point,
)


def ident_cam(fx=100.0, fy=100.0, cx=32.0, cy=32.0, width=64, height=64):
    return CameraModel(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)


def random_rotation(rng):
    # Rodrigues formula from a random axis and angle
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    theta = rng.uniform(0, 2 * np.pi)
    kx, ky, kz = axis
    K = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    return np.eye(3) + np.sin(theta) * K + (1 - np.cos(theta)) * (K @ K)


def invert_projection(cam, U, V, w):
    # Independent inverse of the extrinsic map: q = R p - R^T t  =>
    # p = R^T (q + R^T t), with q recovered from the pinhole division.
    q = np.linalg.solve(cam.K, np.array([U * w, V * w, w]))
    return cam.R.T @ (q + cam.R.T @ cam.t)


class TestProjectPoint:
    def test_identity_extrinsics_arithmetic(self):
        pr = project_point(ident_cam(), Point3(0.1, 0.2, 2.0))
        assert pr is not None
        assert pr.U == pytest.approx(37.0, abs=1e-12)
        assert pr.V == pytest.approx(42.0, abs=1e-12)
        assert pr.w == pytest.approx(2.0, abs=1e-12)
        assert pr.range == pytest.approx(np.sqrt(4.05), abs=1e-12)

    def test_behind_camera_returns_none(self):
        assert project_point(ident_cam(), Point3(0.0, 0.0, -1.0)) is None

    def test_at_camera_plane_returns_none(self):
        assert project_point(ident_cam(), (0.3, 0.1, 0.0)) is None

    def test_optical_axis_under_random_rigid(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            cam = CameraModel(
                fx=80.0, fy=90.0, cx=31.0, cy=33.0, skew=0.5,
                width=64, height=64,
                R=random_rotation(rng), t=rng.uniform(-2, 2, size=3),
            )
            p = invert_projection(cam, cam.cx, cam.cy, 3.0)
            pr = project_point(cam, p)
            assert pr is not None
            assert pr.U == pytest.approx(cam.cx, abs=1e-8)
            assert pr.V == pytest.approx(cam.cy, abs=1e-8)
            assert pr.w == pytest.approx(3.0, abs=1e-9)

    def test_round_trip_recovers_point(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            cam = CameraModel(
                fx=rng.uniform(20, 200), fy=rng.uniform(20, 200),
                cx=32.0, cy=32.0, skew=rng.uniform(-1, 1),
                width=64, height=64,
                R=random_rotation(rng), t=rng.uniform(-3, 3, size=3),
            )
            p = invert_projection(
                cam, rng.uniform(-50, 110), rng.uniform(-50, 110),
                rng.uniform(0.2, 20.0),
            )
            pr = project_point(cam, p)
            assert pr is not None
            p_back = invert_projection(cam, pr.U, pr.V, pr.w)
            assert np.linalg.norm(p_back - p) <= 1e-9

    def test_u_strictly_increasing_in_x(self):
        cam = ident_cam()
        xs = np.linspace(-3.0, 3.0, 25)
        us = [project_point(cam, (x, 0.7, 4.0)).U for x in xs]
        assert np.all(np.diff(us) > 0)

    def test_range_is_full_norm_not_depth(self):
        pr = project_point(ident_cam(), (3.0, 0.0, 1.0))
        assert pr.range == pytest.approx(np.sqrt(10.0))
        assert pr.w == pytest.approx(1.0)
        assert pr.range > pr.w


class TestProjectCloud:
    def test_drops_behind_camera(self):
        cloud = [Point3(0.1, 0.2, 2.0), Point3(0.0, 0.0, -1.0)]
        out = project_cloud(ident_cam(), cloud)
        assert len(out) == 1
        assert out[0][0] == 0

    def test_empty_cloud(self):
        assert project_cloud(ident_cam(), []) == []

    def test_frustum_points_all_retained(self):
        rng = np.random.default_rng(7)
        cam = CameraModel(
            fx=100.0, fy=100.0, cx=32.0, cy=32.0, width=64, height=64,
            R=random_rotation(rng), t=rng.uniform(-1, 1, size=3),
        )
        pts = np.array([
            invert_projection(
                cam, rng.uniform(0.0, cam.width - 1e-6),
                rng.uniform(0.0, cam.height - 1e-6), rng.uniform(0.3, 15.0),
            )
            for _ in range(1000)
        ])
        assert len(project_cloud(cam, pts)) == 1000

    def test_matches_per_point_projection(self):
        rng = np.random.default_rng(13)
        cam = ident_cam()
        pts = rng.uniform(-4, 4, size=(500, 3))
        out = project_cloud(cam, pts)
        expected = []
        for i in range(len(pts)):
            pr = project_point(cam, pts[i])
            if pr is None:
                continue
            if 0 <= pr.U < cam.width and 0 <= pr.V < cam.height:
                expected.append((i, pr))
        assert [i for i, _ in out] == [i for i, _ in expected]
        for (_, a), (_, b) in zip(out, expected):
            assert a.U == pytest.approx(b.U, abs=1e-9)
            assert a.range == pytest.approx(b.range, abs=1e-9)


def fake_projected(ranges):
    return [
        (i, PixelRange(U=10.0 + i, V=10.0 + i, w=r, range=r))
        for i, r in enumerate(ranges)
    ]


class TestBboxMedianRange:
    BOX = BBox(u_min=0.0, v_min=0.0, u_max=60.0, v_max=60.0)

    def test_odd_count_median(self):
        assert bbox_median_range(fake_projected([2.0, 2.1, 5.0]), self.BOX) == 2.1

    def test_even_count_mean_of_middle(self):
        assert bbox_median_range(fake_projected([2.0, 4.0]), self.BOX) == 3.0

    def test_empty_returns_none(self):
        box = BBox(u_min=100.0, v_min=100.0, u_max=110.0, v_max=110.0)
        assert bbox_median_range(fake_projected([2.0, 4.0]), box) is None

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        ranges = list(rng.uniform(0.5, 9.0, size=12))
        ref = bbox_median_range(fake_projected(ranges), self.BOX)
        for _ in range(20):
            rng.shuffle(ranges)
            assert bbox_median_range(fake_projected(ranges), self.BOX) == ref

    def test_edges_inclusive(self):
        proj = [(0, PixelRange(U=60.0, V=60.0, w=2.0, range=2.0))]
        assert bbox_median_range(proj, self.BOX) == 2.0


class TestCameraValidation:
    def test_rejects_nonpositive_focal(self):
        with pytest.raises(ConfigurationError):
            CameraModel(fx=0.0, fy=100.0, cx=32.0, cy=32.0, width=64, height=64)

    def test_rejects_non_orthonormal(self):
        R = np.eye(3)
        R[0, 1] = 1e-6
        with pytest.raises(ConfigurationError):
            CameraModel(fx=100.0, fy=100.0, cx=32.0, cy=32.0,
                        width=64, height=64, R=R)

    def test_rejects_reflection(self):
        with pytest.raises(ConfigurationError):
            CameraModel(fx=100.0, fy=100.0, cx=32.0, cy=32.0,
                        width=64, height=64, R=np.diag([1.0, 1.0, -1.0]))

    def test_rejects_degenerate_bbox(self):
        with pytest.raises(ConfigurationError):
            BBox(u_min=5.0, v_min=0.0, u_max=5.0, v_max=10.0)


class TestCalibrationIO:
    def test_dict_round_trip(self):
        rng = np.random.default_rng(2)
        cam = CameraModel(
            fx=28.0, fy=28.0, cx=32.0, cy=32.0, skew=0.1,
            width=64, height=64, R=random_rotation(rng), t=np.array([0.1, -0.2, 0.3]),
        )
        back = camera_from_dict(camera_to_dict(cam))
        assert back.fx == cam.fx and back.skew == cam.skew
        assert np.array_equal(back.R, cam.R)
        assert np.array_equal(back.t, cam.t)

    def test_load_camera_file(self, tmp_path):
        cam = ident_cam()
        path = tmp_path / "cam.json"
        path.write_text(json.dumps(camera_to_dict(cam)))
        loaded = load_camera(path)
        assert (loaded.fx, loaded.fy, loaded.cx, loaded.cy) == (
            cam.fx, cam.fy, cam.cx, cam.cy)
        assert np.array_equal(loaded.R, cam.R)
        assert np.array_equal(loaded.t, cam.t)

    def test_load_rejects_bad_rotation(self, tmp_path):
        d = camera_to_dict(ident_cam())
        d["R"] = [1, 0.5, 0, 0, 1, 0, 0, 0, 1]
        path = tmp_path / "cam.json"
        path.write_text(json.dumps(d))
        with pytest.raises(ConfigurationError):
            load_camera(path)

    def test_load_rejects_missing_key(self, tmp_path):
        d = camera_to_dict(ident_cam())
        del d["fx"]
        path = tmp_path / "cam.json"
        path.write_text(json.dumps(d))
        with pytest.raises(ConfigurationError):
            load_camera(path)

    def test_load_rejects_invalid_json(self, tmp_path):
        path = tmp_path / "cam.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            load_camera(path)
