"""Constant, tracking + linear, and naive vertical baselines."""

import numpy as np
import pytest

from helpers import straight_scene
from nearcollision.annotate import extract_windows, label_frames
from nearcollision.baselines import (
    constant_baseline_fit,
    cv_predict,
    fit_velocity,
    naive_vertical_classify,
    naive_vertical_multiclass,
    time_to_radius,
    tracks_from_scene,
)
from nearcollision.errors import FitError, InsufficientHistoryError
from nearcollision.geometry import BBox
from nearcollision.scenesim import SimConfig, simulate_scene


def make_track(p0, v, n=5, t_end=1.0):
    times = t_end - np.arange(n - 1, -1, -1) / 10.0
    return [(float(t), np.asarray(p0) + (t - t_end) * np.asarray(v))
            for t in times]


class TestConstantBaseline:
    def test_predicts_mean(self):
        pred = constant_baseline_fit([1.0, 2.0, 3.0])
        assert pred() == 2.0
        assert pred("anything") == 2.0

    def test_single_target(self):
        assert constant_baseline_fit([0.4])() == 0.4

    def test_empty_raises(self):
        with pytest.raises(FitError):
            constant_baseline_fit([])


class TestFitVelocity:
    def test_two_point_fit(self):
        p0, v = fit_velocity([(0.0, np.array([0.0, 4.0])),
                              (0.1, np.array([0.0, 3.9]))])
        assert v == pytest.approx([0.0, -1.0])
        assert p0 == pytest.approx([0.0, 3.9])

    def test_noiseless_track_exact(self):
        track = make_track((1.0, 3.0), (0.5, -1.2), n=10)
        p0, v = fit_velocity(track)
        assert np.allclose(v, [0.5, -1.2], atol=1e-12)
        assert np.allclose(p0, [1.0, 3.0], atol=1e-12)
        for t, pos in track:
            fitted = p0 + (t - track[-1][0]) * v
            assert np.all(np.abs(fitted - pos) < 1e-12)

    def test_noisy_fit_within_three_standard_errors(self):
        rng = np.random.default_rng(17)
        sigma, n = 0.01, 20
        times = np.arange(n) / 10.0
        se = sigma / np.sqrt(np.sum((times - times.mean()) ** 2))
        for _ in range(20):
            v_true = rng.uniform(-1.5, 1.5, size=2)
            p_start = rng.uniform(-3, 3, size=2)
            track = [
                (float(t), p_start + t * v_true + rng.normal(0, sigma, size=2))
                for t in times
            ]
            _, v = fit_velocity(track)
            assert np.all(np.abs(v - v_true) <= 3 * se)

    def test_insufficient_history(self):
        with pytest.raises(InsufficientHistoryError):
            fit_velocity([(0.0, np.zeros(2))])


class TestTimeToRadius:
    def test_head_on_analytic(self):
        assert time_to_radius((0.0, 3.0), (0.0, -1.0)) == pytest.approx(2.0)

    def test_static_outside(self):
        assert time_to_radius((2.0, 2.0), (0.0, 0.0)) is None

    def test_already_inside(self):
        assert time_to_radius((0.3, 0.4), (5.0, 5.0)) == 0.0

    def test_receding(self):
        assert time_to_radius((0.0, 3.0), (0.0, 1.0)) is None

    def test_beyond_horizon(self):
        assert time_to_radius((0.0, 8.0), (0.0, -1.0)) is None
        assert time_to_radius((0.0, 7.0), (0.0, -1.0)) == pytest.approx(6.0)

    def test_near_miss(self):
        # closest approach 1.2 m > radius
        assert time_to_radius((1.2, 5.0), (0.0, -1.0)) is None

    def test_matches_millisecond_scan(self):
        rng = np.random.default_rng(23)
        grid = np.arange(0.0, 6.0 + 1e-12, 0.001)
        for _ in range(1000):
            p0 = rng.uniform(-4, 4, size=2)
            v = rng.uniform(-2, 2, size=2)
            t = time_to_radius(p0, v)
            dist = np.linalg.norm(p0[None, :] + grid[:, None] * v[None, :], axis=1)
            inside = np.flatnonzero(dist <= 1.0)
            t_scan = grid[inside[0]] if inside.size else None
            assert (t is None) == (t_scan is None)
            if t is not None:
                assert abs(t - t_scan) <= 0.002

    def test_root_residual(self):
        rng = np.random.default_rng(29)
        for _ in range(300):
            p0 = rng.uniform(-4, 4, size=2)
            v = rng.uniform(-2, 2, size=2)
            t = time_to_radius(p0, v)
            if t is not None and t > 0:
                assert abs(np.linalg.norm(p0 + v * t) - 1.0) < 1e-9

    def test_rotation_invariant(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            p0 = rng.uniform(-4, 4, size=2)
            v = rng.uniform(-2, 2, size=2)
            theta = rng.uniform(0, 2 * np.pi)
            c, s = np.cos(theta), np.sin(theta)
            rot = np.array([[c, -s], [s, c]])
            t = time_to_radius(p0, v)
            t_rot = time_to_radius(rot @ p0, rot @ v)
            if t is None:
                assert t_rot is None
            else:
                assert t_rot == pytest.approx(t, abs=1e-9)


class TestCvPredict:
    def test_minimum_across_pedestrians(self):
        tracks = {
            0: make_track((0.0, 3.0), (0.0, -1.0)),   # crosses at 2.0 s
            1: make_track((0.0, 4.5), (0.0, -1.0)),   # crosses at 3.5 s
        }
        assert cv_predict(tracks).t == pytest.approx(2.0)

    def test_all_receding(self):
        tracks = {
            0: make_track((0.0, 3.0), (0.0, 1.0)),
            1: make_track((2.0, 2.0), (0.5, 0.5)),
        }
        assert cv_predict(tracks).t is None

    def test_short_tracks_skipped(self):
        tracks = {
            0: make_track((0.0, 3.0), (0.0, -1.0)),
            1: [(0.0, np.zeros(2))],
        }
        assert cv_predict(tracks).t == pytest.approx(2.0)

    def test_no_usable_tracks(self):
        with pytest.raises(InsufficientHistoryError):
            cv_predict({0: [(0.0, np.zeros(2))]})

    def test_noiseless_constant_velocity_scenes(self):
        errors = []
        for seed in (71, 72, 73):
            scene = simulate_scene(SimConfig(seed=seed, n_pedestrians=2))
            labels = label_frames(scene)
            for s in extract_windows(scene, labels, 6):
                if s.t_true is None:
                    continue
                tracks = tracks_from_scene(scene, s.end_index)
                pred = cv_predict(tracks)
                t_hat = pred.t if pred.t is not None else 6.0
                errors.append(abs(t_hat - s.t_true))
        assert len(errors) > 50
        assert np.mean(errors) < 0.1


class TestTracksFromScene:
    def test_history_length_and_spacing(self):
        scene = straight_scene((0.0, 5.0), (0.0, -1.0))
        tracks = tracks_from_scene(scene, 30, history_s=0.5)
        assert set(tracks) == {0}
        times = [t for t, _ in tracks[0]]
        assert len(times) == 5
        assert times[-1] == pytest.approx(3.0)
        assert np.allclose(np.diff(times), 0.1)

    def test_noise_injection_seeded(self):
        scene = straight_scene((0.0, 5.0), (0.0, -1.0))
        a = tracks_from_scene(scene, 30, noise_std=0.1,
                              rng=np.random.default_rng(5))
        b = tracks_from_scene(scene, 30, noise_std=0.1,
                              rng=np.random.default_rng(5))
        clean = tracks_from_scene(scene, 30)
        for (_, pa), (_, pb), (_, pc) in zip(a[0], b[0], clean[0]):
            assert np.array_equal(pa, pb)
            assert not np.array_equal(pa, pc)


def box_with_foot(v_max):
    return BBox(u_min=100, v_min=v_max - 200, u_max=200, v_max=v_max)


class TestNaiveVertical:
    def test_positive_below_line(self):
        assert naive_vertical_classify([box_with_foot(460)], 720) is True

    def test_negative_above_line(self):
        assert naive_vertical_classify([box_with_foot(450)], 720) is False

    def test_multiclass_bands(self):
        # thresholds at Y = 720: 450.0, 403.2, 374.4
        assert naive_vertical_multiclass([box_with_foot(460)], 720) == 1
        assert naive_vertical_multiclass([box_with_foot(410)], 720) == 2
        assert naive_vertical_multiclass([box_with_foot(400)], 720) == 3
        assert naive_vertical_multiclass([box_with_foot(370)], 720) == 4

    def test_no_boxes(self):
        assert naive_vertical_classify([], 720) is False
        assert naive_vertical_multiclass([], 720) == 4

    def test_monotone_in_foot_row(self):
        previous = False
        for v_max in range(300, 700, 10):
            flag = naive_vertical_classify([box_with_foot(v_max)], 720)
            assert flag >= previous
            previous = flag
