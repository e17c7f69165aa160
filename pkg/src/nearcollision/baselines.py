"""Non-learned predictors: constant mean, tracking + linear extrapolation,
and the naive vertical-coordinate classifier.

The tracking baseline consumes short ground-truth track histories
(optionally noise-corrupted), fits a per-axis least-squares velocity,
and solves the radius crossing in closed form.  TrackHistory maps
pedestrian id to ordered (timestamp, 2D position) pairs at 0.1 s
spacing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError, InsufficientHistoryError
from .scenesim import SceneLog

DEFAULT_RADIUS = 1.0
DEFAULT_HORIZON_S = 6.0
DEFAULT_HISTORY_S = 0.5

TrackHistory = dict[int, list[tuple[float, np.ndarray]]]


@dataclass(frozen=True)
class TtcPrediction:
    """Predicted seconds to radius crossing; t is None when no crossing
    is predicted within the horizon."""

    t: float | None


@dataclass(frozen=True)
class ConstantPredictor:
    """Predicts the training-target mean for every input."""

    mean: float

    def __call__(self, *_args) -> float:
        return self.mean


def constant_baseline_fit(train_targets) -> ConstantPredictor:
    targets = np.asarray(list(train_targets), dtype=float)
    if targets.size == 0:
        raise FitError("constant baseline needs a non-empty training set")
    return ConstantPredictor(mean=float(targets.mean()))


def fit_velocity(history: list[tuple[float, np.ndarray]]):
    """Per-axis OLS line of position against time.

    Returns (p0, v) with v the slope and p0 the fitted position at the
    latest timestamp.
    """
    if len(history) < 2:
        raise InsufficientHistoryError(
            f"velocity fit needs >= 2 points, got {len(history)}")
    times = np.array([t for t, _ in history], dtype=float)
    pos = np.array([p for _, p in history], dtype=float)
    t_mean = times.mean()
    dt = times - t_mean
    denom = float(dt @ dt)
    v = (dt @ (pos - pos.mean(axis=0))) / denom
    p0 = pos.mean(axis=0) + v * (times[-1] - t_mean)
    return p0, v


def time_to_radius(p0, v, radius: float = DEFAULT_RADIUS,
                   horizon: float = DEFAULT_HORIZON_S) -> float | None:
    """Smallest t in (0, horizon] with |p0 + v t| = radius; 0 if already
    inside; None when the path never enters the radius in time."""
    p0 = np.asarray(p0, dtype=float)
    v = np.asarray(v, dtype=float)
    if float(np.linalg.norm(p0)) <= radius:
        return 0.0
    a = float(v @ v)
    if a == 0.0:
        return None
    b = 2.0 * float(p0 @ v)
    c = float(p0 @ p0) - radius * radius
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return None
    sqrt_disc = np.sqrt(disc)
    for root in ((-b - sqrt_disc) / (2.0 * a), (-b + sqrt_disc) / (2.0 * a)):
        if 0.0 < root <= horizon:
            return float(root)
    return None


def cv_predict(tracks: TrackHistory, radius: float = DEFAULT_RADIUS,
               horizon: float = DEFAULT_HORIZON_S) -> TtcPrediction:
    """Minimum per-pedestrian radius-crossing time, or the no-collision
    marker when every fitted path stays outside."""
    usable = {pid: h for pid, h in tracks.items() if len(h) >= 2}
    if not usable:
        raise InsufficientHistoryError("no track with >= 2 points")
    times = []
    for history in usable.values():
        p0, v = fit_velocity(history)
        t = time_to_radius(p0, v, radius=radius, horizon=horizon)
        if t is not None:
            times.append(t)
    return TtcPrediction(t=min(times) if times else None)


def tracks_from_scene(scene: SceneLog, end_index: int,
                      history_s: float = DEFAULT_HISTORY_S,
                      noise_std: float = 0.0,
                      rng: np.random.Generator | None = None) -> TrackHistory:
    """Ground-truth track histories ending at end_index.

    history_s seconds at 10 Hz gives round(history_s * 10) points per
    pedestrian; optional i.i.d. Gaussian position noise models an
    imperfect tracker.
    """
    n_points = max(int(round(history_s * 10)), 2)
    start = max(end_index - n_points + 1, 0)
    if noise_std > 0 and rng is None:
        rng = np.random.default_rng(0)
    tracks: TrackHistory = {}
    for i in range(start, end_index + 1):
        frame = scene.frames[i]
        for ped in frame.pedestrians:
            pos = np.asarray(ped.position, dtype=float).copy()
            if noise_std > 0:
                pos += rng.normal(0.0, noise_std, size=2)
            tracks.setdefault(ped.id, []).append((frame.timestamp, pos))
    return tracks


def naive_vertical_classify(boxes, image_height: float,
                            fraction: float = 0.625) -> bool:
    """Positive iff any box's foot row lies below fraction * image height."""
    return any(box.v_max > fraction * image_height for box in boxes)


def naive_vertical_multiclass(boxes, image_height: float,
                              fractions=(0.625, 0.560, 0.520)) -> int:
    """Ordered-band classification on the lowest foot row.

    Returns class 1..3 for the first (nearest) threshold exceeded, or 4
    when no box reaches the 0.520 line (covering "after 3 s" and empty
    frames alike).
    """
    if not boxes:
        return 4
    foot = max(box.v_max for box in boxes)
    for k, fraction in enumerate(fractions, start=1):
        if foot > fraction * image_height:
            return k
    return 4
