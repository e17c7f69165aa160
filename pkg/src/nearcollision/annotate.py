"""Scene logs -> labeled datasets.

Labeling follows the 10 Hz grid: a frame is a near-collision when at
least one pedestrian lies within the radius (inclusive, default 1 m) of
the platform origin.  The regression target for an end frame n scans
the next 60 labels; if the first positive is the T-th of them (1-based),
the time to near-collision is t = T/10 seconds, so t is always one of
{0.1, 0.2, ..., 6.0}.

Window samples reference their scene's frame stack rather than copying
pixels; horizontal flips are recorded as a flag and materialized lazily,
so augmentation doubles the sample list without doubling memory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .scenesim import SceneLog, load_scene

HORIZON_FRAMES = 60
DEFAULT_RADIUS = 1.0

MULTILABEL_BINS = ((0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, np.inf))

_MASK64 = (1 << 64) - 1


@dataclass
class FrameLabels:
    """Per-frame binary near-collision flags and nearest pedestrian range."""

    near_collision: np.ndarray   # (F,) bool
    nearest_range: np.ndarray    # (F,) float64, inf when the frame is empty

    def __len__(self) -> int:
        return len(self.near_collision)


def label_frames(scene: SceneLog, radius: float = DEFAULT_RADIUS) -> FrameLabels:
    """Nearest range and inclusive within-radius flag for every frame."""
    nearest = np.full(len(scene.frames), np.inf)
    for i, frame in enumerate(scene.frames):
        if frame.pedestrians:
            nearest[i] = min(
                float(np.linalg.norm(p.position)) for p in frame.pedestrians
            )
    return FrameLabels(near_collision=nearest <= radius, nearest_range=nearest)


def time_to_near_collision(labels: FrameLabels, n: int,
                           horizon: int = HORIZON_FRAMES) -> float | None:
    """t = T/10 where T indexes the first positive among labels n+1..n+horizon.

    Returns None when no positive lies within the (possibly truncated)
    horizon.
    """
    if not 0 <= n < len(labels):
        raise ConfigurationError(f"frame index {n} outside 0..{len(labels) - 1}")
    upper = min(n + horizon, len(labels) - 1)
    for m in range(n + 1, upper + 1):
        if labels.near_collision[m]:
            return (m - n) / 10.0
    return None


@dataclass
class WindowSample:
    """N consecutive frames (oldest first) plus targets.

    Frames are materialized on access from the owning scene's frame
    stack; `flipped` mirrors them about the vertical axis.  t_true is
    present only for regression-eligible windows; binary/multilabel
    targets only when a full 60-frame lookahead exists.
    """

    scene_id: int
    end_index: int
    n_frames: int
    flipped: bool = False
    t_true: float | None = None
    binary_target: bool | None = None
    multilabel_target: tuple[int, int, int, int] | None = None
    _stack: np.ndarray | None = field(default=None, repr=False)
    _frames: np.ndarray | None = field(default=None, repr=False)

    @property
    def frames(self) -> np.ndarray:
        if self._frames is not None:
            return self._frames
        if self._stack is None:
            raise ConfigurationError(
                f"sample {self.source} has no frame source attached")
        window = self._stack[self.end_index - self.n_frames + 1:self.end_index + 1]
        if self.flipped:
            window = window[:, :, ::-1]
        return np.ascontiguousarray(window)

    @property
    def source(self) -> tuple[int, int, bool]:
        return (self.scene_id, self.end_index, self.flipped)


def multilabel_bin(t: float | None) -> tuple[int, int, int, int]:
    """One-hot bin for {(0,1], (1,2], (2,3], (3,inf)}; None joins the last."""
    if t is None:
        return (0, 0, 0, 1)
    for k, (lo, hi) in enumerate(MULTILABEL_BINS):
        if lo < t <= hi:
            target = [0, 0, 0, 0]
            target[k] = 1
            return tuple(target)
    return (0, 0, 0, 1)


def extract_windows(scene: SceneLog, labels: FrameLabels,
                    n_frames: int) -> list[WindowSample]:
    """One WindowSample per end index that yields any target.

    Regression targets require a defined time to near-collision and an
    end frame that is not itself within the radius; classification
    targets require a full 60-frame lookahead.
    """
    if not 1 <= n_frames <= 9:
        raise ConfigurationError(f"n_frames must be in [1, 9], got {n_frames}")
    F = len(scene.frames)
    if F < n_frames:
        raise ConfigurationError(
            f"scene has {F} frames, fewer than n_frames={n_frames}")
    if len(labels) != F:
        raise ConfigurationError(
            f"labels cover {len(labels)} frames but scene has {F}")
    stack = scene.frame_stack()
    samples = []
    for n in range(n_frames - 1, F):
        ttc = time_to_near_collision(labels, n)
        regression = ttc is not None and not labels.near_collision[n]
        full_lookahead = n + HORIZON_FRAMES <= F - 1
        if not regression and not full_lookahead:
            continue
        binary = (ttc is not None and ttc <= 1.0) if full_lookahead else None
        multilabel = multilabel_bin(ttc) if full_lookahead else None
        samples.append(WindowSample(
            scene_id=scene.scene_id,
            end_index=n,
            n_frames=n_frames,
            t_true=ttc if regression else None,
            binary_target=binary,
            multilabel_target=multilabel,
            _stack=stack,
        ))
    return samples


def flip_augment(samples: list[WindowSample]) -> list[WindowSample]:
    """Original samples followed by horizontally mirrored copies.

    Targets are preserved bit-exactly; only the flipped flag (and the
    pixels it implies) changes, so applying the flip twice restores the
    original frames.
    """
    flipped = []
    for s in samples:
        frames = None
        if s._frames is not None:
            frames = np.ascontiguousarray(s._frames[:, :, ::-1])
        flipped.append(WindowSample(
            scene_id=s.scene_id,
            end_index=s.end_index,
            n_frames=s.n_frames,
            flipped=not s.flipped,
            t_true=s.t_true,
            binary_target=s.binary_target,
            multilabel_target=s.multilabel_target,
            _stack=s._stack,
            _frames=frames,
        ))
    return list(samples) + flipped


def weighted_sampler(samples: list[WindowSample], positive_weight: float = 0.6,
                     negative_weight: float = 0.4, seed: int = 0):
    """Infinite seeded stream drawing samples with class-weighted replacement.

    Each sample's draw probability is proportional to its class weight
    (positive_weight for binary_target true, negative_weight otherwise).
    """
    if positive_weight <= 0 or negative_weight <= 0:
        raise ConfigurationError("sampler weights must be positive")
    if not samples:
        raise ConfigurationError("cannot sample from an empty dataset")
    if any(s.binary_target is None for s in samples):
        raise ConfigurationError("weighted sampling requires binary targets")
    weights = np.array([
        positive_weight if s.binary_target else negative_weight for s in samples
    ])
    prob = weights / weights.sum()
    rng = np.random.default_rng(seed & _MASK64)

    def stream():
        while True:
            for idx in rng.choice(len(samples), size=512, p=prob):
                yield samples[idx]

    return stream()


@dataclass
class Dataset:
    """Window samples plus a train/test split keyed by scene id.

    regression_dropped counts windows with a full lookahead but no
    near-collision inside it: they carry classification targets only,
    never a clamped t_true, and the count keeps that choice auditable.
    """

    samples: list[WindowSample]
    train_ids: frozenset[int]
    test_ids: frozenset[int]
    n_frames: int
    augmented: bool = False
    regression_dropped: int = 0

    def __post_init__(self) -> None:
        overlap = self.train_ids & self.test_ids
        if overlap:
            raise ConfigurationError(
                f"scene ids in both splits: {sorted(overlap)}")

    def train_samples(self) -> list[WindowSample]:
        return [s for s in self.samples if s.scene_id in self.train_ids]

    def test_samples(self) -> list[WindowSample]:
        return [s for s in self.samples if s.scene_id in self.test_ids]


def build_dataset(scenes: list[SceneLog], n_frames: int, test_ids,
                  radius: float = DEFAULT_RADIUS,
                  augment: bool = False) -> Dataset:
    """Label and window every scene; optionally flip-augment the train split.

    Scenes whose id is in test_ids form the test split (never
    augmented); the rest are the train split.
    """
    test_ids = frozenset(test_ids)
    train_ids = frozenset(s.scene_id for s in scenes) - test_ids
    train, test = [], []
    dropped = 0
    for scene in scenes:
        labels = label_frames(scene, radius)
        windows = extract_windows(scene, labels, n_frames)
        dropped += sum(
            1 for n in range(n_frames - 1, len(labels) - HORIZON_FRAMES)
            if time_to_near_collision(labels, n) is None)
        (test if scene.scene_id in test_ids else train).extend(windows)
    if augment:
        train = flip_augment(train)
    return Dataset(samples=train + test, train_ids=train_ids,
                   test_ids=test_ids, n_frames=n_frames, augmented=augment,
                   regression_dropped=dropped)


# ---------------------------------------------------------------------------
# Manifest I/O


def save_dataset_manifest(dataset: Dataset, path: str,
                          scene_dirs: dict[int, str]) -> None:
    """JSON manifest: scene directories, split, N, augmentation flag, and
    per-sample index records; pixels stay in the scenes' frames.bin."""
    manifest = {
        "schema_version": 1,
        "scene_dirs": {str(sid): d for sid, d in sorted(scene_dirs.items())},
        "split": {
            "train": sorted(dataset.train_ids),
            "test": sorted(dataset.test_ids),
        },
        "n_frames": dataset.n_frames,
        "augmented": dataset.augmented,
        "regression_dropped": dataset.regression_dropped,
        "samples": [
            {
                "scene": s.scene_id,
                "end": s.end_index,
                "flipped": s.flipped,
                "t_true": s.t_true,
                "binary": s.binary_target,
                "multilabel": list(s.multilabel_target)
                if s.multilabel_target is not None else None,
            }
            for s in dataset.samples
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, separators=(",", ":"))


def load_dataset_manifest(path: str) -> Dataset:
    """Rebuild a Dataset from a manifest, loading the referenced scenes.

    Relative scene directories resolve against the manifest's location.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read manifest {path}: {exc}") from exc
    base = os.path.dirname(os.path.abspath(path))
    stacks: dict[int, np.ndarray] = {}
    for sid_str, scene_dir in manifest["scene_dirs"].items():
        if not os.path.isabs(scene_dir):
            scene_dir = os.path.join(base, scene_dir)
        stacks[int(sid_str)] = load_scene(scene_dir).frame_stack()
    samples = []
    for rec in manifest["samples"]:
        ml = rec["multilabel"]
        samples.append(WindowSample(
            scene_id=int(rec["scene"]),
            end_index=int(rec["end"]),
            n_frames=int(manifest["n_frames"]),
            flipped=bool(rec["flipped"]),
            t_true=rec["t_true"],
            binary_target=rec["binary"],
            multilabel_target=tuple(ml) if ml is not None else None,
            _stack=stacks[int(rec["scene"])],
        ))
    return Dataset(
        samples=samples,
        train_ids=frozenset(manifest["split"]["train"]),
        test_ids=frozenset(manifest["split"]["test"]),
        n_frames=int(manifest["n_frames"]),
        augmented=bool(manifest["augmented"]),
        regression_dropped=int(manifest.get("regression_dropped", 0)),
    )
