"""Metrics and the experiment harness built on top of them.

Three experiment shapes: a temporal-window sweep that retrains the
multi-stream regressor for each history length N and reports the argmin,
a method-comparison table mixing regression and classification rows, and
an error-versus-horizon breakdown.  All tables serialize to CSV or
schema-versioned JSON through one ReportTable type.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    ConfigurationError,
    InsufficientHistoryError,
    ReportError,
    ShapeError,
    TrainingError,
)
from .scenesim import SceneLog, SimConfig, simulate_scene
from .annotate import DEFAULT_RADIUS, build_dataset
from .baselines import (
    DEFAULT_HORIZON_S,
    constant_baseline_fit,
    cv_predict,
    naive_vertical_classify,
    tracks_from_scene,
)
from .neural.network import (
    Hyperparams,
    Network,
    NetworkConfig,
    build_network,
    eligible_samples,
    predict_batch,
    targets_for,
    train,
)

N_INTERVAL_BINS = 6
SCHEMA_VERSION = 1
METHODS = ("constant", "cv", "naive", "multistream")
DEFAULT_SWEEP_RANGE = range(1, 10)

# Seeded benchmark: 250 default scenes, the last 50 held out, each cell
# trained on a 1800-window subset for 4 epochs (~300 SGD steps).  The
# schedule is sized so a full 9-N, 5-seed sweep fits a 1-core desk budget.
BENCHMARK_TRAIN_SCENES = 200
BENCHMARK_TEST_SCENES = 50
BENCHMARK_EPOCHS = 4
BENCHMARK_SAMPLE_CAP = 1800

_MASK64 = (1 << 64) - 1
_SS_SUBSET = 0
_SS_TRACK_NOISE = 1


# ---------------------------------------------------------------------------
# Metric types


@dataclass(frozen=True)
class RegressionMetrics:
    """Mean and population std of absolute error, in seconds."""

    mae: float
    std_abs_err: float
    n: int

    def __post_init__(self) -> None:
        if self.mae < 0 or self.std_abs_err < 0 or self.n < 0:
            raise ConfigurationError(
                f"regression metrics must be non-negative, got {self}")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ConfigurationError(
                f"confusion counts must be non-negative, got {self}")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @classmethod
    def from_predictions(cls, preds, truths) -> "ConfusionMatrix":
        preds = [bool(p) for p in preds]
        truths = [bool(t) for t in truths]
        if len(preds) != len(truths):
            raise ShapeError(
                f"{len(preds)} predictions vs {len(truths)} truths")
        pairs = list(zip(preds, truths))
        return cls(tp=sum(p and t for p, t in pairs),
                   fn=sum(not p and t for p, t in pairs),
                   fp=sum(p and not t for p, t in pairs),
                   tn=sum(not p and not t for p, t in pairs))


class ClassificationScores(NamedTuple):
    """Precision/recall/F1; a score is None where its denominator is 0."""

    precision: float | None
    recall: float | None
    f1: float | None


@dataclass(frozen=True)
class IntervalBin:
    """One ground-truth horizon bin; mae is None when the bin is empty."""

    label: str
    count: int
    mae: float | None


@dataclass(frozen=True)
class IntervalReport:
    bins: tuple[IntervalBin, ...]
    n: int

    def __post_init__(self) -> None:
        counted = sum(b.count for b in self.bins)
        if counted != self.n:
            raise ConfigurationError(
                f"bin counts sum to {counted}, expected n={self.n}")

    def to_table(self) -> "ReportTable":
        return ReportTable(
            schema="interval_report",
            columns=("interval", "count", "mae_s"),
            rows=tuple((b.label, b.count, b.mae) for b in self.bins))


# ---------------------------------------------------------------------------
# Metric computations


def _paired_errors(preds, truths) -> np.ndarray:
    preds = np.asarray(preds, dtype=float).ravel()
    truths = np.asarray(truths, dtype=float).ravel()
    if preds.shape != truths.shape:
        raise ShapeError(
            f"{preds.size} predictions vs {truths.size} truths")
    return np.abs(preds - truths)


def regression_metrics(preds, truths) -> RegressionMetrics:
    """MAE and the population standard deviation of the absolute errors."""
    errors = _paired_errors(preds, truths)
    if errors.size == 0:
        raise ConfigurationError("regression metrics need at least one pair")
    return RegressionMetrics(mae=float(errors.mean()),
                             std_abs_err=float(errors.std()),
                             n=int(errors.size))


def interval_report(preds, truths) -> IntervalReport:
    """Absolute error binned by ground truth into [k, k+1) for k = 0..5.

    The horizon value 6.0 joins the last bin; empty bins report count 0
    with mae None.
    """
    errors = _paired_errors(preds, truths)
    truths = np.asarray(truths, dtype=float).ravel()
    if truths.size and (truths.min() < 0.0 or truths.max() > 6.0):
        raise ConfigurationError(
            f"truth values must lie in [0, 6], got range "
            f"[{truths.min():g}, {truths.max():g}]")
    which = np.minimum(np.floor(truths).astype(int), N_INTERVAL_BINS - 1)
    bins = []
    for k in range(N_INTERVAL_BINS):
        mask = which == k
        count = int(mask.sum())
        mae = float(errors[mask].mean()) if count else None
        bins.append(IntervalBin(label=f"{k}-{k + 1}", count=count, mae=mae))
    return IntervalReport(bins=tuple(bins), n=int(truths.size))


def classification_metrics(cm: ConfusionMatrix) -> ClassificationScores:
    """Precision, recall, F1; zero-denominator scores are None, and a
    0-precision/0-recall pair yields F1 = 0 rather than 0/0."""
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return ClassificationScores(precision=precision, recall=recall, f1=f1)


# ---------------------------------------------------------------------------
# Report files


@dataclass(frozen=True)
class ReportTable:
    """A named table of typed cells (str, int, float, or None)."""

    schema: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows",
                           tuple(tuple(row) for row in self.rows))
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ShapeError(
                    f"row {row!r} has {len(row)} cells for "
                    f"{len(self.columns)} columns")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def emit_report(table: ReportTable, path: str, format: str = "csv") -> None:
    """Write the table as CSV (header + 6-decimal rows) or versioned JSON.

    Both encodings are byte-deterministic for equal tables.
    """
    if format not in ("csv", "json"):
        raise ConfigurationError(
            f"format must be 'csv' or 'json', got {format!r}")
    try:
        if format == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(table.columns)
                for row in table.rows:
                    writer.writerow([_csv_cell(v) for v in row])
        else:
            doc = {
                "schema": table.schema,
                "schema_version": SCHEMA_VERSION,
                "columns": list(table.columns),
                "rows": [list(row) for row in table.rows],
            }
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
                fh.write("\n")
    except OSError as exc:
        raise ReportError(f"cannot write report {path}: {exc}") from exc


def parse_report(path: str) -> ReportTable:
    """Read back a JSON report written by emit_report."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ReportError(f"report {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ReportError(f"report {path} is not a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ReportError(
            f"report {path} has schema_version {version!r}, "
            f"expected {SCHEMA_VERSION}")
    try:
        return ReportTable(schema=doc["schema"],
                           columns=tuple(doc["columns"]),
                           rows=tuple(tuple(row) for row in doc["rows"]))
    except (KeyError, TypeError, ShapeError) as exc:
        raise ReportError(f"report {path} is malformed: {exc}") from exc


# ---------------------------------------------------------------------------
# Benchmark harness


def generate_scenes(base_seed: int, count: int, **overrides) -> list[SceneLog]:
    """Simulate `count` scenes seeded base_seed, base_seed+1, ..."""
    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    return [simulate_scene(SimConfig(seed=base_seed + i, **overrides))
            for i in range(count)]


def holdout_split(scenes, test_fraction: float = 0.2) -> frozenset[int]:
    """Test scene ids: the last fraction of the id-sorted scene list."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(
            f"test_fraction must be in (0, 1), got {test_fraction}")
    ids = sorted(s.scene_id for s in scenes)
    if len(ids) < 2:
        raise ConfigurationError("a train/test split needs >= 2 scenes")
    n_test = min(max(int(round(len(ids) * test_fraction)), 1), len(ids) - 1)
    return frozenset(ids[-n_test:])


def pixel_stats(scenes, ids=None) -> tuple[float, float]:
    """Mean and std of every pixel in the selected scenes (all if ids is
    None); a constant image set falls back to std 1 so standardization
    stays well-defined."""
    count = 0
    total = 0.0
    total_sq = 0.0
    for scene in scenes:
        if ids is not None and scene.scene_id not in ids:
            continue
        x = scene.frame_stack().astype(np.float64)
        count += x.size
        total += float(x.sum())
        total_sq += float((x * x).sum())
    if count == 0:
        raise ConfigurationError("no scenes selected for pixel statistics")
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    std = float(np.sqrt(var))
    return mean, (std if std > 0.0 else 1.0)


@dataclass
class TrainResult:
    network: Network
    metrics: RegressionMetrics
    curve: tuple[float, ...]
    train_seconds: float
    n_train: int


def train_multistream(scenes, test_ids, n_frames: int, hyper: Hyperparams,
                      radius: float = DEFAULT_RADIUS, augment: bool = False,
                      max_train_samples: int | None = None) -> TrainResult:
    """One benchmark cell: window the scenes at history length n_frames,
    train a fresh seeded regressor on the train split, score the test split.

    Inputs are standardized by the train scenes' pixel statistics.  When
    the train split exceeds max_train_samples, a seeded subset keeps the
    cost of a cell independent of corpus size.
    """
    dataset = build_dataset(list(scenes), n_frames, test_ids,
                            radius=radius, augment=augment)
    train_samples = eligible_samples(dataset.train_samples(), "regression")
    test_samples = eligible_samples(dataset.test_samples(), "regression")
    if not train_samples or not test_samples:
        raise ConfigurationError(
            f"N={n_frames}: need regression-eligible samples in both splits, "
            f"got {len(train_samples)} train / {len(test_samples)} test")
    if max_train_samples is not None and len(train_samples) > max_train_samples:
        rng = np.random.default_rng(np.random.SeedSequence(
            [hyper.seed & _MASK64, _SS_SUBSET, n_frames]))
        keep = np.sort(rng.choice(len(train_samples), size=max_train_samples,
                                  replace=False))
        train_samples = [train_samples[i] for i in keep]
    mean, std = pixel_stats(scenes, ids=dataset.train_ids)
    height, width = scenes[0].config.image_size
    cfg = NetworkConfig(n_frames=n_frames, input_height=height,
                        input_width=width, input_mean=mean, input_std=std)
    net = build_network(cfg, seed=hyper.seed)
    start = time.perf_counter()
    net, curve = train(net, train_samples, hyper)
    train_seconds = time.perf_counter() - start
    preds = predict_batch(net, test_samples)
    metrics = regression_metrics(preds, targets_for(test_samples, "regression"))
    return TrainResult(network=net, metrics=metrics, curve=tuple(curve),
                       train_seconds=train_seconds, n_train=len(train_samples))


# ---------------------------------------------------------------------------
# Temporal-window sweep


@dataclass(frozen=True)
class SweepRow:
    n_frames: int
    metrics: RegressionMetrics
    train_seconds: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    best_n: int

    def row(self, n_frames: int) -> SweepRow:
        for row in self.rows:
            if row.n_frames == n_frames:
                return row
        raise ConfigurationError(f"sweep has no row for N={n_frames}")

    def to_table(self) -> ReportTable:
        return ReportTable(
            schema="temporal_window_sweep",
            columns=("n_frames", "mae_s", "std_s", "n_test", "train_seconds"),
            rows=tuple((r.n_frames, r.metrics.mae, r.metrics.std_abs_err,
                        r.metrics.n, r.train_seconds) for r in self.rows))


def sweep_temporal_windows(scenes, n_values=DEFAULT_SWEEP_RANGE,
                           hyper: Hyperparams | None = None,
                           test_ids=None, radius: float = DEFAULT_RADIUS,
                           augment: bool = False,
                           max_train_samples: int | None = None) -> SweepResult:
    """Retrain and score one fresh network per history length N.

    Every N shares the identical scene split (given test_ids, or the
    default holdout split); best_n is the lowest-MAE row, ties going to
    the shorter history.
    """
    n_list = [int(n) for n in n_values]
    if not n_list:
        raise ConfigurationError("n_values must name at least one N")
    if len(set(n_list)) != len(n_list):
        raise ConfigurationError(f"duplicate N in sweep: {n_list}")
    hyper = hyper if hyper is not None else Hyperparams()
    if test_ids is None:
        test_ids = holdout_split(scenes)
    rows = []
    for n in n_list:
        try:
            result = train_multistream(
                scenes, test_ids, n, hyper, radius=radius, augment=augment,
                max_train_samples=max_train_samples)
        except TrainingError as exc:
            raise TrainingError(f"sweep cell N={n}: {exc}") from exc
        rows.append(SweepRow(n_frames=n, metrics=result.metrics,
                             train_seconds=result.train_seconds))
    best = min(rows, key=lambda r: (r.metrics.mae, r.n_frames))
    return SweepResult(rows=tuple(rows), best_n=best.n_frames)


# ---------------------------------------------------------------------------
# Method comparison


@dataclass(frozen=True)
class MethodRow:
    """One comparison row; regression methods fill metrics, classification
    methods fill scores.  substituted counts no-collision predictions
    scored as the horizon value."""

    method: str
    metrics: RegressionMetrics | None = None
    scores: ClassificationScores | None = None
    n: int = 0
    substituted: int = 0


@dataclass(frozen=True)
class MethodComparison:
    rows: tuple[MethodRow, ...]

    def row(self, method: str) -> MethodRow:
        for row in self.rows:
            if row.method == method:
                return row
        raise ConfigurationError(f"comparison has no row for {method!r}")

    def to_table(self) -> ReportTable:
        out = []
        for r in self.rows:
            mae = r.metrics.mae if r.metrics else None
            std = r.metrics.std_abs_err if r.metrics else None
            f1 = r.scores.f1 if r.scores else None
            out.append((r.method, mae, std, r.n, f1, r.substituted))
        return ReportTable(
            schema="method_comparison",
            columns=("method", "mae_s", "std_s", "n", "f1", "substituted"),
            rows=tuple(out))


def _cv_rollout(by_id, samples, radius, horizon, noise_std, seed):
    """CV-baseline predictions for window samples; returns (preds,
    n_substituted).  Track noise draws from a per-window substream so the
    result is independent of sample order."""
    preds = np.empty(len(samples))
    substituted = 0
    for i, s in enumerate(samples):
        scene = by_id[s.scene_id]
        rng = None
        if noise_std > 0:
            rng = np.random.default_rng(np.random.SeedSequence(
                [seed & _MASK64, _SS_TRACK_NOISE, s.scene_id, s.end_index]))
        tracks = tracks_from_scene(scene, s.end_index,
                                   noise_std=noise_std, rng=rng)
        try:
            t = cv_predict(tracks, radius=radius, horizon=horizon).t
        except InsufficientHistoryError:
            t = None
        if t is None:
            t = horizon
            substituted += 1
        preds[i] = t
    return preds, substituted


def compare_methods(scenes, methods=METHODS, hyper: Hyperparams | None = None,
                    test_ids=None, n_frames: int = 6,
                    radius: float = DEFAULT_RADIUS,
                    horizon: float = DEFAULT_HORIZON_S,
                    noise_std: float = 0.0, augment: bool = False,
                    max_train_samples: int | None = None) -> MethodComparison:
    """Score every requested method on one shared test split.

    constant and multistream fit on the train split; cv reads ground-truth
    tracks (optionally noise-corrupted); naive classifies the end frame's
    boxes against the binary targets.
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigurationError(
            f"unknown methods {unknown}; choose from {METHODS}")
    if not methods:
        raise ConfigurationError("methods must name at least one method")
    hyper = hyper if hyper is not None else Hyperparams()
    if test_ids is None:
        test_ids = holdout_split(scenes)
    dataset = build_dataset(list(scenes), n_frames, test_ids, radius=radius)
    train_reg = eligible_samples(dataset.train_samples(), "regression")
    test_reg = eligible_samples(dataset.test_samples(), "regression")
    truths = targets_for(test_reg, "regression") if test_reg else np.zeros(0)
    by_id = {s.scene_id: s for s in scenes}
    rows = []
    for method in methods:
        if method in ("constant", "cv", "multistream") and not test_reg:
            raise ConfigurationError(
                f"{method}: no regression-eligible test samples")
        if method == "constant":
            if not train_reg:
                raise ConfigurationError(
                    "constant: no regression-eligible train samples")
            predictor = constant_baseline_fit(
                targets_for(train_reg, "regression"))
            preds = np.full(len(test_reg), predictor.mean)
            rows.append(MethodRow(
                method=method, metrics=regression_metrics(preds, truths),
                n=len(test_reg)))
        elif method == "cv":
            preds, substituted = _cv_rollout(
                by_id, test_reg, radius, horizon, noise_std, hyper.seed)
            rows.append(MethodRow(
                method=method, metrics=regression_metrics(preds, truths),
                n=len(test_reg), substituted=substituted))
        elif method == "naive":
            cls_samples = [s for s in dataset.test_samples()
                           if s.binary_target is not None]
            if not cls_samples:
                raise ConfigurationError(
                    "naive: no classification-eligible test samples")
            height = scenes[0].config.image_size[0]
            preds = []
            for s in cls_samples:
                boxes = [b for _, b in by_id[s.scene_id].frames[s.end_index].boxes]
                preds.append(naive_vertical_classify(boxes, height))
            cm = ConfusionMatrix.from_predictions(
                preds, [s.binary_target for s in cls_samples])
            rows.append(MethodRow(
                method=method, scores=classification_metrics(cm),
                n=len(cls_samples)))
        else:
            result = train_multistream(
                scenes, test_ids, n_frames, hyper, radius=radius,
                augment=augment, max_train_samples=max_train_samples)
            rows.append(MethodRow(
                method=method, metrics=result.metrics, n=result.metrics.n))
    return MethodComparison(rows=tuple(rows))
