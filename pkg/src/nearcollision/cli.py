"""Command-line entry point wiring the pipeline end to end.

Subcommands: simulate, annotate, baseline, train, predict, eval, sweep,
gradcheck.  Data artifacts go only to files under --out; progress and
summaries go to the error stream, so shell pipelines stay clean.  Exit
status: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import ConfigurationError, NearCollisionError, ShapeError
from .scenesim import SimConfig, load_scene, save_scene, simulate_scene
from .annotate import build_dataset, save_dataset_manifest
from .evaluation import (
    MethodComparison,
    MethodRow,
    ReportTable,
    compare_methods,
    emit_report,
    holdout_split,
    interval_report,
    regression_metrics,
    sweep_temporal_windows,
    train_multistream,
)
from .neural.network import (
    Hyperparams,
    NetworkConfig,
    eligible_samples,
    grad_check,
    load_network,
    predict_batch,
    save_network,
    targets_for,
)

log = logging.getLogger("nearcollision")

_VALIDATION_ERRORS = (ConfigurationError, ShapeError)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_frames_spec(text: str) -> list[int]:
    """'6' -> [6]; '1:9' -> [1..9] inclusive."""
    try:
        if ":" in text:
            lo_s, hi_s = text.split(":", 1)
            lo, hi = int(lo_s), int(hi_s)
        else:
            lo = hi = int(text)
    except ValueError:
        raise ConfigurationError(
            f"--frames expects N or LO:HI, got {text!r}") from None
    if not 1 <= lo <= hi <= 9:
        raise ConfigurationError(
            f"--frames range must satisfy 1 <= LO <= HI <= 9, got {text!r}")
    return list(range(lo, hi + 1))


def _scene_dirs(root: str) -> list[str]:
    """Scene directories under root, ordered by scene id."""
    try:
        names = os.listdir(root)
    except OSError as exc:
        raise ConfigurationError(f"cannot list {root}: {exc}") from exc
    found = []
    for name in names:
        path = os.path.join(root, name)
        if name.startswith("scene_") and os.path.isdir(path):
            try:
                found.append((int(name[len("scene_"):]), path))
            except ValueError:
                continue
    if not found:
        raise ConfigurationError(f"no scene_<id> directories under {root}")
    return [path for _, path in sorted(found)]


def _load_scenes(root: str):
    dirs = _scene_dirs(root)
    log.info("loading %d scenes from %s", len(dirs), root)
    return [load_scene(d) for d in dirs]


def _ensure_out(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _hyper(args, epochs=None) -> Hyperparams:
    return Hyperparams(batch_size=args.batch, learning_rate=args.lr,
                       epochs=args.epochs if epochs is None else epochs,
                       seed=args.seed, loss="regression")


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_simulate(args) -> int:
    out = _ensure_out(args)
    for i in range(args.scenes):
        cfg = SimConfig(seed=args.seed + i, n_pedestrians=args.pedestrians)
        path = save_scene(simulate_scene(cfg), out)
        if i == 0 or (i + 1) % 25 == 0 or i + 1 == args.scenes:
            log.info("scene %d/%d -> %s", i + 1, args.scenes, path)
    return 0


def cmd_annotate(args) -> int:
    out = _ensure_out(args)
    dirs = _scene_dirs(args.data)
    scenes = [load_scene(d) for d in dirs]
    dataset = build_dataset(scenes, args.frames, holdout_split(scenes),
                            radius=args.radius)
    scene_dirs = {s.scene_id: d for s, d in zip(scenes, dirs)}
    path = os.path.join(out, "dataset.json")
    save_dataset_manifest(dataset, path, scene_dirs)
    n_reg = len(eligible_samples(dataset.samples, "regression"))
    log.info("%d windows (%d with regression targets, %d dropped from "
             "regression as no-collision) -> %s",
             len(dataset.samples), n_reg, dataset.regression_dropped, path)
    return 0


def cmd_baseline(args) -> int:
    out = _ensure_out(args)
    scenes = _load_scenes(args.data)
    comparison = compare_methods(
        scenes, methods=("constant", "cv", "naive"),
        hyper=Hyperparams(seed=args.seed), n_frames=args.frames,
        radius=args.radius, horizon=args.horizon, noise_std=args.noise_std)
    path = os.path.join(out, f"baselines.{args.format}")
    emit_report(comparison.to_table(), path, format=args.format)
    for row in comparison.rows:
        if row.metrics is not None:
            log.info("%-9s MAE %.3f +- %.3f s (n=%d)", row.method,
                     row.metrics.mae, row.metrics.std_abs_err, row.n)
        else:
            f1 = row.scores.f1
            log.info("%-9s F1 %s (n=%d)", row.method,
                     "undefined" if f1 is None else f"{f1:.4f}", row.n)
    log.info("report -> %s", path)
    return 0


def cmd_train(args) -> int:
    out = _ensure_out(args)
    scenes = _load_scenes(args.data)
    result = train_multistream(scenes, holdout_split(scenes), args.frames,
                               _hyper(args), radius=args.radius,
                               augment=args.augment)
    model_path = os.path.join(out, "model.ckpt")
    save_network(result.network, model_path)
    curve_path = os.path.join(out, "train_curve.csv")
    curve = ReportTable(
        schema="train_curve", columns=("epoch", "loss"),
        rows=tuple((i + 1, v) for i, v in enumerate(result.curve)))
    emit_report(curve, curve_path, format="csv")
    log.info("trained on %d windows for %d epochs: test MAE %.3f +- %.3f s",
             result.n_train, args.epochs, result.metrics.mae,
             result.metrics.std_abs_err)
    log.info("checkpoint -> %s; loss curve -> %s", model_path, curve_path)
    return 0


def cmd_predict(args) -> int:
    out = _ensure_out(args)
    net = load_network(args.model)
    scenes = _load_scenes(args.data)
    dataset = build_dataset(scenes, net.config.n_frames, frozenset(),
                            radius=args.radius)
    samples = eligible_samples(dataset.samples, "regression")
    preds = predict_batch(net, samples)
    table = ReportTable(
        schema="predictions",
        columns=("scene_id", "end_index", "t_pred_s", "t_true_s"),
        rows=tuple((s.scene_id, s.end_index, float(p), s.t_true)
                   for s, p in zip(samples, preds)))
    path = os.path.join(out, f"predictions.{args.format}")
    emit_report(table, path, format=args.format)
    log.info("%d predictions -> %s", len(samples), path)
    return 0


def cmd_eval(args) -> int:
    out = _ensure_out(args)
    net = load_network(args.model)
    scenes = _load_scenes(args.data)
    test_ids = holdout_split(scenes)
    comparison = compare_methods(
        scenes, methods=("constant", "cv", "naive"),
        hyper=Hyperparams(seed=args.seed), n_frames=net.config.n_frames,
        radius=args.radius, horizon=args.horizon, noise_std=args.noise_std,
        test_ids=test_ids)
    dataset = build_dataset(scenes, net.config.n_frames, test_ids,
                            radius=args.radius)
    test = eligible_samples(dataset.test_samples(), "regression")
    if not test:
        raise ConfigurationError("no regression-eligible test samples")
    preds = predict_batch(net, test)
    truths = targets_for(test, "regression")
    metrics = regression_metrics(preds, truths)
    comparison = MethodComparison(rows=comparison.rows + (
        MethodRow(method="multistream", metrics=metrics, n=metrics.n),))
    cmp_path = os.path.join(out, f"comparison.{args.format}")
    emit_report(comparison.to_table(), cmp_path, format=args.format)
    intervals = interval_report(preds, np.minimum(truths, 6.0))
    int_path = os.path.join(out, f"intervals.{args.format}")
    emit_report(intervals.to_table(), int_path, format=args.format)
    log.info("multistream test MAE %.3f +- %.3f s (n=%d)",
             metrics.mae, metrics.std_abs_err, metrics.n)
    log.info("reports -> %s, %s", cmp_path, int_path)
    return 0


def cmd_sweep(args) -> int:
    out = _ensure_out(args)
    scenes = _load_scenes(args.data)
    n_values = parse_frames_spec(args.frames)
    result = sweep_temporal_windows(
        scenes, n_values=n_values, hyper=_hyper(args),
        radius=args.radius, augment=args.augment,
        max_train_samples=args.max_train_samples)
    path = os.path.join(out, f"sweep.{args.format}")
    emit_report(result.to_table(), path, format=args.format)
    for row in result.rows:
        log.info("N=%d: MAE %.3f +- %.3f s (%.0f s train)", row.n_frames,
                 row.metrics.mae, row.metrics.std_abs_err, row.train_seconds)
    log.info("best N = %d; table -> %s", result.best_n, path)
    return 0


def cmd_gradcheck(args) -> int:
    out = _ensure_out(args)
    report = grad_check(NetworkConfig.gradcheck_default(), seed=args.seed)
    doc = {
        "passed": report.passed,
        "tolerance": report.tolerance,
        "epsilon": report.epsilon,
        "max_rel_err": report.max_rel_err,
        "layers": [
            {"name": l.name, "max_rel_err": l.max_rel_err,
             "n_params": l.n_params, "n_skipped": l.n_skipped}
            for l in report.layers
        ],
    }
    path = os.path.join(out, "gradcheck.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for line in str(report).splitlines():
        log.info("%s", line)
    log.info("report -> %s", path)
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="nearcollision",
        description="Synthetic near-collision forecasting pipeline.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="COMMAND")

    def add(name, handler, help_, data_dir=False, model=False):
        p = sub.add_parser(
            name, help=help_,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=handler)
        p.add_argument("--seed", type=int, default=42,
                       help="base seed for all randomness")
        p.add_argument("--out", default="./out",
                       help="output directory for artifacts")
        if data_dir:
            p.add_argument("data", help="directory of scene_<id> directories")
        if model:
            p.add_argument("--model", required=True,
                           help="network checkpoint path")
        return p

    p = add("simulate", cmd_simulate, "generate seeded synthetic scenes")
    p.add_argument("--scenes", type=int, default=50,
                   help="number of scenes to simulate")
    p.add_argument("--pedestrians", type=int, default=3,
                   help="pedestrians per scene")

    p = add("annotate", cmd_annotate,
            "window scenes into a dataset manifest", data_dir=True)
    p.add_argument("--frames", type=int, default=6,
                   help="history length N (frames per window)")
    p.add_argument("--radius", type=float, default=1.0,
                   help="near-collision radius in meters")

    p = add("baseline", cmd_baseline,
            "score constant/CV/naive baselines", data_dir=True)
    p.add_argument("--frames", type=int, default=6,
                   help="history length N (frames per window)")
    p.add_argument("--radius", type=float, default=1.0,
                   help="near-collision radius in meters")
    p.add_argument("--horizon", type=float, default=6.0,
                   help="forecast horizon in seconds")
    p.add_argument("--noise-std", type=float, default=0.0,
                   help="track position noise std in meters")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="report file format")

    def training_flags(p, frames_spec=False):
        if frames_spec:
            p.add_argument("--frames", default="1:9",
                           help="history lengths to sweep, N or LO:HI")
        else:
            p.add_argument("--frames", type=int, default=6,
                           help="history length N (frames per window)")
        p.add_argument("--batch", type=int, default=24,
                       help="minibatch size")
        p.add_argument("--lr", type=float, default=0.001,
                       help="SGD learning rate")
        p.add_argument("--epochs", type=int, default=30,
                       help="training epochs")
        p.add_argument("--radius", type=float, default=1.0,
                       help="near-collision radius in meters")
        p.add_argument("--augment", action="store_true",
                       help="mirror train windows horizontally")

    p = add("train", cmd_train,
            "train the multi-stream regressor", data_dir=True)
    training_flags(p)

    p = add("predict", cmd_predict,
            "predict on every eligible window", data_dir=True, model=True)
    p.add_argument("--radius", type=float, default=1.0,
                   help="near-collision radius in meters")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="report file format")

    p = add("eval", cmd_eval,
            "score a checkpoint against the baselines", data_dir=True,
            model=True)
    p.add_argument("--radius", type=float, default=1.0,
                   help="near-collision radius in meters")
    p.add_argument("--horizon", type=float, default=6.0,
                   help="forecast horizon in seconds")
    p.add_argument("--noise-std", type=float, default=0.0,
                   help="track position noise std in meters")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="report file format")

    p = add("sweep", cmd_sweep,
            "temporal-window sweep over history lengths", data_dir=True)
    training_flags(p, frames_spec=True)
    p.add_argument("--max-train-samples", type=int, default=None,
                   help="cap on train windows per cell (None = all)")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="report file format")

    add("gradcheck", cmd_gradcheck,
        "finite-difference check of the training gradients")

    for sp in sub.choices.values():
        sp.add_argument("--jobs", type=int, default=1,
                        help="worker processes (reserved; single-threaded "
                             "execution is the reproducibility baseline)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        log.error("--jobs must be >= 1, got %d", args.jobs)
        return 1
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        log.error("%s", exc)
        return 1
    except (NearCollisionError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
