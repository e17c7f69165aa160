"""Multi-stream shared-weight convolutional time-to-near-collision forecaster.

Every frame of an N-frame window passes through one shared backbone
(conv3x3 -> relu -> maxpool2, twice, then a 1x1 channel reduction); the
per-frame features are concatenated oldest-first and a fully-connected
head maps them to the output: a raw scalar for regression (clamped to
[0, 6] at inference only), two softmax classes, or four sigmoid bins.

All parameters and activations are 64-bit floats so central finite
differences have the precision headroom to certify the backward pass.
Inputs are standardized with the config's (input_mean, input_std) before
entering the backbone; the defaults (0, 1) leave pixels untouched.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ..annotate import WindowSample, weighted_sampler
from ..errors import (
    CheckpointError,
    ConfigurationError,
    NumericalError,
    ShapeError,
    TrainingError,
)
from . import layers

HEADS = ("regression", "binary", "multilabel")
HEAD_UNITS = {"regression": 1, "binary": 2, "multilabel": 4}
T_MAX = 6.0
PROB_FLOOR = 1e-12
DIVERGENCE_LIMIT = 1e6

CHECKPOINT_MAGIC = b"NCFCST\x00\x01"
CHECKPOINT_VERSION = 1

_MASK64 = (1 << 64) - 1
_SS_INIT = 0
_SS_SHUFFLE = 1
_SS_GRADCHECK = 2
_REL_FLOOR = 1e-6


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture description; parameter shapes derive from it alone."""

    n_frames: int = 6
    input_height: int = 64
    input_width: int = 64
    conv_channels: tuple[int, ...] = (8, 16)
    reduce_channels: int = 4
    hidden_units: int = 128
    head: str = "regression"
    input_mean: float = 0.0
    input_std: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "conv_channels", tuple(self.conv_channels))
        if not 1 <= self.n_frames <= 9:
            raise ConfigurationError(
                f"n_frames must be in [1, 9], got {self.n_frames}")
        if self.head not in HEADS:
            raise ConfigurationError(
                f"head must be one of {HEADS}, got {self.head!r}")
        if not self.conv_channels or any(c < 1 for c in self.conv_channels):
            raise ConfigurationError(
                f"conv_channels must be positive, got {self.conv_channels}")
        if self.reduce_channels < 1:
            raise ConfigurationError("reduce_channels must be >= 1")
        if self.hidden_units < 1:
            raise ConfigurationError("hidden_units must be >= 1")
        if not self.input_std > 0:
            raise ConfigurationError(
                f"input_std must be positive, got {self.input_std}")
        h, w = self.input_height, self.input_width
        for i in range(1, len(self.conv_channels) + 1):
            if h < 2 or w < 2 or h % 2 or w % 2:
                raise ConfigurationError(
                    f"maxpool2 after conv{i}: {h}x{w} input is not an even size")
            h //= 2
            w //= 2

    @property
    def feature_grid(self) -> tuple[int, int]:
        factor = 2 ** len(self.conv_channels)
        return (self.input_height // factor, self.input_width // factor)

    @property
    def frame_features(self) -> int:
        gh, gw = self.feature_grid
        return self.reduce_channels * gh * gw

    @property
    def fc_inputs(self) -> int:
        return self.n_frames * self.frame_features

    @property
    def head_units(self) -> int:
        return HEAD_UNITS[self.head]

    @classmethod
    def gradcheck_default(cls, head: str = "regression") -> "NetworkConfig":
        """Default layer pattern scaled to 16x16 so every parameter can be
        finite-difference checked in seconds."""
        return cls(n_frames=2, input_height=16, input_width=16,
                   hidden_units=32, head=head)


def param_shapes(cfg: NetworkConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter declaration order; checkpoints serialize in this order."""
    shapes: list[tuple[str, tuple[int, ...]]] = []
    in_ch = 1
    for i, out_ch in enumerate(cfg.conv_channels, start=1):
        shapes.append((f"conv{i}_w", (out_ch, in_ch, 3, 3)))
        shapes.append((f"conv{i}_b", (out_ch,)))
        in_ch = out_ch
    shapes.append(("reduce_w", (cfg.reduce_channels, in_ch, 1, 1)))
    shapes.append(("reduce_b", (cfg.reduce_channels,)))
    shapes.append(("fc_w", (cfg.hidden_units, cfg.fc_inputs)))
    shapes.append(("fc_b", (cfg.hidden_units,)))
    shapes.append(("head_w", (cfg.head_units, cfg.hidden_units)))
    shapes.append(("head_b", (cfg.head_units,)))
    return shapes


def parameter_count(cfg: NetworkConfig) -> int:
    return sum(int(np.prod(s)) for _, s in param_shapes(cfg))


@dataclass
class Network:
    """Config plus one copy of every parameter tensor.

    The backbone is shared across the N streams by construction: a single
    conv/reduce parameter set processes all N frames, so there is nothing
    per-stream to keep in sync.
    """

    config: NetworkConfig
    params: dict[str, np.ndarray]
    init_seed: int

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "Network":
        return Network(config=self.config,
                       params={k: v.copy() for k, v in self.params.items()},
                       init_seed=self.init_seed)


@dataclass(frozen=True)
class Hyperparams:
    batch_size: int = 24
    learning_rate: float = 0.001
    epochs: int = 30
    seed: int = 0
    loss: str = "regression"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigurationError(
                f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigurationError(
                f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.epochs}")
        if self.loss not in HEADS:
            raise ConfigurationError(
                f"loss must be one of {HEADS}, got {self.loss!r}")


def build_network(cfg: NetworkConfig, seed: int) -> Network:
    """He-initialized network: weights ~ N(0, 2/fan_in), biases zero.

    Each weight tensor draws from its own named substream of the seed, so
    adding layers never shifts the initialization of existing ones.
    """
    params: dict[str, np.ndarray] = {}
    for k, (name, shape) in enumerate(param_shapes(cfg)):
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
            continue
        fan_in = int(np.prod(shape[1:]))
        rng = np.random.default_rng(
            np.random.SeedSequence([seed & _MASK64, _SS_INIT, k]))
        params[name] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
    return Network(config=cfg, params=params, init_seed=seed)


# ---------------------------------------------------------------------------
# Forward / backward


def _standardized(cfg: NetworkConfig, frames) -> np.ndarray:
    x = np.asarray(frames)
    if x.ndim != 4 or x.shape[1:] != (cfg.n_frames, cfg.input_height,
                                      cfg.input_width):
        raise ShapeError(
            f"window batch must have shape (B, {cfg.n_frames}, "
            f"{cfg.input_height}, {cfg.input_width}), got {x.shape}")
    x = x.astype(np.float64)   # always copies, so in-place ops are safe
    if cfg.input_mean != 0.0:
        x -= cfg.input_mean
    if cfg.input_std != 1.0:
        x /= cfg.input_std
    return x


def _trunk_forward(net: Network, planes: np.ndarray):
    """Shared backbone over (B*N, 1, H, W) planes -> reduced feature maps."""
    p = net.params
    chain = []
    h = planes
    for i in range(1, len(net.config.conv_channels) + 1):
        h, c = layers.conv2d_forward(h, p[f"conv{i}_w"], p[f"conv{i}_b"])
        chain.append((f"conv{i}", "conv", c))
        h, c = layers.relu_forward(h, inplace=True)
        chain.append((f"relu{i}", "relu", c))
        h, c = layers.maxpool2_forward(h)
        chain.append((f"pool{i}", "pool", c))
    h, c = layers.conv2d_forward(h, p["reduce_w"], p["reduce_b"])
    chain.append(("reduce", "conv", c))
    return h, chain


def _training_forward(net: Network, frames):
    """Raw training-time output and the layer chain for backprop.

    Output per head: regression -> raw scalars (B,), binary -> softmax
    probabilities (B, 2), multilabel -> raw logits (B, 4).
    """
    cfg = net.config
    xs = _standardized(cfg, frames)
    B = xs.shape[0]
    planes = np.ascontiguousarray(
        xs.reshape(B * cfg.n_frames, 1, cfg.input_height, cfg.input_width))
    h, chain = _trunk_forward(net, planes)
    concat_shape = h.shape
    h = h.reshape(B, cfg.fc_inputs)   # temporal-major: oldest frame first
    chain.append(("concat", "reshape", concat_shape))
    p = net.params
    h, c = layers.linear_forward(h, p["fc_w"], p["fc_b"])
    chain.append(("fc", "linear", c))
    h, c = layers.relu_forward(h, inplace=True)
    chain.append(("fc_relu", "relu", c))
    z, c = layers.linear_forward(h, p["head_w"], p["head_b"])
    chain.append(("head", "linear", c))
    if cfg.head == "regression":
        chain.append(("out", "reshape", (B, 1)))
        return z[:, 0], chain
    if cfg.head == "binary":
        prob = layers.softmax(z)
        chain.append(("softmax", "softmax", prob))
        return prob, chain
    return z, chain


def _backward(chain, dout) -> dict[str, np.ndarray]:
    grads: dict[str, np.ndarray] = {}
    d = dout
    for name, kind, cache in reversed(chain):
        if kind == "conv":
            # conv1 is the first layer; nothing consumes its input gradient
            d, dw, db = layers.conv2d_backward(cache, d,
                                               need_dx=name != "conv1")
            grads[name + "_w"] = dw
            grads[name + "_b"] = db
        elif kind == "linear":
            d, dw, db = layers.linear_backward(cache, d)
            grads[name + "_w"] = dw
            grads[name + "_b"] = db
        elif kind == "relu":
            d = layers.relu_backward(cache, d, inplace=True)
        elif kind == "pool":
            d = layers.maxpool2_backward(cache, d)
        elif kind == "reshape":
            d = d.reshape(cache)
        elif kind == "softmax":
            d = layers.softmax_backward(cache, d)
    return grads


def _scan_nonfinite(net: Network, frames) -> str:
    """Name of the first layer whose output is non-finite."""
    cfg = net.config
    x = np.asarray(frames, dtype=np.float64)
    if not np.isfinite(x).all():
        return "input"
    h = np.ascontiguousarray(
        _standardized(cfg, x).reshape(-1, 1, cfg.input_height, cfg.input_width))
    p = net.params
    for i in range(1, len(cfg.conv_channels) + 1):
        h, _ = layers.conv2d_forward(h, p[f"conv{i}_w"], p[f"conv{i}_b"])
        if not np.isfinite(h).all():
            return f"conv{i}"
        h, _ = layers.relu_forward(h)
        h, _ = layers.maxpool2_forward(h)
    h, _ = layers.conv2d_forward(h, p["reduce_w"], p["reduce_b"])
    if not np.isfinite(h).all():
        return "reduce"
    h = h.reshape(-1, cfg.fc_inputs)
    h, _ = layers.linear_forward(h, p["fc_w"], p["fc_b"])
    if not np.isfinite(h).all():
        return "fc"
    h, _ = layers.relu_forward(h)
    h, _ = layers.linear_forward(h, p["head_w"], p["head_b"])
    return "head"


def forward(net: Network, window):
    """Inference on one (N, H, W) window or a (B, N, H, W) batch.

    Regression outputs are clamped to [0, 6]; binary returns class
    probabilities; multilabel returns the four sigmoid activations.  The
    network is not mutated, so concurrent calls are safe.
    """
    x = np.asarray(window, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    out, _ = _training_forward(net, x)
    if not np.isfinite(out).all():
        raise NumericalError(
            f"non-finite activation in layer {_scan_nonfinite(net, x)!r}")
    cfg = net.config
    if cfg.head == "regression":
        out = np.clip(out, 0.0, T_MAX)
        return float(out[0]) if single else out
    if cfg.head == "multilabel":
        out = layers.sigmoid(out)
    return out[0] if single else out


def frame_features(net: Network, window) -> np.ndarray:
    """Per-stream feature blocks before concatenation: (N, frame_features)
    for a single window, (B, N, frame_features) for a batch."""
    x = np.asarray(window, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[None]
    cfg = net.config
    xs = _standardized(cfg, x)
    planes = np.ascontiguousarray(
        xs.reshape(-1, 1, cfg.input_height, cfg.input_width))
    h, _ = _trunk_forward(net, planes)
    feats = h.reshape(xs.shape[0], cfg.n_frames, cfg.frame_features)
    return feats[0] if single else feats


# ---------------------------------------------------------------------------
# Losses


def compute_loss(output, target, kind: str):
    """Scalar batch loss and its gradient w.r.t. the network output.

    regression: mean of 0.5*(t - pred)^2 over raw predictions;
    binary: cross-entropy of the softmax probabilities (integer class
    targets, class 1 = near-collision within 1 s);
    multilabel: mean over the four bins of binary cross-entropy on raw
    logits.  Probabilities are clamped to [1e-12, 1 - 1e-12] before logs.
    """
    if kind == "regression":
        pred = np.atleast_1d(np.asarray(output, dtype=np.float64))
        truth = np.atleast_1d(np.asarray(target, dtype=np.float64))
        if pred.shape != truth.shape:
            raise ShapeError(
                f"regression shapes differ: {pred.shape} vs {truth.shape}")
        diff = pred - truth
        return float(0.5 * np.mean(diff * diff)), diff / diff.size
    if kind == "binary":
        prob = np.atleast_2d(np.asarray(output, dtype=np.float64))
        idx = np.atleast_1d(np.asarray(target)).astype(int)
        if prob.shape != (idx.size, 2):
            raise ShapeError(
                f"binary head expects ({idx.size}, 2) probabilities, "
                f"got {prob.shape}")
        picked = np.clip(prob[np.arange(idx.size), idx],
                         PROB_FLOOR, 1.0 - PROB_FLOOR)
        grad = np.zeros_like(prob)
        grad[np.arange(idx.size), idx] = -1.0 / (picked * idx.size)
        return float(-np.mean(np.log(picked))), grad
    if kind == "multilabel":
        logits = np.atleast_2d(np.asarray(output, dtype=np.float64))
        truth = np.atleast_2d(np.asarray(target, dtype=np.float64))
        if logits.shape != truth.shape or logits.shape[1] != 4:
            raise ShapeError(
                f"multilabel expects matching (B, 4) arrays, got "
                f"{logits.shape} vs {truth.shape}")
        s = layers.sigmoid(logits)
        sc = np.clip(s, PROB_FLOOR, 1.0 - PROB_FLOOR)
        loss = -np.mean(truth * np.log(sc) + (1.0 - truth) * np.log(1.0 - sc))
        return float(loss), (s - truth) / logits.size
    raise ConfigurationError(f"unknown loss kind {kind!r}")


# ---------------------------------------------------------------------------
# Training


def backward_and_step(net: Network, batch, hyper: Hyperparams):
    """One SGD step on (frames, targets); returns (net, batch loss).

    Gradients from all N streams accumulate into the shared backbone
    parameters because the backbone runs over the flattened (B*N) plane
    axis.  Any non-finite loss or gradient aborts before touching the
    parameters.
    """
    frames, targets = batch
    if hyper.loss != net.config.head:
        raise ConfigurationError(
            f"hyper.loss {hyper.loss!r} does not match head "
            f"{net.config.head!r}")
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeError(f"batch must be 4-d (B, N, H, W), got {x.shape}")
    if x.shape[0] > hyper.batch_size:
        raise ConfigurationError(
            f"batch of {x.shape[0]} exceeds batch_size {hyper.batch_size}")
    if not np.isfinite(x).all():
        raise TrainingError("non-finite values in the input batch")
    out, chain = _training_forward(net, x)
    loss, dout = compute_loss(out, targets, net.config.head)
    if not np.isfinite(loss):
        raise TrainingError(
            f"non-finite loss; first bad layer: {_scan_nonfinite(net, x)!r}")
    grads = _backward(chain, dout)
    for name in grads:
        if not np.isfinite(grads[name]).all():
            raise TrainingError(f"non-finite gradient in {name!r}")
    for name, _ in param_shapes(net.config):
        net.params[name] -= hyper.learning_rate * grads[name]
    return net, loss


def eligible_samples(samples, head: str) -> list[WindowSample]:
    """Samples carrying the target the head trains on."""
    if head == "regression":
        return [s for s in samples if s.t_true is not None]
    if head == "binary":
        return [s for s in samples if s.binary_target is not None]
    return [s for s in samples
            if s.multilabel_target is not None and s.binary_target is not None]


def stack_windows(samples) -> np.ndarray:
    return np.stack([s.frames for s in samples])


def targets_for(samples, head: str) -> np.ndarray:
    if head == "regression":
        return np.array([s.t_true for s in samples], dtype=np.float64)
    if head == "binary":
        return np.array([int(s.binary_target) for s in samples])
    return np.array([s.multilabel_target for s in samples], dtype=np.float64)


def train(net: Network, samples, hyper: Hyperparams):
    """SGD over the eligible samples; returns (net, per-epoch loss curve).

    The regression head reshuffles the samples each epoch; classification
    heads draw from the 0.6/0.4 class-weighted replacement sampler.  Each
    curve entry is the sample-weighted mean batch loss of its epoch.
    """
    if hyper.loss != net.config.head:
        raise ConfigurationError(
            f"hyper.loss {hyper.loss!r} does not match head "
            f"{net.config.head!r}")
    usable = eligible_samples(samples, net.config.head)
    if not usable:
        raise ConfigurationError(
            f"no samples carry a {net.config.head} target")
    n, bs = len(usable), hyper.batch_size
    curve: list[float] = []
    if net.config.head == "regression":
        rng = np.random.default_rng(
            np.random.SeedSequence([hyper.seed & _MASK64, _SS_SHUFFLE]))
        for epoch in range(hyper.epochs):
            order = rng.permutation(n)
            total = 0.0
            for step, start in enumerate(range(0, n, bs)):
                chunk = [usable[i] for i in order[start:start + bs]]
                net, loss = backward_and_step(
                    net, (stack_windows(chunk),
                          targets_for(chunk, "regression")), hyper)
                _check_divergence(loss, epoch, step)
                total += loss * len(chunk)
            curve.append(total / n)
    else:
        stream = weighted_sampler(usable, seed=hyper.seed)
        steps = max(1, math.ceil(n / bs))
        for epoch in range(hyper.epochs):
            total = 0.0
            for step in range(steps):
                chunk = [next(stream) for _ in range(bs)]
                net, loss = backward_and_step(
                    net, (stack_windows(chunk),
                          targets_for(chunk, net.config.head)), hyper)
                _check_divergence(loss, epoch, step)
                total += loss * bs
            curve.append(total / (steps * bs))
    return net, curve


def _check_divergence(loss: float, epoch: int, step: int) -> None:
    if loss > DIVERGENCE_LIMIT:
        raise TrainingError(
            f"diverged at epoch {epoch} step {step}: loss {loss:.3e}")


def predict_batch(net: Network, samples, batch_size: int = 64) -> np.ndarray:
    """Clamped inference outputs for a list of window samples."""
    outs = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        outs.append(np.atleast_1d(forward(net, stack_windows(chunk))))
    if not outs:
        return np.zeros((0,))
    return np.concatenate(outs)


# ---------------------------------------------------------------------------
# Gradient checking


@dataclass(frozen=True)
class LayerGradCheck:
    name: str
    max_rel_err: float
    n_params: int
    n_skipped: int = 0


@dataclass(frozen=True)
class GradCheckReport:
    tolerance: float
    epsilon: float
    layers: tuple[LayerGradCheck, ...]
    passed: bool

    @property
    def max_rel_err(self) -> float:
        return max(layer.max_rel_err for layer in self.layers)

    def __str__(self) -> str:
        lines = [
            f"{layer.name:10s} n={layer.n_params:<6d} "
            f"max_rel_err={layer.max_rel_err:.3e} skipped={layer.n_skipped}"
            for layer in self.layers
        ]
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"{verdict}: max {self.max_rel_err:.3e} "
                     f"vs tolerance {self.tolerance:.1e}")
        return "\n".join(lines)


def _random_targets(head: str, n: int, rng: np.random.Generator):
    if head == "regression":
        return rng.uniform(0.0, T_MAX, size=n)
    if head == "binary":
        return rng.integers(0, 2, size=n)
    rows = np.zeros((n, 4))
    rows[np.arange(n), rng.integers(0, 4, size=n)] = 1.0
    return rows


def _routing(chain) -> list[np.ndarray]:
    """Activation routing: relu sign masks and pool argmax indices.

    A finite difference is only meaningful while both perturbed points
    share the unperturbed routing, i.e. the network stays inside one
    linear region; comparisons that leave it hit relu/max subgradient
    points and are excluded.
    """
    sig = []
    for _, kind, cache in chain:
        if kind == "relu":
            sig.append(cache)        # positive-side mask
        elif kind == "pool":
            sig.append(cache[0])     # argmax indices
    return sig


def _same_routing(a: list[np.ndarray], b: list[np.ndarray]) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(cfg: NetworkConfig, tolerance: float = 1e-4, seed: int = 0,
               batch_size: int = 3, _corrupt: str | None = None) -> GradCheckReport:
    """Central finite differences (eps = 1e-5) against the analytic
    gradient for every parameter, on a random standard-normal batch.

    Parameters whose +-eps perturbation flips a relu sign or a pool
    argmax sit on a subgradient point; they are excluded from comparison
    and counted per layer.  A relu input exactly at 0 is the boundary
    case of the same rule: any perturbation that moves it positive flips
    its routing bit, so the comparison is skipped.  The private _corrupt
    hook sign-flips one analytic gradient so tests can confirm the
    checker notices (relative error ~= 2).
    """
    total = parameter_count(cfg)
    if total > 10_000:
        raise ConfigurationError(
            f"grad_check is exhaustive; config has {total} > 10000 parameters")
    net = build_network(cfg, seed)
    rng = np.random.default_rng(
        np.random.SeedSequence([seed & _MASK64, _SS_GRADCHECK]))
    x = rng.normal(size=(batch_size, cfg.n_frames,
                         cfg.input_height, cfg.input_width))
    targets = _random_targets(cfg.head, batch_size, rng)
    out, chain = _training_forward(net, x)
    _, dout = compute_loss(out, targets, cfg.head)
    grads = _backward(chain, dout)
    if _corrupt is not None:
        grads[_corrupt] = -grads[_corrupt]
    base_routing = _routing(chain)
    eps = 1e-5
    reports = []
    for name, _ in param_shapes(cfg):
        theta = net.params[name].ravel()
        analytic = grads[name].ravel()
        worst = 0.0
        skipped = 0
        for i in range(theta.size):
            saved = theta[i]
            theta[i] = saved + eps
            out_p, chain_p = _training_forward(net, x)
            lp, _ = compute_loss(out_p, targets, cfg.head)
            theta[i] = saved - eps
            out_m, chain_m = _training_forward(net, x)
            lm, _ = compute_loss(out_m, targets, cfg.head)
            theta[i] = saved
            if not (_same_routing(base_routing, _routing(chain_p))
                    and _same_routing(base_routing, _routing(chain_m))):
                skipped += 1
                continue
            numeric = (lp - lm) / (2.0 * eps)
            rel = (abs(analytic[i] - numeric)
                   / max(abs(analytic[i]), abs(numeric), _REL_FLOOR))
            if rel > worst:
                worst = rel
        reports.append(LayerGradCheck(name=name, max_rel_err=worst,
                                      n_params=theta.size, n_skipped=skipped))
    passed = all(r.max_rel_err < tolerance for r in reports)
    return GradCheckReport(tolerance=tolerance, epsilon=eps,
                           layers=tuple(reports), passed=passed)


# ---------------------------------------------------------------------------
# Checkpoint I/O


def _config_to_dict(cfg: NetworkConfig) -> dict:
    return {
        "n_frames": cfg.n_frames,
        "input_height": cfg.input_height,
        "input_width": cfg.input_width,
        "conv_channels": list(cfg.conv_channels),
        "reduce_channels": cfg.reduce_channels,
        "hidden_units": cfg.hidden_units,
        "head": cfg.head,
        "input_mean": float(cfg.input_mean),
        "input_std": float(cfg.input_std),
    }


def _config_from_dict(d: dict) -> NetworkConfig:
    return NetworkConfig(
        n_frames=int(d["n_frames"]),
        input_height=int(d["input_height"]),
        input_width=int(d["input_width"]),
        conv_channels=tuple(int(c) for c in d["conv_channels"]),
        reduce_channels=int(d["reduce_channels"]),
        hidden_units=int(d["hidden_units"]),
        head=str(d["head"]),
        input_mean=float(d["input_mean"]),
        input_std=float(d["input_std"]),
    )


def save_network(net: Network, path: str) -> None:
    """Versioned binary checkpoint: magic, version, config JSON, then the
    parameter tensors as little-endian float64 in declaration order, and
    a trailing sha256 of everything before it."""
    doc = {"config": _config_to_dict(net.config), "init_seed": net.init_seed}
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [CHECKPOINT_MAGIC,
             struct.pack("<II", CHECKPOINT_VERSION, len(blob)), blob]
    for name, _ in param_shapes(net.config):
        parts.append(np.ascontiguousarray(net.params[name],
                                          dtype="<f8").tobytes())
    payload = b"".join(parts)
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
            fh.write(hashlib.sha256(payload).digest())
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc


def load_network(path: str) -> Network:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    header = len(CHECKPOINT_MAGIC) + 8
    if len(data) < header + 32:
        raise CheckpointError(f"checkpoint {path} is truncated")
    payload, digest = data[:-32], data[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointError(f"checkpoint {path} fails its checksum")
    if payload[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"checkpoint {path} has the wrong magic")
    version, jlen = struct.unpack_from("<II", payload, len(CHECKPOINT_MAGIC))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} is version {version}, "
            f"expected {CHECKPOINT_VERSION}")
    try:
        doc = json.loads(payload[header:header + jlen].decode("utf-8"))
        cfg = _config_from_dict(doc["config"])
        init_seed = int(doc["init_seed"])
    except (ValueError, KeyError, ConfigurationError) as exc:
        raise CheckpointError(
            f"checkpoint {path} has a malformed config block: {exc}") from exc
    params: dict[str, np.ndarray] = {}
    offset = header + jlen
    for name, shape in param_shapes(cfg):
        count = int(np.prod(shape))
        if offset + count * 8 > len(payload):
            raise CheckpointError(
                f"checkpoint {path} is missing data for {name}")
        params[name] = np.frombuffer(
            payload, dtype="<f8", count=count,
            offset=offset).reshape(shape).astype(np.float64)
        offset += count * 8
    if offset != len(payload):
        raise CheckpointError(
            f"checkpoint {path} has {len(payload) - offset} trailing bytes")
    return Network(config=cfg, params=params, init_seed=init_seed)
