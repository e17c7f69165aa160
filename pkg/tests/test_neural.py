"""Backprop engine, multi-stream forecaster, training loop, checkpoints."""

import hashlib
import math
import struct

import numpy as np
import pytest

from nearcollision.annotate import WindowSample, build_dataset, flip_augment
from nearcollision.errors import (
    CheckpointError,
    ConfigurationError,
    NumericalError,
    ShapeError,
    TrainingError,
)
from nearcollision.neural import (
    Hyperparams,
    NetworkConfig,
    backward_and_step,
    build_network,
    compute_loss,
    eligible_samples,
    forward,
    frame_features,
    grad_check,
    load_network,
    param_shapes,
    parameter_count,
    predict_batch,
    save_network,
    stack_windows,
    targets_for,
    train,
)
from nearcollision.neural import layers
from nearcollision.scenesim import SimConfig, simulate_scene


def tiny_cfg(head="regression"):
    return NetworkConfig(n_frames=1, input_height=8, input_width=8,
                         conv_channels=(4, 8), reduce_channels=2,
                         hidden_units=16, head=head)


def random_samples(n, rng, shape=(2, 16, 16), head="regression"):
    out = []
    for i in range(n):
        kw = {}
        if head == "regression":
            kw["t_true"] = float(rng.uniform(0, 6))
        else:
            flag = bool(rng.integers(0, 2))
            kw["binary_target"] = flag
            one_hot = [0, 0, 0, 0]
            one_hot[int(rng.integers(0, 4))] = 1
            kw["multilabel_target"] = tuple(one_hot)
        out.append(WindowSample(scene_id=0, end_index=i, n_frames=shape[0],
                                _frames=rng.normal(size=shape), **kw))
    return out


class TestNetworkConfig:
    def test_defaults_chain(self):
        cfg = NetworkConfig()
        assert cfg.feature_grid == (16, 16)
        assert cfg.fc_inputs == 6 * 4 * 16 * 16

    def test_parameter_counts(self):
        assert parameter_count(NetworkConfig()) == 788005
        assert parameter_count(NetworkConfig.gradcheck_default()) == 5477

    @pytest.mark.parametrize("kw", [
        {"n_frames": 0},
        {"n_frames": 10},
        {"head": "softmax"},
        {"input_height": 15},
        {"input_width": 0},
        {"conv_channels": ()},
        {"conv_channels": (8, 0)},
        {"hidden_units": 0},
        {"reduce_channels": 0},
        {"input_std": 0.0},
    ])
    def test_rejects_bad_config(self, kw):
        with pytest.raises(ConfigurationError):
            NetworkConfig(**kw)

    def test_pool_error_names_layer(self):
        # 10 halves once to 5, which the second pool cannot halve evenly
        with pytest.raises(ConfigurationError, match="conv2"):
            NetworkConfig(input_height=10, input_width=10)


class TestBuildNetwork:
    def test_deterministic(self):
        a = build_network(NetworkConfig(), 42)
        b = build_network(NetworkConfig(), 42)
        for name in a.params:
            assert np.array_equal(a.params[name], b.params[name])

    def test_seed_changes_weights(self):
        a = build_network(NetworkConfig(), 1)
        b = build_network(NetworkConfig(), 2)
        assert not np.array_equal(a.params["conv1_w"], b.params["conv1_w"])

    def test_zero_biases(self):
        net = build_network(NetworkConfig(), 0)
        for name, p in net.params.items():
            if name.endswith("_b"):
                assert np.all(p == 0.0)

    def test_he_std(self):
        net = build_network(NetworkConfig(), 7)
        w = net.params["conv2_w"]           # fan_in = 8 * 3 * 3 = 72
        expected = math.sqrt(2.0 / 72.0)
        assert abs(w.std() - expected) / expected < 0.1

    def test_single_backbone_copy_across_n(self):
        names_1 = [n for n, _ in param_shapes(NetworkConfig(n_frames=1))]
        names_9 = [n for n, _ in param_shapes(NetworkConfig(n_frames=9))]
        assert names_1 == names_9
        shapes_1 = dict(param_shapes(NetworkConfig(n_frames=1)))
        shapes_9 = dict(param_shapes(NetworkConfig(n_frames=9)))
        for name in shapes_1:
            if name != "fc_w":              # only the concat width grows
                assert shapes_1[name] == shapes_9[name]

    def test_shared_backbone_behavior(self):
        net = build_network(NetworkConfig(n_frames=3, input_height=16,
                                          input_width=16), 3)
        frame = np.random.default_rng(0).normal(size=(16, 16))
        feats = frame_features(net, np.stack([frame] * 3))
        assert np.array_equal(feats[0], feats[1])
        assert np.array_equal(feats[1], feats[2])


class TestForward:
    def test_zero_window_zero_output(self):
        net = build_network(NetworkConfig(), 5)
        assert forward(net, np.zeros((6, 64, 64))) == 0.0

    def test_single_matches_batch(self):
        net = build_network(NetworkConfig(n_frames=2, input_height=16,
                                          input_width=16), 1)
        w = np.random.default_rng(2).normal(size=(2, 16, 16))
        batch = forward(net, np.stack([w, w + 1.0]))
        assert forward(net, w) == batch[0]

    def test_regression_clamped(self):
        net = build_network(NetworkConfig.gradcheck_default(), 1)
        rng = np.random.default_rng(3)
        net.params["head_b"][0] = 100.0
        assert forward(net, rng.normal(size=(2, 16, 16))) == 6.0
        net.params["head_b"][0] = -100.0
        assert forward(net, rng.normal(size=(2, 16, 16))) == 0.0
        for _ in range(20):
            net.params["head_b"][0] = rng.uniform(-10, 10)
            assert 0.0 <= forward(net, rng.normal(size=(2, 16, 16))) <= 6.0

    def test_binary_probabilities(self):
        net = build_network(NetworkConfig.gradcheck_default(head="binary"), 1)
        p = forward(net, np.random.default_rng(4).normal(size=(5, 2, 16, 16)))
        assert p.shape == (5, 2)
        assert np.all(p > 0)
        assert np.abs(p.sum(axis=1) - 1.0).max() < 1e-12

    def test_multilabel_sigmoids(self):
        net = build_network(
            NetworkConfig.gradcheck_default(head="multilabel"), 1)
        out = forward(net, np.random.default_rng(5).normal(size=(2, 16, 16)))
        assert out.shape == (4,)
        assert np.all((out > 0) & (out < 1))

    def test_shape_mismatch(self):
        net = build_network(NetworkConfig.gradcheck_default(), 1)
        with pytest.raises(ShapeError):
            forward(net, np.zeros((3, 16, 16)))
        with pytest.raises(ShapeError):
            forward(net, np.zeros((2, 16, 8)))

    def test_nonfinite_input(self):
        net = build_network(NetworkConfig.gradcheck_default(), 1)
        bad = np.zeros((2, 16, 16))
        bad[0, 0, 0] = np.nan
        with pytest.raises(NumericalError, match="input"):
            forward(net, bad)

    def test_concat_layout_feeds_head(self):
        # fc input block n holds frame n's features, oldest first
        net = build_network(NetworkConfig(n_frames=3, input_height=16,
                                          input_width=16), 9)
        rng = np.random.default_rng(6)
        w = rng.normal(size=(3, 16, 16))
        feats = frame_features(net, w).reshape(1, -1)
        hidden = np.maximum(
            feats @ net.params["fc_w"].T + net.params["fc_b"], 0.0)
        z = float((hidden @ net.params["head_w"].T + net.params["head_b"])[0, 0])
        assert forward(net, w) == pytest.approx(np.clip(z, 0, 6), abs=1e-12)


class TestComputeLoss:
    def test_regression_examples(self):
        loss, grad = compute_loss(2.0, 1.0, "regression")
        assert loss == 0.5
        assert grad == pytest.approx([1.0])
        loss, grad = compute_loss([1.5, 2.5], [1.5, 2.5], "regression")
        assert loss == 0.0
        assert np.all(grad == 0.0)

    def test_multilabel_log2(self):
        loss, grad = compute_loss([0.0, 0.0, 0.0, 0.0], [1, 0, 0, 0],
                                  "multilabel")
        assert loss == pytest.approx(math.log(2.0), abs=1e-12)
        assert grad == pytest.approx(np.array([[-0.125, 0.125, 0.125, 0.125]]))

    def test_binary_hand_values(self):
        loss, grad = compute_loss([[0.25, 0.75]], [1], "binary")
        assert loss == pytest.approx(-math.log(0.75), abs=1e-12)
        assert grad == pytest.approx(np.array([[0.0, -1.0 / 0.75]]))

    def test_binary_guards_log_domain(self):
        loss, _ = compute_loss([[1.0, 0.0]], [1], "binary")
        assert np.isfinite(loss)

    @pytest.mark.parametrize("kind", ["regression", "binary", "multilabel"])
    def test_batch_loss_is_mean_of_samples(self, kind):
        rng = np.random.default_rng(11)
        if kind == "regression":
            out = rng.normal(size=8)
            tgt = rng.uniform(0, 6, size=8)
        elif kind == "binary":
            raw = rng.normal(size=(8, 2))
            out = np.exp(raw) / np.exp(raw).sum(axis=1, keepdims=True)
            tgt = rng.integers(0, 2, size=8)
        else:
            out = rng.normal(size=(8, 4))
            tgt = (rng.random(size=(8, 4)) < 0.5).astype(float)
        batch_loss, _ = compute_loss(out, tgt, kind)
        per_sample = [compute_loss(out[i:i + 1], tgt[i:i + 1], kind)[0]
                      for i in range(8)]
        assert batch_loss == pytest.approx(np.mean(per_sample), abs=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            compute_loss([0.0], [0.0], "hinge")


class TestBackwardAndStep:
    def test_hand_sgd_on_linear(self):
        w = np.array([[1.0]])
        y, cache = layers.linear_forward(np.array([[1.0]]), w, np.zeros(1))
        _, dy = compute_loss(y[:, 0], [0.0], "regression")
        _, dw, _ = layers.linear_backward(cache, dy.reshape(1, 1))
        assert (w - 0.1 * dw)[0, 0] == pytest.approx(0.9, abs=1e-15)

    def test_zero_gradient_leaves_params(self):
        net = build_network(NetworkConfig.gradcheck_default(), 2)
        before = {k: v.copy() for k, v in net.params.items()}
        x = np.zeros((4, 2, 16, 16))       # zero input -> prediction 0
        net, loss = backward_and_step(net, (x, np.zeros(4)),
                                      Hyperparams(learning_rate=0.5))
        assert loss == 0.0
        for name in before:
            assert np.array_equal(net.params[name], before[name])

    def test_deterministic_step(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(6, 2, 16, 16))
        t = rng.uniform(0, 6, size=6)
        a = build_network(NetworkConfig.gradcheck_default(), 3)
        b = build_network(NetworkConfig.gradcheck_default(), 3)
        hp = Hyperparams(learning_rate=0.001)
        a, la = backward_and_step(a, (x, t), hp)
        b, lb = backward_and_step(b, (x, t), hp)
        assert la == lb
        for name in a.params:
            assert np.array_equal(a.params[name], b.params[name])

    def test_oversize_batch_rejected(self):
        net = build_network(NetworkConfig.gradcheck_default(), 0)
        x = np.zeros((25, 2, 16, 16))
        with pytest.raises(ConfigurationError):
            backward_and_step(net, (x, np.zeros(25)), Hyperparams())

    def test_loss_head_mismatch(self):
        net = build_network(NetworkConfig.gradcheck_default(), 0)
        with pytest.raises(ConfigurationError):
            backward_and_step(net, (np.zeros((1, 2, 16, 16)), [0]),
                              Hyperparams(loss="binary"))

    def test_nonfinite_input_names_layer(self):
        net = build_network(NetworkConfig.gradcheck_default(), 0)
        x = np.full((2, 2, 16, 16), np.inf)
        with pytest.raises(TrainingError, match="input"):
            backward_and_step(net, (x, np.zeros(2)), Hyperparams())

    def test_shared_backbone_after_step(self):
        net = build_network(NetworkConfig(n_frames=3, input_height=16,
                                          input_width=16), 1)
        rng = np.random.default_rng(13)
        x = rng.normal(size=(4, 3, 16, 16))
        net, _ = backward_and_step(net, (x, rng.uniform(0, 6, size=4)),
                                   Hyperparams(learning_rate=0.01))
        frame = rng.normal(size=(16, 16))
        feats = frame_features(net, np.stack([frame] * 3))
        assert np.array_equal(feats[0], feats[1])
        assert np.array_equal(feats[1], feats[2])


@pytest.fixture(scope="module")
def memorization_set():
    rng = np.random.default_rng(42)
    return random_samples(20, rng)


class TestTrain:
    def test_memorizes_tiny_set(self, memorization_set):
        net = build_network(NetworkConfig.gradcheck_default(), 1)
        net, curve = train(net, memorization_set,
                           Hyperparams(epochs=200, seed=9))
        assert len(curve) == 200
        assert curve[-1] < 0.01

    def test_identical_seeds_identical_curves(self, memorization_set):
        hp = Hyperparams(epochs=5, seed=4)
        _, a = train(build_network(NetworkConfig.gradcheck_default(), 2),
                     memorization_set, hp)
        _, b = train(build_network(NetworkConfig.gradcheck_default(), 2),
                     memorization_set, hp)
        assert a == b

    def test_zero_lr_constant_curve(self, memorization_set):
        net = build_network(NetworkConfig.gradcheck_default(), 5)
        _, curve = train(net, memorization_set,
                         Hyperparams(learning_rate=0.0, epochs=4, seed=0))
        assert curve == pytest.approx([curve[0]] * 4, rel=1e-12)

    def test_divergence_aborts(self, memorization_set):
        net = build_network(NetworkConfig.gradcheck_default(), 1)
        with pytest.raises(TrainingError):
            train(net, memorization_set,
                  Hyperparams(learning_rate=0.05, epochs=200, seed=9))

    def test_requires_usable_samples(self):
        net = build_network(NetworkConfig.gradcheck_default(), 0)
        bare = [WindowSample(scene_id=0, end_index=0, n_frames=2,
                             _frames=np.zeros((2, 16, 16)))]
        with pytest.raises(ConfigurationError):
            train(net, bare, Hyperparams(epochs=1))

    def test_classification_uses_weighted_stream(self):
        rng = np.random.default_rng(21)
        samples = random_samples(40, rng, head="binary")
        cfg = NetworkConfig.gradcheck_default(head="binary")
        hp = Hyperparams(epochs=3, seed=7, loss="binary")
        _, a = train(build_network(cfg, 1), samples, hp)
        _, b = train(build_network(cfg, 1), samples, hp)
        assert a == b
        _, c = train(build_network(cfg, 1), samples,
                     Hyperparams(epochs=3, seed=8, loss="binary"))
        assert a != c      # different sampler stream draws different batches

    def test_multilabel_trains(self):
        rng = np.random.default_rng(22)
        samples = random_samples(40, rng, head="multilabel")
        cfg = NetworkConfig.gradcheck_default(head="multilabel")
        _, curve = train(build_network(cfg, 1), samples,
                         Hyperparams(epochs=8, seed=3, loss="multilabel"))
        assert curve[-1] < curve[0]


class TestGradCheck:
    def test_default_scaled_config_passes(self):
        report = grad_check(NetworkConfig.gradcheck_default(), seed=0)
        assert report.passed
        assert report.max_rel_err < 1e-4
        assert {l.name for l in report.layers} == \
            {name for name, _ in param_shapes(NetworkConfig.gradcheck_default())}

    @pytest.mark.parametrize("head", ["binary", "multilabel"])
    def test_classification_heads_pass(self, head):
        assert grad_check(tiny_cfg(head), seed=5).passed

    def test_sign_flip_detected(self):
        report = grad_check(NetworkConfig.gradcheck_default(), seed=0,
                            _corrupt="conv2_w")
        assert not report.passed
        bad = {l.name: l.max_rel_err for l in report.layers}
        assert bad["conv2_w"] == pytest.approx(2.0, abs=0.1)
        del bad["conv2_w"]
        assert max(bad.values()) < 1e-4

    def test_oversized_config_rejected(self):
        with pytest.raises(ConfigurationError):
            grad_check(NetworkConfig())


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = build_network(NetworkConfig(
            n_frames=2, input_height=16, input_width=16,
            input_mean=0.25, input_std=0.5), 77)
        path = str(tmp_path / "net.ckpt")
        save_network(net, path)
        loaded = load_network(path)
        assert loaded.config == net.config
        assert loaded.init_seed == 77
        for name in net.params:
            assert np.array_equal(loaded.params[name], net.params[name])
        w = np.random.default_rng(1).normal(size=(2, 16, 16))
        assert forward(loaded, w) == forward(net, w)

    def test_tamper_detected(self, tmp_path):
        net = build_network(NetworkConfig.gradcheck_default(), 0)
        path = tmp_path / "net.ckpt"
        save_network(net, str(path))
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="checksum"):
            load_network(str(path))

    def test_truncation_detected(self, tmp_path):
        net = build_network(NetworkConfig.gradcheck_default(), 0)
        path = tmp_path / "net.ckpt"
        save_network(net, str(path))
        path.write_bytes(path.read_bytes()[:100])
        with pytest.raises(CheckpointError):
            load_network(str(path))

    def test_wrong_magic(self, tmp_path):
        net = build_network(NetworkConfig.gradcheck_default(), 0)
        path = tmp_path / "net.ckpt"
        save_network(net, str(path))
        payload = bytearray(path.read_bytes()[:-32])
        payload[:8] = b"XXXXXXXX"
        path.write_bytes(bytes(payload) + hashlib.sha256(payload).digest())
        with pytest.raises(CheckpointError, match="magic"):
            load_network(str(path))

    def test_wrong_version(self, tmp_path):
        net = build_network(NetworkConfig.gradcheck_default(), 0)
        path = tmp_path / "net.ckpt"
        save_network(net, str(path))
        payload = bytearray(path.read_bytes()[:-32])
        struct.pack_into("<I", payload, 8, 99)
        path.write_bytes(bytes(payload) + hashlib.sha256(payload).digest())
        with pytest.raises(CheckpointError, match="version"):
            load_network(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_network(str(tmp_path / "absent.ckpt"))


@pytest.fixture(scope="module")
def small_bench():
    """20 small scenes, N=2 windows, train-pixel standardization stats."""
    scenes = [simulate_scene(SimConfig(seed=s, image_size=(32, 32)))
              for s in range(20)]
    ds = build_dataset(scenes, n_frames=2, test_ids=range(16, 20))
    train_s = eligible_samples(ds.train_samples(), "regression")
    test_s = eligible_samples(ds.test_samples(), "regression")
    px = stack_windows(train_s[:200])
    return train_s, test_s, float(px.mean()), float(px.std())


def fit_small(train_s, mu, sd, seed, epochs=5):
    cfg = NetworkConfig(n_frames=2, input_height=32, input_width=32,
                        input_mean=mu, input_std=sd)
    net = build_network(cfg, seed)
    net, _ = train(net, train_s, Hyperparams(epochs=epochs, seed=seed))
    return net


class TestTrainedBehavior:
    def test_temporal_order_sensitivity(self, small_bench):
        train_s, test_s, mu, sd = small_bench
        net = fit_small(train_s, mu, sd, seed=4)
        differs = sum(
            abs(forward(net, s.frames) - forward(net, s.frames[::-1])) > 1e-6
            for s in test_s)
        assert differs / len(test_s) >= 0.9

    def test_flip_augmentation_directional(self, small_bench):
        train_s, test_s, mu, sd = small_bench
        truth = targets_for(test_s, "regression")
        wins = 0
        for seed in range(5):
            plain = fit_small(train_s, mu, sd, seed)
            augmented = fit_small(flip_augment(train_s), mu, sd, seed)
            mae_plain = np.mean(np.abs(predict_batch(plain, test_s) - truth))
            mae_aug = np.mean(np.abs(predict_batch(augmented, test_s) - truth))
            wins += mae_aug < mae_plain
        assert wins >= 3
