import numpy as np
import pytest

from rehabhome.model import (
    Dataset,
    ImpairmentNet,
    ModelConfig,
    build_dataset,
    evaluate,
    gradient_check,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from rehabhome.model.checkpoint import checkpoint_bytes
from rehabhome.model.data import build_dataset_from_arrays
from rehabhome.model.evaluate import metrics_from_confusion
from rehabhome.model.layers import cross_entropy
from rehabhome.model.network import MlpHead
from rehabhome.gateway.segment import GaitSegment
from rehabhome.sim import ImpairmentLevel, default_gait_params, generate_walk


TINY = dict(map_size=12, encoder_channels=(4, 8), feature_dim=16, head_hidden=(16,))


def toy_arrays(n_per_class=20, size=12, seed=0):
    """Linearly separable maps: class k lights up block k."""
    rng = np.random.default_rng(seed)
    n = 3 * n_per_class
    left = rng.uniform(0, 0.08, (n, size, size))
    right = rng.uniform(0, 0.08, (n, size, size))
    labels = np.repeat(np.arange(3), n_per_class)
    third = size // 3
    for i, y in enumerate(labels):
        left[i, :, y * third : (y + 1) * third] += 0.9
        right[i, y * third : (y + 1) * third, :] += 0.9
    return np.clip(left, 0, 1), np.clip(right, 0, 1), labels


def segments_for(level, n_segments, seed):
    params = default_gait_params(level, seed)
    frames_l, frames_r = generate_walk(params, 5.0 * n_segments, seed=seed)
    ml = np.stack([f.channels() for f in frames_l])
    mr = np.stack([f.channels() for f in frames_r])
    return [
        GaitSegment(f"P{seed}", k * 5000, ml[k * 1000 : (k + 1) * 1000], mr[k * 1000 : (k + 1) * 1000], label=level)
        for k in range(n_segments)
    ]


class TestDatasetBuild:
    def test_balanced_80_20_split(self):
        left, right, labels = toy_arrays(n_per_class=100)
        ds = build_dataset_from_arrays(left, right, labels, seed=3)
        assert len(ds.train_idx) == 240 and len(ds.test_idx) == 60
        for c in range(3):
            assert (ds.labels[ds.train_idx] == c).sum() == 80
            assert (ds.labels[ds.test_idx] == c).sum() == 20

    def test_downsamples_to_minority(self):
        rng = np.random.default_rng(0)
        left = rng.uniform(0, 1, (300, 8, 8))
        right = rng.uniform(0, 1, (300, 8, 8))
        labels = np.array([0] * 120 + [1] * 100 + [2] * 80)
        ds = build_dataset_from_arrays(left, right, labels, seed=1)
        used = np.concatenate([ds.train_idx, ds.test_idx])
        for c in range(3):
            assert (ds.labels[used] == c).sum() == 80

    def test_partitions_disjoint_exhaustive(self):
        left, right, labels = toy_arrays(n_per_class=25)
        ds = build_dataset_from_arrays(left, right, labels, seed=9)
        overlap = set(ds.train_idx) & set(ds.test_idx)
        assert not overlap
        assert len(ds.train_idx) + len(ds.test_idx) == 75

    def test_same_seed_identical(self):
        left, right, labels = toy_arrays(n_per_class=10)
        a = build_dataset_from_arrays(left, right, labels, seed=5)
        b = build_dataset_from_arrays(left, right, labels, seed=5)
        assert np.array_equal(a.train_idx, b.train_idx)
        assert np.array_equal(a.test_idx, b.test_idx)

    def test_missing_class_errors(self):
        rng = np.random.default_rng(0)
        left = rng.uniform(0, 1, (20, 8, 8))
        labels = np.array([0] * 10 + [1] * 10)
        with pytest.raises(ValueError):
            build_dataset_from_arrays(left, left, labels, seed=0)

    def test_from_segments(self):
        segments = []
        for level in ImpairmentLevel:
            segments += segments_for(level, 2, seed=40 + level.index)
        ds = build_dataset(segments, seed=2, map_size=28)
        assert ds.left_maps.shape == (6, 28, 28)


class TestForward:
    def test_softmax_normalized(self):
        net = ImpairmentNet(ModelConfig(**TINY, seed=2))
        rng = np.random.default_rng(1)
        probs = net.forward_proba(rng.uniform(0, 1, (5, 12, 12)), rng.uniform(0, 1, (5, 12, 12)))
        assert np.all(probs >= 0)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)

    def test_untrained_uniform(self):
        net = ImpairmentNet(ModelConfig(**TINY, seed=3))
        rng = np.random.default_rng(2)
        probs = net.forward_proba(rng.uniform(0, 1, (4, 12, 12)), rng.uniform(0, 1, (4, 12, 12)))
        assert np.allclose(probs, 1.0 / 3.0)

    def test_inference_deterministic(self):
        net = ImpairmentNet(ModelConfig(**TINY, seed=4))
        rng = np.random.default_rng(3)
        left = rng.uniform(0, 1, (3, 12, 12))
        right = rng.uniform(0, 1, (3, 12, 12))
        a = net.forward(left, right, train=False)
        b = net.forward(left, right, train=False)
        assert np.array_equal(a, b)

    def test_shape_mismatch_errors(self):
        net = ImpairmentNet(ModelConfig(**TINY, seed=5))
        with pytest.raises(ValueError):
            net.forward(np.zeros((1, 8, 8)), np.zeros((1, 8, 8)))

    def test_tie_breaks_to_lower_severity(self):
        net = ImpairmentNet(ModelConfig(**TINY, seed=6))  # uniform output
        level = predict(net, np.zeros((12, 12)), np.zeros((12, 12)))
        assert level is ImpairmentLevel.MILD


class TestTraining:
    def test_separable_toy_reaches_full_train_accuracy(self):
        left, right, labels = toy_arrays(n_per_class=15)
        ds = build_dataset_from_arrays(left, right, labels, seed=7)
        cfg = ModelConfig(**TINY, seed=7, max_epochs=50, lr=1e-3, batch_size=16)
        tm = train(cfg, ds)
        l, r, y = ds.subset(ds.train_idx)
        preds = np.argmax(tm.net.forward_proba(l, r), axis=1)
        assert (preds == y).mean() == 1.0

    def test_training_deterministic(self):
        left, right, labels = toy_arrays(n_per_class=8)
        cfg = ModelConfig(**TINY, seed=8, max_epochs=5)
        a = train(cfg, build_dataset_from_arrays(left, right, labels, seed=8))
        b = train(cfg, build_dataset_from_arrays(left, right, labels, seed=8))
        assert a.history == b.history
        for pa, pb in zip(a.net.parameters(), b.net.parameters()):
            assert np.array_equal(pa.value, pb.value)

    def test_early_stopping_contract(self):
        left, right, labels = toy_arrays(n_per_class=12)
        ds = build_dataset_from_arrays(left, right, labels, seed=9)
        cfg = ModelConfig(**TINY, seed=9, max_epochs=200, patience=5, lr=1e-3)
        tm = train(cfg, ds)
        assert tm.epochs_run <= tm.best_epoch + 1 + cfg.patience
        val_losses = [row["val_loss"] for row in tm.history]
        assert tm.history[tm.best_epoch]["val_loss"] == min(val_losses)

    def test_history_csv(self):
        left, right, labels = toy_arrays(n_per_class=6)
        ds = build_dataset_from_arrays(left, right, labels, seed=10)
        tm = train(ModelConfig(**TINY, seed=10, max_epochs=3), ds)
        lines = tm.history_csv().strip().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss"
        assert len(lines) == tm.epochs_run + 1


class TestEvaluate:
    def test_perfect_predictions(self):
        confusion = np.diag([10, 12, 9])
        rep = metrics_from_confusion(confusion)
        assert rep.weighted_accuracy == 1.0
        assert rep.macro_precision == rep.macro_recall == rep.macro_f1 == 1.0

    def test_hand_computed_macro_recall(self):
        rep = metrics_from_confusion([[8, 2, 0], [1, 9, 0], [0, 0, 10]])
        assert rep.macro_recall == pytest.approx((0.8 + 0.9 + 1.0) / 3.0)

    def test_weighted_accuracy_is_recall_weighted_by_share(self):
        confusion = np.array([[8, 2, 0], [1, 9, 0], [0, 0, 10]])
        rep = metrics_from_confusion(confusion)
        assert rep.weighted_accuracy == pytest.approx(27 / 30)

    def test_absent_predicted_class_flagged(self):
        rep = metrics_from_confusion([[5, 0, 0], [5, 0, 0], [0, 0, 5]])
        assert "moderate" in rep.missing_predicted_classes
        assert rep.per_class["moderate"]["precision"] == 0.0

    def test_confusion_row_sums(self):
        left, right, labels = toy_arrays(n_per_class=10)
        ds = build_dataset_from_arrays(left, right, labels, seed=12)
        net = ImpairmentNet(ModelConfig(**TINY, seed=12))
        rep = evaluate(net, ds)
        sums = np.array(rep.confusion).sum(axis=1)
        for c in range(3):
            assert sums[c] == (ds.labels[ds.test_idx] == c).sum()


class TestGradientCheck:
    def test_full_tiny_model_below_1e_4(self):
        cfg = ModelConfig(map_size=8, encoder_channels=(3, 4), feature_dim=6, head_hidden=(8,), seed=13)
        net = ImpairmentNet(cfg)
        rng = np.random.default_rng(4)
        res = gradient_check(net, rng.uniform(0, 1, (2, 8, 8)), rng.uniform(0, 1, (2, 8, 8)), np.array([0, 2]))
        assert res.max_rel_error < 1e-4
        assert res.n_checked == sum(p.value.size for p in net.parameters())

    def test_one_layer_head_below_1e_6(self):
        # independent finite-difference oracle written here, not the library's
        rng = np.random.default_rng(5)
        head = MlpHead([8, 3], dropout_p=0.0, rng=rng, dropout_rng=rng)
        head.out.W.value[...] = rng.normal(0, 0.5, size=head.out.W.value.shape)
        head.out.b.value[...] = rng.normal(0, 0.5, size=head.out.b.value.shape)
        x = rng.normal(size=(1, 8))
        y = np.array([1])

        def loss_fn():
            return cross_entropy(head.forward(x), y)[0]

        for p in head.sublayers()[-1].parameters():
            p.zero_grad()
        loss, dlogits = cross_entropy(head.forward(x), y)
        head.backward(dlogits)
        eps = 1e-6
        worst = 0.0
        for p in [head.out.W, head.out.b]:
            flat = p.value.reshape(-1)
            grads = p.grad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up = loss_fn()
                flat[i] = orig - eps
                down = loss_fn()
                flat[i] = orig
                numeric = (up - down) / (2 * eps)
                denom = max(abs(numeric), abs(grads[i]), 1e-8)
                worst = max(worst, abs(numeric - grads[i]) / denom)
        assert worst < 1e-6

    def test_zero_input_zero_first_layer_gradients(self):
        cfg = ModelConfig(map_size=8, encoder_channels=(3,), feature_dim=4, head_hidden=(6,), seed=14)
        net = ImpairmentNet(cfg)
        net.zero_grad()
        logits = net.forward(np.zeros((1, 8, 8)), np.zeros((1, 8, 8)), train=False)
        _, dlogits = cross_entropy(logits, np.array([0]))
        net.backward(dlogits)
        for p in net.parameters():
            if p.name.endswith("conv0.W"):
                assert np.all(p.grad == 0.0)


class TestCheckpoint:
    def test_roundtrip_identical_outputs(self, tmp_path):
        left, right, labels = toy_arrays(n_per_class=6)
        ds = build_dataset_from_arrays(left, right, labels, seed=15)
        tm = train(ModelConfig(**TINY, seed=15, max_epochs=3), ds)
        path = tmp_path / "model.ckpt"
        save_checkpoint(tm.net, path)
        loaded = load_checkpoint(path)
        rng = np.random.default_rng(6)
        l = rng.uniform(0, 1, (4, 12, 12))
        r = rng.uniform(0, 1, (4, 12, 12))
        assert np.array_equal(tm.net.forward(l, r), loaded.forward(l, r))

    def test_bytes_deterministic(self):
        net = ImpairmentNet(ModelConfig(**TINY, seed=16))
        assert checkpoint_bytes(net) == checkpoint_bytes(net)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.ckpt"
        path.write_bytes(b"nope" + b"\x00" * 32)
        with pytest.raises(ValueError):
            load_checkpoint(path)
