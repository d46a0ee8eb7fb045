import itertools

import numpy as np
import pytest

from speechmark.audio_core import FrameSpec
from speechmark.errors import AllMasked, InfeasibleTarget, ShapeMismatch
from speechmark.synth import SynthSpec, synth_signal
from speechmark.trainer import (
    JointLossConfig,
    ToyAdapterModel,
    ToyEncoderConfig,
    bio_loss,
    compute_gradients,
    ctc_greedy_decode,
    ctc_loss,
    load_params,
    log_mel,
    make_batch,
    masked_mean_pool,
    mel_filterbank,
    save_params,
    train,
)


def collapse(path, blank=0):
    out = []
    prev = None
    for p in path:
        if p != prev and p != blank:
            out.append(p)
        prev = p
    return tuple(out)


def ctc_nll_bruteforce(logits, target):
    """Sum softmax path probabilities over every frame-label path whose
    blank collapse equals the target."""
    T, V = logits.shape
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    total = 0.0
    for path in itertools.product(range(V), repeat=T):
        if collapse(path) == tuple(target):
            total += np.prod([probs[t, path[t]] for t in range(T)])
    return -np.log(total)


class TestLogMel:
    def test_filterbank_shape(self):
        fb = mel_filterbank(40, 512, 16000)
        assert fb.shape == (40, 257)
        assert np.all(fb >= 0)

    def test_filters_cover_band(self):
        fb = mel_filterbank(40, 512, 16000)
        coverage = fb.sum(axis=0)
        assert np.all(coverage[3:-3] > 0)

    def test_feature_shape(self, tone_150hz):
        cfg = ToyEncoderConfig()
        feats = log_mel(tone_150hz, cfg)
        assert feats.shape == (98, 40)

    def test_amplitude_doubling_adds_log4(self):
        cfg = ToyEncoderConfig()
        quiet = synth_signal(SynthSpec(kind="tone", f0_hz=200.0, amp=0.2))
        loud = synth_signal(SynthSpec(kind="tone", f0_hz=200.0, amp=0.4))
        a, b = log_mel(quiet, cfg), log_mel(loud, cfg)
        strong = a > a.max() - 4.0
        assert np.median(b[strong] - a[strong]) == pytest.approx(np.log(4.0), abs=0.02)


class TestVocab:
    def test_encode_decode(self):
        cfg = ToyEncoderConfig()
        tokens = cfg.encode_text("ae iu")
        assert tokens == (1, 2, 3, 5)
        assert cfg.decode_tokens(tokens) == "aeiu"

    def test_blank_reserved(self):
        cfg = ToyEncoderConfig()
        assert cfg.vocab_size == 6
        assert 0 not in cfg.encode_text("aeiou")

    def test_duplicate_vocab_rejected(self):
        with pytest.raises(ValueError):
            ToyEncoderConfig(vocab="aab")


class TestModel:
    def test_adapters_start_as_identity(self, rng):
        cfg = ToyEncoderConfig(n_mels=8, hidden_dim=16, adapter_dim=4)
        model = ToyAdapterModel(cfg)
        x = rng.standard_normal((2, 5, 8))
        hidden, _ = model.encode(x)
        # frozen-only forward
        h = x
        for layer in range(cfg.n_layers):
            h = np.tanh(h @ model.frozen[f"l{layer}_w"] + model.frozen[f"l{layer}_b"])
        assert hidden == pytest.approx(h)

    def test_frozen_params_never_move(self, rng):
        cfg = ToyEncoderConfig(n_mels=6, hidden_dim=12, adapter_dim=3)
        model = ToyAdapterModel(cfg)
        before = {k: v.copy() for k, v in model.frozen.items()}
        feats = [rng.standard_normal((12, 6)) for _ in range(3)]
        batch = make_batch(feats, [(1,), (2,), (1, 2)])
        train(model, batch, JointLossConfig(lam=0.0), steps=5, lr=0.05)
        for k in before:
            assert np.array_equal(model.frozen[k], before[k])

    def test_channel_mismatch(self, rng):
        model = ToyAdapterModel(ToyEncoderConfig(n_mels=8, hidden_dim=16, adapter_dim=4))
        with pytest.raises(ShapeMismatch):
            model.encode(rng.standard_normal((1, 4, 9)))


class TestCtcLoss:
    def test_hand_case_single_frame(self):
        logits = np.zeros((1, 1, 2))
        nll, _ = ctc_loss(logits, [(1,)], [1])
        assert nll == pytest.approx(-np.log(0.5))

    def test_hand_case_two_frames(self):
        # three of four uniform paths collapse to (1,)
        logits = np.zeros((1, 2, 2))
        nll, _ = ctc_loss(logits, [(1,)], [2])
        assert nll == pytest.approx(-np.log(0.75))

    def test_empty_target(self):
        logits = np.zeros((1, 3, 2))
        nll, _ = ctc_loss(logits, [()], [3])
        assert nll == pytest.approx(-np.log(0.125))

    def test_matches_bruteforce(self, rng):
        for _ in range(20):
            T = int(rng.integers(2, 5))
            V = int(rng.integers(2, 4))
            U = int(rng.integers(0, 3))
            target = tuple(int(rng.integers(1, V)) for _ in range(U))
            logits = rng.standard_normal((1, T, V))
            expected = ctc_nll_bruteforce(logits[0], target)
            if not np.isfinite(expected):
                continue
            nll, _ = ctc_loss(logits, [target], [T])
            assert nll == pytest.approx(expected, abs=1e-9)

    def test_gradient_matches_finite_differences(self, rng):
        logits = rng.standard_normal((2, 4, 3))
        targets = [(1, 2), (2,)]
        lengths = [4, 3]
        _, grad = ctc_loss(logits, targets, lengths)
        eps = 1e-6
        for idx in np.ndindex(logits.shape):
            lo, hi = logits.copy(), logits.copy()
            lo[idx] -= eps
            hi[idx] += eps
            f_lo, _ = ctc_loss(lo, targets, lengths)
            f_hi, _ = ctc_loss(hi, targets, lengths)
            assert grad[idx] == pytest.approx((f_hi - f_lo) / (2 * eps), abs=1e-6)

    def test_padded_frames_zero_grad(self, rng):
        logits = rng.standard_normal((1, 6, 3))
        _, grad = ctc_loss(logits, [(1,)], [4])
        assert np.all(grad[0, 4:] == 0.0)

    def test_infeasible_target(self):
        logits = np.zeros((1, 2, 3))
        with pytest.raises(InfeasibleTarget):
            ctc_loss(logits, [(1, 1)], [2])  # repeat needs 3 frames

    def test_greedy_decode(self):
        logits = np.full((1, 5, 3), -10.0)
        for t, v in enumerate([1, 1, 0, 2, 2]):
            logits[0, t, v] = 10.0
        assert ctc_greedy_decode(logits, [5]) == [(1, 2)]


class TestBioHead:
    def test_masked_pool(self):
        hidden = np.arange(12, dtype=float).reshape(1, 4, 3)
        mask = np.array([[True, True, False, False]])
        pooled = masked_mean_pool(hidden, mask)
        assert pooled[0] == pytest.approx(hidden[0, :2].mean(axis=0))

    def test_all_masked(self):
        with pytest.raises(AllMasked):
            masked_mean_pool(np.zeros((1, 3, 2)), np.zeros((1, 3), dtype=bool))

    def test_bio_gradcheck(self, rng):
        B, T, H, C = 3, 5, 4, 6
        hidden = rng.standard_normal((B, T, H))
        mask = np.ones((B, T), dtype=bool)
        mask[1, 3:] = False
        labels = np.array([0, 2, 5])
        w = rng.standard_normal((H, C))
        b = rng.standard_normal(C)
        _, d_hidden, d_w, d_b = bio_loss(hidden, mask, labels, w, b)
        eps = 1e-6
        for idx in np.ndindex(hidden.shape):
            hi, lo = hidden.copy(), hidden.copy()
            hi[idx] += eps
            lo[idx] -= eps
            f_hi = bio_loss(hi, mask, labels, w, b)[0]
            f_lo = bio_loss(lo, mask, labels, w, b)[0]
            assert d_hidden[idx] == pytest.approx((f_hi - f_lo) / (2 * eps), abs=1e-6)


class TestJointTraining:
    def small_batch(self, rng, with_labels=False):
        feats = [rng.standard_normal((10, 8)) for _ in range(4)]
        targets = [(1,), (2,), (1, 2), (2, 1)]
        labels = [0, 1, 2, 0] if with_labels else None
        return make_batch(feats, targets, labels)

    def test_full_gradcheck(self, rng):
        cfg = ToyEncoderConfig(n_mels=8, hidden_dim=10, adapter_dim=3, n_layers=2)
        model = ToyAdapterModel(cfg, n_bio_classes=3)
        batch = self.small_batch(rng, with_labels=True)
        loss_cfg = JointLossConfig(lam=0.1, active_family="phonation")
        breakdown, grads = compute_gradients(model, batch, loss_cfg)

        def total_loss():
            bd, _ = compute_gradients(model, batch, loss_cfg)
            return bd["total"]

        eps = 1e-6
        worst = 0.0
        for name, g in grads.items():
            flat = model.trainable[name].reshape(-1)
            for i in range(0, flat.size, max(1, flat.size // 5)):
                orig = flat[i]
                flat[i] = orig + eps
                hi = total_loss()
                flat[i] = orig - eps
                lo = total_loss()
                flat[i] = orig
                fd = (hi - lo) / (2 * eps)
                gi = g.reshape(-1)[i]
                denom = max(abs(fd), abs(gi), 1e-8)
                worst = max(worst, abs(fd - gi) / denom)
        assert worst < 1e-4

    def test_lambda_zero_matches_no_aux_run(self, rng):
        cfg = ToyEncoderConfig(n_mels=8, hidden_dim=10, adapter_dim=3)
        batch = self.small_batch(rng, with_labels=True)
        with_head = ToyAdapterModel(cfg, n_bio_classes=3)
        without = ToyAdapterModel(cfg)
        h1 = train(with_head, batch, JointLossConfig(lam=0.0), steps=10, lr=0.01)
        h2 = train(without, batch, JointLossConfig(lam=0.0, active_family="none"), steps=10, lr=0.01)
        for a, b in zip(h1, h2):
            assert a["total"] == b["total"]
        for k in without.trainable:
            assert np.array_equal(with_head.trainable[k], without.trainable[k])

    def test_loss_decreases(self, rng):
        cfg = ToyEncoderConfig(n_mels=8, hidden_dim=16, adapter_dim=4)
        model = ToyAdapterModel(cfg, n_bio_classes=3)
        batch = self.small_batch(rng, with_labels=True)
        history = train(model, batch, JointLossConfig(lam=0.1, active_family="prosody"), 60, 0.05)
        assert history[-1]["total"] < 0.5 * history[0]["total"]

    def test_missing_head_raises(self, rng):
        cfg = ToyEncoderConfig(n_mels=8, hidden_dim=10, adapter_dim=3)
        model = ToyAdapterModel(cfg)
        batch = self.small_batch(rng, with_labels=True)
        with pytest.raises(ShapeMismatch):
            compute_gradients(model, batch, JointLossConfig(lam=0.1, active_family="prosody"))


class TestCheckpoints:
    def test_roundtrip(self, tmp_path, rng):
        cfg = ToyEncoderConfig(n_mels=8, hidden_dim=10, adapter_dim=3)
        model = ToyAdapterModel(cfg, n_bio_classes=5)
        batch = make_batch([rng.standard_normal((8, 8))], [(3,)])
        train(model, batch, JointLossConfig(lam=0.0), 3, 0.01)
        path = tmp_path / "ckpt.npz"
        save_params(path, model)
        fresh = ToyAdapterModel(cfg, n_bio_classes=5)
        load_params(path, fresh)
        for k in model.trainable:
            assert np.array_equal(model.trainable[k], fresh.trainable[k])

    def test_bytes_deterministic(self, tmp_path):
        cfg = ToyEncoderConfig(n_mels=8, hidden_dim=10, adapter_dim=3)
        model = ToyAdapterModel(cfg)
        a, b = tmp_path / "a.npz", tmp_path / "b.npz"
        save_params(a, model)
        save_params(b, model)
        assert a.read_bytes() == b.read_bytes()


class TestMakeBatch:
    def test_padding_and_mask(self, rng):
        feats = [rng.standard_normal((5, 4)), rng.standard_normal((8, 4))]
        batch = make_batch(feats, [(1,), (2,)])
        assert batch.features.shape == (2, 8, 4)
        assert list(batch.input_lengths) == [5, 8]
        assert np.all(batch.features[0, 5:] == 0.0)
