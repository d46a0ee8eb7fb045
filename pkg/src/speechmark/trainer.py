"""Desk-scale joint trainer: a tiny frozen encoder with trainable
bottleneck adapters, a CTC transcription objective, and a linear
biomarker head over masked mean-pooled encoder states.

total loss = ctc + lambda * bio, with lambda = 0.1 by default and at most
one auxiliary biomarker family active per run. Everything is float64
numpy with hand-written backprop so gradients can be checked against
finite differences and the CTC recursion against path enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_core import AudioBuffer, FrameSpec, frame_signal
from .errors import AllMasked, InfeasibleTarget, ShapeMismatch

BLANK = 0


@dataclass(frozen=True)
class ToyEncoderConfig:
    n_mels: int = 40
    frame: FrameSpec = field(default_factory=FrameSpec)
    n_layers: int = 2
    hidden_dim: int = 64
    adapter_dim: int = 16
    vocab: str = "aeiou"  # characters; blank is implicit at index 0
    seed: int = 0

    def __post_init__(self):
        if self.adapter_dim >= self.hidden_dim:
            raise ValueError("adapter_dim must be < hidden_dim")
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("vocab characters must be unique")

    @property
    def vocab_size(self) -> int:
        return len(self.vocab) + 1  # + blank

    def encode_text(self, text: str) -> tuple:
        """Character targets (spaces dropped); blank never appears."""
        return tuple(self.vocab.index(c) + 1 for c in text if c != " ")

    def decode_tokens(self, tokens) -> str:
        return "".join(self.vocab[t - 1] for t in tokens)


@dataclass(frozen=True)
class JointLossConfig:
    lam: float = 0.1
    active_family: str = "none"  # none | prosody | phonation | articulation

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.active_family not in ("none", "prosody", "phonation", "articulation"):
            raise ValueError(f"unknown family {self.active_family!r}")


@dataclass
class TrainBatch:
    features: np.ndarray  # (B, T, n_mels)
    mask: np.ndarray  # (B, T) bool, True on valid frames
    targets: list  # per-utterance token tuples
    family_labels: np.ndarray | None = None  # (B,) ints when a family is active

    def __post_init__(self):
        if self.features.shape[:2] != self.mask.shape:
            raise ShapeMismatch("mask shape must match (batch, frames)")

    @property
    def input_lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1).astype(int)


# --- log-mel frontend ---

def mel_filterbank(n_mels: int, n_fft: int, sample_rate_hz: int) -> np.ndarray:
    """Triangular mel filters spanning 0..rate/2, (n_mels, n_fft//2+1)."""
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    mel_pts = np.linspace(0.0, hz_to_mel(sample_rate_hz / 2), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bins = np.fft.rfftfreq(n_fft, 1.0 / sample_rate_hz)
    fb = np.zeros((n_mels, len(bins)))
    for i in range(n_mels):
        lo, center, hi = hz_pts[i], hz_pts[i + 1], hz_pts[i + 2]
        up = (bins - lo) / (center - lo)
        down = (hi - bins) / (hi - center)
        fb[i] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def log_mel(audio: AudioBuffer, cfg: ToyEncoderConfig) -> np.ndarray:
    """Power spectrogram through a mel filterbank, then log(x + 1e-6)."""
    series = frame_signal(audio, cfg.frame)
    n_fft = 1
    while n_fft < series.frames.shape[1]:
        n_fft *= 2
    power = np.abs(np.fft.rfft(series.frames, n=n_fft, axis=1)) ** 2
    fb = mel_filterbank(cfg.n_mels, n_fft, audio.sample_rate_hz)
    return np.log(power @ fb.T + 1e-6)


# --- model ---

class ToyAdapterModel:
    """Frozen per-frame MLP backbone + trainable residual adapters,
    a CTC vocabulary head, and an optional linear biomarker head.

    Parameter layout: ``frozen`` never receives updates; everything in
    ``trainable`` does. The up-projection of each adapter starts at zero,
    so the initial encoder output equals the frozen backbone's.
    """

    def __init__(self, cfg: ToyEncoderConfig, n_bio_classes: int | None = None):
        self.cfg = cfg
        self.n_bio_classes = n_bio_classes
        rng = np.random.default_rng(cfg.seed)
        self.frozen = {}
        self.trainable = {}
        dim_in = cfg.n_mels
        for layer in range(cfg.n_layers):
            scale = 1.0 / np.sqrt(dim_in)
            self.frozen[f"l{layer}_w"] = rng.normal(0.0, scale, (dim_in, cfg.hidden_dim))
            self.frozen[f"l{layer}_b"] = rng.normal(0.0, 0.1, cfg.hidden_dim)
            self.trainable[f"l{layer}_down_w"] = rng.normal(
                0.0, 1.0 / np.sqrt(cfg.hidden_dim), (cfg.hidden_dim, cfg.adapter_dim)
            )
            self.trainable[f"l{layer}_down_b"] = np.zeros(cfg.adapter_dim)
            self.trainable[f"l{layer}_up_w"] = np.zeros((cfg.adapter_dim, cfg.hidden_dim))
            self.trainable[f"l{layer}_up_b"] = np.zeros(cfg.hidden_dim)
            dim_in = cfg.hidden_dim
        self.trainable["ctc_w"] = rng.normal(
            0.0, 1.0 / np.sqrt(cfg.hidden_dim), (cfg.hidden_dim, cfg.vocab_size)
        )
        self.trainable["ctc_b"] = np.zeros(cfg.vocab_size)
        if n_bio_classes is not None:
            self.trainable["bio_w"] = rng.normal(
                0.0, 1.0 / np.sqrt(cfg.hidden_dim), (cfg.hidden_dim, n_bio_classes)
            )
            self.trainable["bio_b"] = np.zeros(n_bio_classes)

    # -- forward --

    def encode(self, features: np.ndarray):
        """Per-frame hidden states plus a cache for backprop."""
        if features.shape[-1] != self.cfg.n_mels:
            raise ShapeMismatch(
                f"features have {features.shape[-1]} channels, expected {self.cfg.n_mels}"
            )
        cache = {"inputs": [], "h": [], "down": []}
        x = features
        for layer in range(self.cfg.n_layers):
            cache["inputs"].append(x)
            h = np.tanh(x @ self.frozen[f"l{layer}_w"] + self.frozen[f"l{layer}_b"])
            down = np.tanh(
                h @ self.trainable[f"l{layer}_down_w"] + self.trainable[f"l{layer}_down_b"]
            )
            up = down @ self.trainable[f"l{layer}_up_w"] + self.trainable[f"l{layer}_up_b"]
            cache["h"].append(h)
            cache["down"].append(down)
            x = h + up
        cache["hidden"] = x
        return x, cache

    def encode_backward(self, cache, d_hidden, grads):
        """Backprop d_hidden through adapters; frozen weights get no
        gradient (but gradients do flow through their affine maps)."""
        dx = d_hidden
        for layer in range(self.cfg.n_layers - 1, -1, -1):
            h = cache["h"][layer]
            down = cache["down"][layer]
            flat_dx = dx.reshape(-1, dx.shape[-1])
            grads[f"l{layer}_up_w"] += down.reshape(-1, down.shape[-1]).T @ flat_dx
            grads[f"l{layer}_up_b"] += flat_dx.sum(axis=0)
            d_down = dx @ self.trainable[f"l{layer}_up_w"].T
            d_down_pre = d_down * (1.0 - down**2)
            flat_dd = d_down_pre.reshape(-1, d_down_pre.shape[-1])
            grads[f"l{layer}_down_w"] += h.reshape(-1, h.shape[-1]).T @ flat_dd
            grads[f"l{layer}_down_b"] += flat_dd.sum(axis=0)
            dh = dx + d_down_pre @ self.trainable[f"l{layer}_down_w"].T
            dz = dh * (1.0 - h**2)
            dx = dz @ self.frozen[f"l{layer}_w"].T
        return dx

    def ctc_logits(self, hidden: np.ndarray) -> np.ndarray:
        return hidden @ self.trainable["ctc_w"] + self.trainable["ctc_b"]

    def bio_logits(self, pooled: np.ndarray) -> np.ndarray:
        return pooled @ self.trainable["bio_w"] + self.trainable["bio_b"]

    def zero_grads(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.trainable.items()}


# --- CTC ---

def _extend_targets(targets, vocab_size):
    """Blank-interleaved target matrices; returns (ext, ext_lengths)."""
    s_max = max((2 * len(t) + 1 for t in targets), default=1)
    ext = np.zeros((len(targets), s_max), dtype=int)
    lengths = np.zeros(len(targets), dtype=int)
    for b, t in enumerate(targets):
        for u, tok in enumerate(t):
            if not (1 <= tok < vocab_size):
                raise ShapeMismatch(f"target token {tok} outside vocabulary")
            ext[b, 2 * u + 1] = tok
        lengths[b] = 2 * len(t) + 1
    return ext, lengths


def _log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def ctc_loss(logits: np.ndarray, targets, input_lengths):
    """Batched CTC negative log-likelihood and its gradient w.r.t. logits.

    logits: (B, T, V) with blank at index 0; targets: per-utterance token
    tuples; input_lengths: valid frame counts. Returns (mean NLL over the
    batch, d mean-NLL / d logits). Gradient rows beyond an utterance's
    length are zero.
    """
    B, T, V = logits.shape
    input_lengths = np.asarray(input_lengths, dtype=int)
    for b, t in enumerate(targets):
        required = len(t) + sum(1 for u in range(1, len(t)) if t[u] == t[u - 1])
        if input_lengths[b] < required:
            raise InfeasibleTarget(
                f"utterance {b}: target needs {required} frames, got {input_lengths[b]}"
            )

    log_probs = _log_softmax(logits)
    ext, ext_len = _extend_targets(targets, V)
    S = ext.shape[1]
    neg_inf = -np.inf

    # skip transition s-2 -> s allowed for non-blank labels that differ
    # from the label two slots back
    skip_ok = np.zeros((B, S), dtype=bool)
    skip_ok[:, 2:] = (ext[:, 2:] != BLANK) & (ext[:, 2:] != ext[:, :-2])

    batch_idx = np.arange(B)[:, None]
    emit = lambda t: log_probs[np.arange(B)[:, None], t, ext]  # (B, S)

    s_idx = np.arange(S)[None, :]
    valid_s = s_idx < ext_len[:, None]

    alphas = np.full((B, T, S), neg_inf)
    a = np.full((B, S), neg_inf)
    a[:, 0] = log_probs[:, 0, BLANK]
    if S > 1:
        has_label = ext_len > 1
        a[has_label, 1] = log_probs[has_label, 0, ext[has_label, 1]]
    a[~valid_s] = neg_inf
    alphas[:, 0] = a
    for t in range(1, T):
        shift1 = np.full_like(a, neg_inf)
        shift1[:, 1:] = a[:, :-1]
        shift2 = np.full_like(a, neg_inf)
        shift2[:, 2:] = a[:, :-2]
        shift2[~skip_ok] = neg_inf
        with np.errstate(invalid="ignore"):
            new = np.logaddexp(np.logaddexp(a, shift1), shift2) + emit(t)
        new[~valid_s] = neg_inf
        active = (t < input_lengths)[:, None]
        a = np.where(active, new, a)
        alphas[:, t] = a

    last = ext_len - 1
    tail = np.full(B, neg_inf)
    with np.errstate(invalid="ignore"):
        final_main = alphas[batch_idx[:, 0], input_lengths - 1, last]
        final_prev = np.where(
            last - 1 >= 0, alphas[batch_idx[:, 0], input_lengths - 1, np.maximum(last - 1, 0)], neg_inf
        )
        log_p = np.logaddexp(final_main, final_prev)
    nll = -log_p

    # beta excludes the emission at t, so alpha + beta sums to log_p at
    # every valid t
    betas = np.full((B, T, S), neg_inf)
    bvec = np.full((B, S), neg_inf)
    for b in range(B):
        bvec[b, ext_len[b] - 1] = 0.0
        if ext_len[b] - 2 >= 0:
            bvec[b, ext_len[b] - 2] = 0.0
    betas[batch_idx[:, 0], input_lengths - 1] = bvec
    for t in range(T - 2, -1, -1):
        nxt = bvec + emit(t + 1)
        shift1 = np.full_like(bvec, neg_inf)
        shift1[:, :-1] = nxt[:, 1:]
        shift2 = np.full_like(bvec, neg_inf)
        shift2[:, :-2] = np.where(skip_ok[:, 2:], nxt[:, 2:], neg_inf)
        with np.errstate(invalid="ignore"):
            new = np.logaddexp(np.logaddexp(nxt, shift1), shift2)
        new[~valid_s] = neg_inf
        active = (t < input_lengths - 1)[:, None]
        bvec = np.where(active, new, bvec)
        rows = t < input_lengths - 1
        betas[rows, t] = bvec[rows]

    # posterior over extended-label slots, scattered back to the vocabulary
    with np.errstate(invalid="ignore"):
        log_q = alphas + betas - log_p[:, None, None]
    q = np.where(np.isfinite(log_q), np.exp(log_q), 0.0)
    gamma = np.zeros((B, T, V))
    t_grid = np.arange(T)[:, None]
    for b in range(B):
        np.add.at(gamma[b], (t_grid, ext[b][None, :]), q[b])

    frame_active = (np.arange(T)[None, :] < input_lengths[:, None])[:, :, None]
    d_logits = np.where(frame_active, np.exp(log_probs) - gamma, 0.0) / B
    return float(np.mean(nll)), d_logits


def ctc_greedy_decode(logits: np.ndarray, input_lengths) -> list:
    """Per-frame argmax, collapse repeats, drop blanks."""
    out = []
    for b in range(logits.shape[0]):
        path = np.argmax(logits[b, : input_lengths[b]], axis=-1)
        tokens = []
        prev = None
        for p in path:
            if p != prev and p != BLANK:
                tokens.append(int(p))
            prev = p
        out.append(tuple(tokens))
    return out


# --- biomarker head ---

def masked_mean_pool(hidden: np.ndarray, mask: np.ndarray) -> np.ndarray:
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        raise AllMasked("an utterance has no unmasked frames")
    return (hidden * mask[:, :, None]).sum(axis=1) / counts[:, None]


def bio_loss(hidden: np.ndarray, mask: np.ndarray, labels: np.ndarray, w, b):
    """Cross-entropy of a linear head over masked mean-pooled states.

    Returns (loss, d_hidden, d_w, d_b); the loss is averaged over the
    batch.
    """
    B = hidden.shape[0]
    pooled = masked_mean_pool(hidden, mask)
    logits = pooled @ w + b
    log_probs = _log_softmax(logits)
    loss = float(-np.mean(log_probs[np.arange(B), labels]))
    d_logits = np.exp(log_probs)
    d_logits[np.arange(B), labels] -= 1.0
    d_logits /= B
    d_w = pooled.T @ d_logits
    d_b = d_logits.sum(axis=0)
    d_pooled = d_logits @ w.T
    counts = mask.sum(axis=1)
    d_hidden = (d_pooled[:, None, :] * mask[:, :, None]) / counts[:, None, None]
    return loss, d_hidden, d_w, d_b


# --- joint training ---

def compute_gradients(model: ToyAdapterModel, batch: TrainBatch, cfg: JointLossConfig):
    """Forward + backward over one batch.

    Returns (breakdown, grads): breakdown has keys total/asr/bio and
    grads covers every trainable parameter.
    """
    hidden, cache = model.encode(batch.features)
    logits = model.ctc_logits(hidden)
    lengths = batch.input_lengths
    asr, d_logits = ctc_loss(logits, batch.targets, lengths)

    grads = model.zero_grads()
    flat_dl = d_logits.reshape(-1, d_logits.shape[-1])
    grads["ctc_w"] += hidden.reshape(-1, hidden.shape[-1]).T @ flat_dl
    grads["ctc_b"] += flat_dl.sum(axis=0)
    d_hidden = d_logits @ model.trainable["ctc_w"].T

    bio = 0.0
    if cfg.active_family != "none" and cfg.lam > 0.0:
        if "bio_w" not in model.trainable:
            raise ShapeMismatch("model has no biomarker head")
        if batch.family_labels is None:
            raise ShapeMismatch("batch carries no family labels")
        bio, d_hidden_bio, d_w, d_b = bio_loss(
            hidden,
            batch.mask,
            batch.family_labels,
            model.trainable["bio_w"],
            model.trainable["bio_b"],
        )
        grads["bio_w"] += cfg.lam * d_w
        grads["bio_b"] += cfg.lam * d_b
        d_hidden = d_hidden + cfg.lam * d_hidden_bio

    model.encode_backward(cache, d_hidden, grads)
    total = asr + cfg.lam * bio
    return {"total": total, "asr": asr, "bio": bio}, grads


def train_step(model: ToyAdapterModel, batch: TrainBatch, cfg: JointLossConfig, lr: float):
    """One full-batch gradient-descent step on adapters and heads."""
    breakdown, grads = compute_gradients(model, batch, cfg)
    for name, grad in grads.items():
        model.trainable[name] -= lr * grad
    return breakdown


def train(model: ToyAdapterModel, batch: TrainBatch, cfg: JointLossConfig, steps: int, lr: float):
    """Fixed-schedule training loop; returns the per-step loss history as
    a list of breakdown dicts."""
    history = []
    for _ in range(steps):
        history.append(train_step(model, batch, cfg, lr))
    return history


def save_params(path, model: ToyAdapterModel) -> None:
    """Write all parameters as an npz with zeroed zip timestamps, so the
    checkpoint bytes depend only on the parameter values."""
    import io
    import zipfile

    arrays = {f"frozen/{k}": v for k, v in model.frozen.items()}
    arrays.update({f"trainable/{k}": v for k, v in model.trainable.items()})
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]))
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def load_params(path, model: ToyAdapterModel) -> None:
    """Restore parameters saved by save_params into the model."""
    with np.load(path) as data:
        for k in model.frozen:
            model.frozen[k] = data[f"frozen/{k}.npy"]
        for k in model.trainable:
            model.trainable[k] = data[f"trainable/{k}.npy"]


def make_batch(feature_list, target_list, family_labels=None) -> TrainBatch:
    """Pad variable-length feature sequences into one batch with masks."""
    B = len(feature_list)
    T = max(f.shape[0] for f in feature_list)
    F = feature_list[0].shape[1]
    features = np.zeros((B, T, F))
    mask = np.zeros((B, T), dtype=bool)
    for b, f in enumerate(feature_list):
        features[b, : f.shape[0]] = f
        mask[b, : f.shape[0]] = True
    labels = None if family_labels is None else np.asarray(family_labels, dtype=int)
    return TrainBatch(features=features, mask=mask, targets=list(target_list), family_labels=labels)
