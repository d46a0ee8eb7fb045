"""Deterministic synthetic signals and a synthetic toy corpus.

These generators have analytically known ground truth (f0, cycle periods,
peak amplitudes, resonance targets), so they serve as oracles for the
extraction tests. The toy corpus stands in for the private clinical data:
"words" are sequences of vowel-like pulse-train segments, with cohort
severity simulated by scaling period jitter, inter-word pauses, and
formant-target scatter. That simulation validates plumbing and monotone
direction only; it is in no way clinically realistic.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .audio_core import AudioBuffer, write_wav
from .errors import InvalidSpec

SYNTH_KINDS = (
    "tone",
    "sawtooth",
    "pulse_train_formant",
    "jitter_tone",
    "shimmer_tone",
    "noise",
    "silence",
    "toy_word",
)

# Vowel-like resonance targets (F1, F2) per character of the toy alphabet.
VOWEL_FORMANTS = {
    "a": (700.0, 1200.0),
    "e": (500.0, 1800.0),
    "i": (300.0, 2300.0),
    "o": (450.0, 950.0),
    "u": (350.0, 800.0),
}

TOY_ALPHABET = "aeiou"

COHORTS = ("control", "pre_hd", "prodromal", "manifest")

# Severity knobs per cohort stage, strictly increasing with stage so
# downstream monotonicity tests have ground truth by construction. The
# gaps are sized so that every cohort's silence fraction exceeds the
# default VAD percentile; below that floor the dynamic threshold hides
# gap-duration differences.
STAGE_JITTER_EPS = {"control": 0.004, "pre_hd": 0.012, "prodromal": 0.025, "manifest": 0.05}
STAGE_GAP_S = {"control": 0.22, "pre_hd": 0.30, "prodromal": 0.40, "manifest": 0.52}
STAGE_FORMANT_SCATTER_HZ = {"control": 10.0, "pre_hd": 25.0, "prodromal": 45.0, "manifest": 70.0}


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    f0_hz: float = 100.0
    duration_s: float = 1.0
    sample_rate_hz: int = 16000
    epsilon: float = 0.0
    formants: tuple | None = None
    bandwidths: tuple = (80.0, 100.0)
    snr_db: float | None = None
    seed: int = 0
    amp: float = 0.9
    text: str | None = None

    def __post_init__(self):
        if self.kind not in SYNTH_KINDS:
            raise InvalidSpec(f"unknown synth kind {self.kind!r}")
        if self.kind != "toy_word" and self.duration_s <= 0:
            raise InvalidSpec("duration_s must be > 0")
        if self.kind in ("tone", "sawtooth", "pulse_train_formant", "jitter_tone", "shimmer_tone"):
            if self.f0_hz <= 0:
                raise InvalidSpec("f0_hz must be > 0")
        if self.kind == "pulse_train_formant" and self.formants is None:
            raise InvalidSpec("pulse_train_formant requires formant targets")
        if self.kind == "toy_word" and not self.text:
            raise InvalidSpec("toy_word requires text")


def _resonator_coeffs(freq_hz, bw_hz, fs):
    r = np.exp(-np.pi * bw_hz / fs)
    theta = 2.0 * np.pi * freq_hz / fs
    # unit DC-ish gain is irrelevant; output is re-normalized afterwards
    return [1.0], [1.0, -2.0 * r * np.cos(theta), r * r]


def _apply_resonators(excitation, formants, bandwidths, fs):
    out = excitation
    for freq, bw in zip(formants, bandwidths):
        b, a = _resonator_coeffs(freq, bw, fs)
        out = lfilter(b, a, out)
    return out


def _normalize(x, amp):
    peak = np.max(np.abs(x))
    if peak > 0:
        x = x * (amp / peak)
    return x


def _cycle_boundaries(duration_s, periods):
    """Cycle start times filling [0, duration) by repeating the period
    pattern (alternating when two periods are given)."""
    bounds = [0.0]
    k = 0
    while bounds[-1] < duration_s:
        bounds.append(bounds[-1] + periods[k % len(periods)])
        k += 1
    return np.asarray(bounds)


def _piecewise_cycles(duration_s, fs, periods, amps=(1.0,), shape="sin"):
    """Concatenated single-cycle waveforms with per-cycle period and peak
    amplitude; phase restarts at every cycle boundary.

    shape "sin" peaks a quarter-cycle in (used for amplitude-perturbed
    tones); shape "cos" peaks exactly at the cycle boundary, so
    peak-to-peak intervals equal the generated periods (used for
    period-perturbed tones).
    """
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    bounds = _cycle_boundaries(duration_s, periods)
    cycle_of = np.searchsorted(bounds, t, side="right") - 1
    local_t = t - bounds[cycle_of]
    period = np.asarray([periods[k % len(periods)] for k in range(len(bounds))])
    amp = np.asarray([amps[k % len(amps)] for k in range(len(bounds))])
    func = np.sin if shape == "sin" else np.cos
    return amp[cycle_of] * func(2.0 * np.pi * local_t / period[cycle_of])


def _pulse_train(duration_s, fs, periods):
    """Unit impulses at cycle boundaries (period pattern repeats)."""
    n = int(round(duration_s * fs))
    x = np.zeros(n)
    for b in _cycle_boundaries(duration_s, periods)[:-1]:
        i = int(round(b * fs))
        if i < n:
            x[i] = 1.0
    return x


def synth_signal(spec: SynthSpec) -> AudioBuffer:
    """Render a SynthSpec to audio. Pure function of its arguments."""
    fs = spec.sample_rate_hz
    n = int(round(spec.duration_s * fs))
    t = np.arange(n) / fs

    if spec.kind == "silence":
        x = np.zeros(n)
    elif spec.kind == "tone":
        x = spec.amp * np.sin(2.0 * np.pi * spec.f0_hz * t)
    elif spec.kind == "sawtooth":
        phase = (t * spec.f0_hz) % 1.0
        x = spec.amp * (2.0 * phase - 1.0)
    elif spec.kind == "noise":
        rng = np.random.default_rng(spec.seed)
        x = rng.standard_normal(n)
        x = _normalize(x, spec.amp)
    elif spec.kind == "jitter_tone":
        t0 = 1.0 / spec.f0_hz
        x = spec.amp * _piecewise_cycles(
            spec.duration_s, fs, (t0, t0 * (1.0 + spec.epsilon)), shape="cos"
        )
    elif spec.kind == "shimmer_tone":
        t0 = 1.0 / spec.f0_hz
        x = spec.amp * _piecewise_cycles(
            spec.duration_s, fs, (t0,), amps=(1.0, 1.0 - spec.epsilon)
        )
    elif spec.kind == "pulse_train_formant":
        t0 = 1.0 / spec.f0_hz
        periods = (t0, t0 * (1.0 + spec.epsilon)) if spec.epsilon else (t0,)
        x = _pulse_train(spec.duration_s, fs, periods)
        x = _apply_resonators(x, spec.formants, spec.bandwidths, fs)
        x = _normalize(x, spec.amp)
    elif spec.kind == "toy_word":
        x = _render_words(spec)
    else:  # pragma: no cover - guarded by SynthSpec validation
        raise InvalidSpec(spec.kind)

    if spec.snr_db is not None:
        x = _add_noise(x, spec.snr_db, spec.seed)

    return AudioBuffer(samples=np.clip(x, -1.0, 1.0), sample_rate_hz=fs)


def _add_noise(x, snr_db, seed):
    rng = np.random.default_rng(seed + 1)
    noise = rng.standard_normal(len(x))
    sig_pow = np.mean(x**2)
    if sig_pow == 0:
        return x
    noise_pow = sig_pow / (10.0 ** (snr_db / 10.0))
    x = x + noise * np.sqrt(noise_pow / np.mean(noise**2))
    return _normalize(x, 0.98)


def _render_words(
    spec: SynthSpec,
    char_dur_s: float = 0.12,
    gap_s: float = 0.08,
    edge_s: float = 0.05,
    scatter_hz: float = 0.0,
):
    """Render a transcript of toy vowel words: each character is a
    pulse-train vowel at its formant targets, words separated by silence."""
    fs = spec.sample_rate_hz
    rng = np.random.default_rng(spec.seed + 7)
    t0 = 1.0 / spec.f0_hz
    periods = (t0, t0 * (1.0 + spec.epsilon)) if spec.epsilon else (t0,)
    pieces = [np.zeros(int(round(edge_s * fs)))]
    for wi, word in enumerate(spec.text.split()):
        if wi > 0:
            pieces.append(np.zeros(int(round(gap_s * fs))))
        for ch in word:
            if ch not in VOWEL_FORMANTS:
                raise InvalidSpec(f"character {ch!r} outside the toy alphabet")
            f1, f2 = VOWEL_FORMANTS[ch]
            if scatter_hz:
                f1 += rng.normal(0.0, scatter_hz)
                f2 += rng.normal(0.0, scatter_hz)
            exc = _pulse_train(char_dur_s, fs, periods)
            seg = _apply_resonators(exc, (f1, f2), spec.bandwidths, fs)
            pieces.append(_normalize(seg, spec.amp))
    pieces.append(np.zeros(int(round(edge_s * fs))))
    return np.concatenate(pieces)


def _random_words(rng, n_words, min_len=2, max_len=3):
    words = []
    for _ in range(n_words):
        length = int(rng.integers(min_len, max_len + 1))
        chars = [TOY_ALPHABET[int(rng.integers(len(TOY_ALPHABET)))]]
        while len(chars) < length:
            c = TOY_ALPHABET[int(rng.integers(len(TOY_ALPHABET)))]
            if c != chars[-1]:  # adjacent repeats collapse under CTC decoding
                chars.append(c)
        words.append("".join(chars))
    return words


def synth_corpus(
    n_speakers: int,
    cohort_mix: dict,
    seed: int,
    out_dir,
    utterances_per_speaker: int = 2,
    sample_rate_hz: int = 16000,
):
    """Generate a toy corpus: WAV files plus a manifest.jsonl.

    cohort_mix maps cohort name -> speaker count and must sum to
    n_speakers. Returns the manifest path.
    """
    if n_speakers < 4:
        raise InvalidSpec("need at least 4 speakers")
    if sum(cohort_mix.values()) != n_speakers:
        raise InvalidSpec("cohort_mix must sum to n_speakers")
    for cohort in cohort_mix:
        if cohort not in COHORTS:
            raise InvalidSpec(f"unknown cohort {cohort!r}")

    audio_dir = os.path.join(out_dir, "audio")
    os.makedirs(audio_dir, exist_ok=True)
    rows = []
    spk_idx = 0
    for cohort in COHORTS:
        for _ in range(cohort_mix.get(cohort, 0)):
            speaker_id = f"spk{spk_idx:03d}"
            rng = np.random.default_rng([seed, spk_idx])
            f0 = float(rng.uniform(100.0, 200.0))
            eps = STAGE_JITTER_EPS[cohort]
            gap = STAGE_GAP_S[cohort]
            scatter = STAGE_FORMANT_SCATTER_HZ[cohort]
            for ui in range(utterances_per_speaker):
                words = _random_words(rng, int(rng.integers(2, 4)))
                text = " ".join(words)
                utt_id = f"{speaker_id}_u{ui:02d}"
                spec = SynthSpec(
                    kind="toy_word",
                    f0_hz=f0,
                    sample_rate_hz=sample_rate_hz,
                    epsilon=eps,
                    seed=int(rng.integers(2**31)),
                    text=text,
                )
                samples = _render_words(spec, gap_s=gap, edge_s=0.1, scatter_hz=scatter)
                wav_path = os.path.join(audio_dir, f"{utt_id}.wav")
                write_wav(wav_path, AudioBuffer(samples, sample_rate_hz))
                rows.append(
                    {
                        "utt_id": utt_id,
                        "speaker_id": speaker_id,
                        "cohort": cohort,
                        "audio_path": wav_path,
                        "reference": text,
                        "task": "prompted" if ui % 2 else "read",
                    }
                )
            spk_idx += 1

    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest_path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return manifest_path


def synth_hypotheses(
    records,
    model: str,
    seed: int,
    sub_p: float = 0.0,
    del_p: float = 0.0,
    ins_p: float = 0.0,
):
    """Derive hypothesis rows from references by seeded word corruption.

    Stands in for real model output (inference is out of scope); useful for
    exercising the scoring pipeline end to end.
    """
    rng = np.random.default_rng([seed, zlib.crc32(model.encode())])
    rows = []
    for rec in records:
        words = rec.reference.split()
        out = []
        for w in words:
            r = rng.random()
            if r < del_p:
                continue
            if r < del_p + sub_p:
                out.append(_random_words(rng, 1)[0])
            else:
                out.append(w)
            if rng.random() < ins_p:
                out.append(_random_words(rng, 1)[0])
        rows.append({"utt_id": rec.utt_id, "model": model, "hypothesis": " ".join(out)})
    return rows
