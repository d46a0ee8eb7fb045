"""LPC formant tracking and the vowel-space-area proxy.

Formants come from the roots of an autocorrelation-method LPC polynomial
(Levinson-Durbin) on pre-emphasized voiced frames; the VSA proxy is
sqrt(var(F1) + var(F2)) over the retained frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_core import AudioBuffer, FrameSpec, frame_signal
from .errors import InsufficientFrames, LpcUnstable, NoVoicedFrames
from .prosody import PitchTrack

DEFAULT_PREEMPHASIS = 0.94
DEFAULT_BANDWIDTH_MAX_HZ = 400.0
FORMANT_MIN_HZ = 90.0
FORMANT_MARGIN_HZ = 50.0


@dataclass(frozen=True)
class FormantTrack:
    f1_hz: np.ndarray
    f2_hz: np.ndarray
    frame_times_s: np.ndarray

    @property
    def n_frames(self) -> int:
        return len(self.f1_hz)


@dataclass(frozen=True)
class ArticulationFeatures:
    vsa_proxy: float  # Hz


def lpc_order_for(sample_rate_hz: int) -> int:
    return int(round(2 + sample_rate_hz / 1000.0))


def levinson_durbin(autocorr: np.ndarray, order: int) -> np.ndarray:
    """Solve the Yule-Walker equations; returns LPC coefficients
    [1, a_1, ..., a_p]. Raises LpcUnstable when a reflection coefficient
    reaches magnitude 1."""
    a = np.zeros(order + 1)
    a[0] = 1.0
    err = autocorr[0]
    if err <= 0:
        raise LpcUnstable("zero-energy frame")
    for i in range(1, order + 1):
        prev = a[1:i].copy()
        acc = autocorr[i] + np.dot(prev, autocorr[i - 1 : 0 : -1])
        k = -acc / err
        if not np.isfinite(k) or abs(k) >= 1.0:
            raise LpcUnstable(f"reflection coefficient |k|={abs(k):.3f} at order {i}")
        a[1:i] = prev + k * prev[::-1]
        a[i] = k
        err *= 1.0 - k * k
    return a


def _frame_formants(frame, fs, order, bw_max):
    """Candidate (F1, F2) for one pre-emphasized frame, or None."""
    autocorr = np.correlate(frame, frame, mode="full")[len(frame) - 1 :][: order + 1]
    coeffs = levinson_durbin(autocorr, order)
    roots = np.roots(coeffs)
    roots = roots[roots.imag > 0]
    freqs = np.angle(roots) * fs / (2.0 * np.pi)
    with np.errstate(divide="ignore"):
        bws = -np.log(np.abs(roots)) * fs / np.pi
    keep = (bws < bw_max) & (freqs > FORMANT_MIN_HZ) & (freqs < fs / 2 - FORMANT_MARGIN_HZ)
    freqs = np.sort(freqs[keep])
    if len(freqs) < 2:
        return None
    return float(freqs[0]), float(freqs[1])


def track_formants(
    audio: AudioBuffer,
    pitch: PitchTrack,
    preemphasis: float = DEFAULT_PREEMPHASIS,
    bandwidth_max_hz: float = DEFAULT_BANDWIDTH_MAX_HZ,
) -> FormantTrack:
    """Per-voiced-frame F1/F2 via LPC root finding.

    Frames with fewer than two valid formant candidates are dropped;
    LpcUnstable frames are dropped too and the error surfaces only when
    every voiced frame drops that way.
    """
    if not np.any(pitch.voiced):
        raise NoVoicedFrames("no voiced frames")
    fs = audio.sample_rate_hz
    emphasized = AudioBuffer(
        np.concatenate([[audio.samples[0]], audio.samples[1:] - preemphasis * audio.samples[:-1]]),
        fs,
    )
    spec = FrameSpec(pitch.frame_len_ms, pitch.hop_ms, "hamming")
    series = frame_signal(emphasized, spec)
    order = lpc_order_for(fs)

    f1s, f2s, times = [], [], []
    all_times = series.frame_times_s()
    n_unstable = 0
    n_voiced = 0
    for i in np.flatnonzero(pitch.voiced):
        if i >= series.n_frames:
            continue
        n_voiced += 1
        try:
            pair = _frame_formants(series.frames[i], fs, order, bandwidth_max_hz)
        except LpcUnstable:
            n_unstable += 1
            continue
        if pair is None:
            continue
        f1s.append(pair[0])
        f2s.append(pair[1])
        times.append(all_times[i])

    if not f1s:
        if n_voiced and n_unstable == n_voiced:
            raise LpcUnstable("Levinson-Durbin unstable on every voiced frame")
        raise NoVoicedFrames("no voiced frame yielded two formant candidates")
    return FormantTrack(
        f1_hz=np.asarray(f1s), f2_hz=np.asarray(f2s), frame_times_s=np.asarray(times)
    )


def vsa_proxy(track: FormantTrack) -> float:
    """sqrt of (population variance of F1 + population variance of F2)."""
    if track.n_frames < 2:
        raise InsufficientFrames(f"{track.n_frames} formant frames, need >= 2")
    return float(np.sqrt(np.var(track.f1_hz) + np.var(track.f2_hz)))


def articulation_features(audio: AudioBuffer, pitch: PitchTrack) -> ArticulationFeatures:
    return ArticulationFeatures(vsa_proxy=vsa_proxy(track_formants(audio, pitch)))
