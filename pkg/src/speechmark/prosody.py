"""Percentile-threshold VAD and prosodic measures: speech-rate proxy,
pause-to-speech ratio, and f0 variability.

The pitch tracker is a plain normalized-autocorrelation tracker with
parabolic peak interpolation; a frame counts as voiced only when both its
periodicity clears the voicing threshold and its energy clears the VAD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_core import AudioBuffer, FrameSpec, frame_raw, frame_rms, frame_signal
from .errors import (
    EmptySeries,
    InsufficientVoicedFrames,
    InvalidRange,
    NonpositiveDuration,
)

DEFAULT_VAD_PERCENTILE = 30.0
DEFAULT_VAD_SMOOTH = 5
DEFAULT_F0_MIN_HZ = 75.0
DEFAULT_F0_MAX_HZ = 500.0
DEFAULT_VOICING_THRESHOLD = 0.45


@dataclass(frozen=True)
class VadTrack:
    """Binary per-frame voice activity indicator."""

    v: np.ndarray  # {0,1} per frame
    hop_ms: float
    threshold: float
    percentile: float

    @property
    def n_frames(self) -> int:
        return len(self.v)


@dataclass(frozen=True)
class PitchTrack:
    """Per-frame f0 (NaN when unvoiced) and autocorrelation periodicity."""

    f0_hz: np.ndarray
    periodicity: np.ndarray
    voiced: np.ndarray  # bool mask
    hop_ms: float
    frame_len_ms: float
    sample_rate_hz: int

    @property
    def n_frames(self) -> int:
        return len(self.f0_hz)

    def voiced_f0(self) -> np.ndarray:
        return self.f0_hz[self.voiced]


@dataclass(frozen=True)
class ProsodyFeatures:
    speech_rate_proxy: float  # voiced-segment onsets per second
    pause_ratio: float
    f0_sigma: float  # Hz


def _median_smooth_binary(v: np.ndarray, smooth_len: int) -> np.ndarray:
    if smooth_len <= 1:
        return v.copy()
    half = smooth_len // 2
    padded = np.pad(v, half, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, smooth_len)
    return (windows.sum(axis=1) * 2 > smooth_len).astype(np.int8)


def compute_vad(
    rms: np.ndarray,
    percentile: float = DEFAULT_VAD_PERCENTILE,
    smooth_len: int = DEFAULT_VAD_SMOOTH,
) -> VadTrack:
    """Threshold frame energies at a percentile of their own distribution,
    then median-smooth. Exact-zero-energy frames are always inactive, so
    pure silence never counts as speech.

    The comparison carries a tiny relative tolerance: a constant-energy
    signal has only float-noise spread across frames, and a strict >=
    against the interpolated percentile would mark an arbitrary subset of
    those frames silent."""
    rms = np.asarray(rms, dtype=np.float64)
    if rms.size == 0:
        raise EmptySeries("empty RMS series")
    if not (0.0 < percentile < 100.0):
        raise InvalidRange("percentile must be in (0, 100)")
    if smooth_len < 1 or smooth_len % 2 == 0:
        raise InvalidRange("smooth_len must be odd and >= 1")
    threshold = float(np.percentile(rms, percentile))
    v = (rms >= threshold * (1.0 - 1e-4)).astype(np.int8)
    v[rms == 0.0] = 0
    v = _median_smooth_binary(v, smooth_len)
    v[rms == 0.0] = 0
    return VadTrack(v=v, hop_ms=0.0, threshold=threshold, percentile=percentile)


def pause_ratio(vad: VadTrack) -> float:
    """Fraction of frames with no voice activity: 1 - mean of the
    activity indicator."""
    if vad.n_frames == 0:
        raise EmptySeries("empty VAD track")
    return float(1.0 - np.mean(vad.v))


def speech_rate_proxy(vad: VadTrack, audio_duration_s: float) -> float:
    """Voiced-segment onsets (0->1 transitions, counting an active first
    frame) per second of audio."""
    if audio_duration_s <= 0:
        raise NonpositiveDuration(f"duration {audio_duration_s}")
    v = vad.v
    onsets = int(v[0] == 1) + int(np.sum((v[1:] == 1) & (v[:-1] == 0)))
    return onsets / audio_duration_s


def _nccf(frames: np.ndarray, lag_min: int, lag_max: int):
    """Normalized cross-correlation per frame over a lag range.

    Returns (n_frames, n_lags) values in [-1, 1].
    """
    x = frames - frames.mean(axis=1, keepdims=True)
    n, length = x.shape
    csum = np.cumsum(x * x, axis=1)
    total = csum[:, -1]
    lags = np.arange(lag_min, lag_max + 1)
    out = np.empty((n, len(lags)))
    for j, tau in enumerate(lags):
        num = np.einsum("ij,ij->i", x[:, : length - tau], x[:, tau:])
        e_head = csum[:, length - tau - 1]
        e_tail = total - (csum[:, tau - 1] if tau > 0 else 0.0)
        den = np.sqrt(e_head * e_tail)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[:, j] = np.where(den > 0, num / den, 0.0)
    return out, lags


def _parabolic(y_prev, y_peak, y_next):
    """Sub-sample peak offset and value from three points."""
    denom = y_prev - 2.0 * y_peak + y_next
    if denom == 0:
        return 0.0, y_peak
    delta = 0.5 * (y_prev - y_next) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    value = y_peak - 0.25 * (y_prev - y_next) * delta
    return delta, float(value)


def track_f0(
    audio: AudioBuffer,
    spec: FrameSpec = FrameSpec(),
    fmin_hz: float = DEFAULT_F0_MIN_HZ,
    fmax_hz: float = DEFAULT_F0_MAX_HZ,
    voicing_threshold: float = DEFAULT_VOICING_THRESHOLD,
    vad_percentile: float = DEFAULT_VAD_PERCENTILE,
    vad_smooth: int = DEFAULT_VAD_SMOOTH,
) -> PitchTrack:
    """Autocorrelation pitch tracking over [fmin, fmax].

    Per frame, f0 is the sample rate over the parabolic-interpolated
    argmax lag of the normalized autocorrelation. A frame is voiced iff
    its periodicity >= voicing_threshold and its VAD bit is 1.
    """
    fs = audio.sample_rate_hz
    if not (0.0 < fmin_hz < fmax_hz <= fs / 2):
        raise InvalidRange(f"need 0 < fmin < fmax <= {fs / 2}")
    if not (0.0 < voicing_threshold < 1.0):
        raise InvalidRange("voicing_threshold must be in (0, 1)")

    raw = frame_raw(audio, spec)
    lag_min = max(2, int(np.floor(fs / fmax_hz)))
    lag_max = int(np.ceil(fs / fmin_hz))
    frame_len = raw.frames.shape[1]
    if lag_max >= frame_len:
        raise InvalidRange(
            f"fmin {fmin_hz} Hz needs lags up to {lag_max} but frames have "
            f"{frame_len} samples"
        )

    nccf, lags = _nccf(raw.frames, lag_min, lag_max)
    n = raw.n_frames
    f0 = np.full(n, np.nan)
    periodicity = np.zeros(n)
    for i in range(n):
        row = nccf[i]
        j = int(np.argmax(row))
        # subharmonic guard: prefer the smallest divisor lag whose local
        # peak is nearly as strong as the global maximum
        vmax = row[j]
        best_lag = lags[j]
        for divisor in range(int(best_lag // lag_min), 1, -1):
            target = best_lag / divisor
            lo = max(0, int(round(target)) - 2 - lag_min)
            hi = min(len(row), int(round(target)) + 3 - lag_min)
            if lo >= hi:
                continue
            jc = lo + int(np.argmax(row[lo:hi]))
            if row[jc] >= 0.9 * vmax:
                j = jc
                break
        if 0 < j < len(lags) - 1:
            delta, value = _parabolic(row[j - 1], row[j], row[j + 1])
        else:
            delta, value = 0.0, float(row[j])
        lag = lags[j] + delta
        f0[i] = fs / lag
        periodicity[i] = min(max(value, 0.0), 1.0)

    rms = frame_rms(frame_signal(audio, spec))
    vad = compute_vad(rms, vad_percentile, vad_smooth)
    voiced = (periodicity >= voicing_threshold) & (vad.v == 1)
    f0 = np.where(voiced, f0, np.nan)
    return PitchTrack(
        f0_hz=f0,
        periodicity=periodicity,
        voiced=voiced,
        hop_ms=spec.hop_ms,
        frame_len_ms=spec.frame_len_ms,
        sample_rate_hz=fs,
    )


def f0_sigma(track: PitchTrack) -> float:
    """Population standard deviation (Hz) of voiced f0 values."""
    voiced = track.voiced_f0()
    if len(voiced) < 2:
        raise InsufficientVoicedFrames(f"{len(voiced)} voiced frames, need >= 2")
    return float(np.std(voiced))


def prosody_features(
    audio: AudioBuffer,
    spec: FrameSpec = FrameSpec(),
    vad_percentile: float = DEFAULT_VAD_PERCENTILE,
    vad_smooth: int = DEFAULT_VAD_SMOOTH,
    fmin_hz: float = DEFAULT_F0_MIN_HZ,
    fmax_hz: float = DEFAULT_F0_MAX_HZ,
    voicing_threshold: float = DEFAULT_VOICING_THRESHOLD,
) -> ProsodyFeatures:
    """Convenience wrapper computing all three prosodic measures."""
    rms = frame_rms(frame_signal(audio, spec))
    vad = compute_vad(rms, vad_percentile, vad_smooth)
    track = track_f0(
        audio, spec, fmin_hz, fmax_hz, voicing_threshold, vad_percentile, vad_smooth
    )
    return ProsodyFeatures(
        speech_rate_proxy=speech_rate_proxy(vad, audio.duration_s),
        pause_ratio=pause_ratio(vad),
        f0_sigma=f0_sigma(track),
    )
