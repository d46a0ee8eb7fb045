"""Cycle-level laryngeal perturbation measures: local jitter, local
shimmer, and harmonics-to-noise ratio.

Cycle marks are placed by period-guided peak picking inside voiced runs:
each search window sits one estimated period after the previous mark,
within +-25% of that period, with sub-sample refinement of the peak
position. Runs shorter than three cycles are discarded (their boundary
marks are unreliable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_core import AudioBuffer
from .errors import (
    AllZeroAmplitudes,
    InsufficientPeriods,
    NoVoicedCycles,
    NoVoicedFrames,
)
from .prosody import PitchTrack

MIN_CYCLES_PER_RUN = 3
HNR_R_MAX = 0.9999


@dataclass(frozen=True)
class PitchPeriodSequence:
    """Cycle durations and peak amplitudes, with run boundaries so that
    consecutive-cycle differences never straddle two voiced runs."""

    periods_s: np.ndarray
    peak_amps: np.ndarray
    run_index: np.ndarray  # voiced-run id per period

    @property
    def count(self) -> int:
        return len(self.periods_s)


@dataclass(frozen=True)
class PhonationFeatures:
    jitter_local: float
    shimmer_local: float
    hnr_db: float


def _voiced_runs(voiced: np.ndarray):
    """Maximal runs of consecutive voiced frames as (start, stop) pairs."""
    runs = []
    start = None
    for i, flag in enumerate(voiced):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(voiced)))
    return runs


def _refine_peak(x: np.ndarray, idx: int):
    """Parabolic sub-sample refinement of a local maximum at idx.

    Returns (position, amplitude); falls back to the integer sample at
    array edges or degenerate curvature.
    """
    if idx <= 0 or idx >= len(x) - 1:
        return float(idx), float(abs(x[idx]))
    y0, y1, y2 = x[idx - 1], x[idx], x[idx + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0:
        return float(idx), float(abs(y1))
    delta = 0.5 * (y0 - y2) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    amp = y1 - 0.25 * (y0 - y2) * delta
    return idx + delta, float(abs(amp))


def extract_pitch_periods(audio: AudioBuffer, pitch: PitchTrack) -> PitchPeriodSequence:
    """Mark glottal-cycle peaks inside each voiced run and return the
    resulting period/amplitude sequences."""
    fs = audio.sample_rate_hz
    x = audio.samples
    hop = pitch.hop_ms * fs / 1000.0
    half_frame = pitch.frame_len_ms * fs / 2000.0

    periods, amps, run_ids = [], [], []
    run_id = 0
    for start, stop in _voiced_runs(pitch.voiced):
        seg_start = int(round(start * hop))
        seg_stop = min(len(x), int(round((stop - 1) * hop + 2 * half_frame)))
        if seg_stop - seg_start < 3:
            continue

        def local_period(pos):
            frame = int(round((pos - half_frame) / hop)) if hop > 0 else start
            frame = min(max(frame, start), stop - 1)
            f0 = pitch.f0_hz[frame]
            if not np.isfinite(f0):
                f0 = np.nanmean(pitch.f0_hz[start:stop])
            return fs / f0

        # first mark: strongest positive peak within one period of the run start
        t_est = local_period(seg_start)
        first_stop = min(seg_stop, seg_start + int(np.ceil(t_est)) + 1)
        idx = seg_start + int(np.argmax(x[seg_start:first_stop]))
        marks = []
        pos, amp = _refine_peak(x, idx)
        marks.append((pos, amp))
        while True:
            t_est = local_period(marks[-1][0])
            center = marks[-1][0] + t_est
            lo = int(np.floor(center - 0.25 * t_est))
            hi = int(np.ceil(center + 0.25 * t_est)) + 1
            if hi > seg_stop or lo < seg_start:
                break
            idx = lo + int(np.argmax(x[lo:hi]))
            pos, amp = _refine_peak(x, idx)
            marks.append((pos, amp))

        if len(marks) < MIN_CYCLES_PER_RUN:
            continue
        pos_arr = np.array([m[0] for m in marks])
        amp_arr = np.array([m[1] for m in marks])
        periods.append(np.diff(pos_arr) / fs)
        amps.append(amp_arr[:-1])
        run_ids.append(np.full(len(pos_arr) - 1, run_id))
        run_id += 1

    if not periods:
        raise NoVoicedCycles("no voiced run yielded >= 3 cycle marks")
    return PitchPeriodSequence(
        periods_s=np.concatenate(periods),
        peak_amps=np.concatenate(amps),
        run_index=np.concatenate(run_ids),
    )


def _adjacent_pairs_mask(run_index: np.ndarray) -> np.ndarray:
    """True where consecutive entries belong to the same voiced run."""
    return run_index[1:] == run_index[:-1]


def jitter_local(seq: PitchPeriodSequence) -> float:
    """Mean absolute consecutive period difference over mean period.

    Differences are taken only within a voiced run.
    """
    if seq.count < 2:
        raise InsufficientPeriods(f"{seq.count} periods, need >= 2")
    t = seq.periods_s
    same = _adjacent_pairs_mask(seq.run_index)
    if not np.any(same):
        raise InsufficientPeriods("no adjacent period pairs within a run")
    mean_abs_diff = float(np.mean(np.abs(np.diff(t))[same]))
    return mean_abs_diff / float(np.mean(t))


def shimmer_local(seq: PitchPeriodSequence) -> float:
    """Amplitude analogue of jitter over per-cycle peak amplitudes."""
    if seq.count < 2:
        raise InsufficientPeriods(f"{seq.count} periods, need >= 2")
    a = seq.peak_amps
    mean_amp = float(np.mean(a))
    if mean_amp == 0:
        raise AllZeroAmplitudes("mean cycle amplitude is zero")
    same = _adjacent_pairs_mask(seq.run_index)
    if not np.any(same):
        raise InsufficientPeriods("no adjacent amplitude pairs within a run")
    mean_abs_diff = float(np.mean(np.abs(np.diff(a))[same]))
    return mean_abs_diff / mean_amp


def hnr_db(audio: AudioBuffer, pitch: PitchTrack) -> float:
    """Autocorrelation harmonics-to-noise ratio, averaged in dB over
    voiced frames: 10 log10(r / (1 - r)) with r the periodicity at the
    frame's pitch lag."""
    if not np.any(pitch.voiced):
        raise NoVoicedFrames("no voiced frames")
    r = np.clip(pitch.periodicity[pitch.voiced], 1e-6, HNR_R_MAX)
    return float(np.mean(10.0 * np.log10(r / (1.0 - r))))


def phonation_features(audio: AudioBuffer, pitch: PitchTrack) -> PhonationFeatures:
    """Convenience wrapper computing all three phonation measures."""
    seq = extract_pitch_periods(audio, pitch)
    return PhonationFeatures(
        jitter_local=jitter_local(seq),
        shimmer_local=shimmer_local(seq),
        hnr_db=hnr_db(audio, pitch),
    )
