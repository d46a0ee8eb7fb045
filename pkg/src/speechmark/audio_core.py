"""Audio ingestion, framing, windowing, and frame statistics.

All downstream extractors operate on :class:`AudioBuffer` (mono float
samples in [-1, 1]) framed through a :class:`FrameSpec`. No resampling:
extractors run at the file's native rate, which must be >= 8 kHz.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile
from scipy.signal.windows import gaussian as _gaussian_window

from .errors import (
    AudioTooShort,
    CorruptFile,
    EmptyAudio,
    UnsupportedFormat,
    UnsupportedSampleRate,
)

MIN_SAMPLE_RATE_HZ = 8000

WINDOWS = ("rectangular", "hamming", "gaussian")


@dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM audio: samples in [-1, 1] plus a sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer samples must be 1-D (mono)")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioBuffer samples must be finite")
        if int(self.sample_rate_hz) < MIN_SAMPLE_RATE_HZ:
            raise UnsupportedSampleRate(
                f"sample rate {self.sample_rate_hz} < {MIN_SAMPLE_RATE_HZ} Hz"
            )
        samples = np.clip(samples, -1.0, 1.0)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class FrameSpec:
    """Frame length / hop (ms) and window shape for short-time analysis."""

    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hamming"

    def __post_init__(self):
        if not (self.frame_len_ms >= self.hop_ms > 0):
            raise ValueError("require frame_len_ms >= hop_ms > 0")
        if self.window not in WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")

    def frame_len(self, sample_rate_hz: int) -> int:
        return int(round(self.frame_len_ms * sample_rate_hz / 1000.0))

    def hop(self, sample_rate_hz: int) -> int:
        return int(round(self.hop_ms * sample_rate_hz / 1000.0))

    def window_values(self, frame_len: int) -> np.ndarray:
        if self.window == "rectangular":
            return np.ones(frame_len)
        if self.window == "hamming":
            return np.hamming(frame_len)
        return _gaussian_window(frame_len, std=frame_len / 6.0)


@dataclass(frozen=True)
class FrameSeries:
    """Stack of per-frame sample vectors at a fixed hop."""

    frames: np.ndarray  # (n_frames, frame_len)
    hop_ms: float
    sample_rate_hz: int = 0
    frame_len_ms: float = 0.0
    windowed: bool = True

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def frame_times_s(self) -> np.ndarray:
        """Frame-center times in seconds."""
        half = self.frame_len_ms / 2000.0
        return np.arange(self.n_frames) * (self.hop_ms / 1000.0) + half


def load_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE file (PCM16 or IEEE float32) into an AudioBuffer.

    Multi-channel audio is downmixed by channel mean; PCM16 is scaled by
    2^15. Raises UnsupportedFormat / CorruptFile / EmptyAudio.
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        msg = str(exc).lower()
        if "format" in msg or "compressed" in msg or "understood" in msg:
            raise UnsupportedFormat(str(exc)) from exc
        raise CorruptFile(str(exc)) from exc
    except (EOFError, OSError, io.UnsupportedOperation, struct.error) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise CorruptFile(str(exc)) from exc

    if data.size == 0:
        raise EmptyAudio(f"{path}: zero samples")

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: unsupported sample dtype {data.dtype}")

    if samples.ndim == 2:
        samples = samples.mean(axis=1)

    return AudioBuffer(samples=np.clip(samples, -1.0, 1.0), sample_rate_hz=int(rate))


def write_wav(path, audio: AudioBuffer) -> None:
    """Write an AudioBuffer as 16-bit PCM."""
    pcm = np.clip(np.round(audio.samples * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(path, audio.sample_rate_hz, pcm)


def frame_signal(audio: AudioBuffer, spec: FrameSpec = FrameSpec()) -> FrameSeries:
    """Slice audio into hop-spaced windowed frames; tail samples that do
    not fill a frame are dropped."""
    frame_len = spec.frame_len(audio.sample_rate_hz)
    hop = spec.hop(audio.sample_rate_hz)
    n = len(audio.samples)
    if n < frame_len:
        raise AudioTooShort(f"{n} samples < one {frame_len}-sample frame")
    n_frames = (n - frame_len) // hop + 1
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = audio.samples[idx] * spec.window_values(frame_len)[None, :]
    return FrameSeries(
        frames=frames,
        hop_ms=spec.hop_ms,
        sample_rate_hz=audio.sample_rate_hz,
        frame_len_ms=spec.frame_len_ms,
    )


def frame_raw(audio: AudioBuffer, spec: FrameSpec = FrameSpec()) -> FrameSeries:
    """Like frame_signal but without applying the window (for lag-domain
    analysis where tapering would bias autocorrelation peaks)."""
    raw_spec = FrameSpec(spec.frame_len_ms, spec.hop_ms, "rectangular")
    series = frame_signal(audio, raw_spec)
    return FrameSeries(
        frames=series.frames,
        hop_ms=series.hop_ms,
        sample_rate_hz=series.sample_rate_hz,
        frame_len_ms=series.frame_len_ms,
        windowed=False,
    )


def frame_rms(series: FrameSeries) -> np.ndarray:
    """Per-frame RMS energy of the (windowed) samples."""
    if series.n_frames == 0:
        raise AudioTooShort("empty frame series")
    return np.sqrt(np.mean(series.frames**2, axis=1))
