"""Per-utterance biomarker extraction: composes the prosody, phonation,
and articulation extractors into one BiomarkerVector.

Each feature is computed independently; a failure flags that feature as
missing (with a note) instead of aborting, so one degenerate recording
never kills a batch.
"""

from __future__ import annotations

from .articulation import track_formants, vsa_proxy
from .audio_core import AudioBuffer, frame_rms, frame_signal, load_wav
from .config import PipelineConfig
from .errors import DataError
from .labels import BiomarkerVector
from .phonation import extract_pitch_periods, hnr_db, jitter_local, shimmer_local
from .prosody import compute_vad, f0_sigma, pause_ratio, speech_rate_proxy, track_f0


def extract_biomarkers(audio: AudioBuffer, cfg: PipelineConfig = PipelineConfig()) -> BiomarkerVector:
    """All seven biomarkers for one utterance, with per-feature fault
    isolation."""
    values, missing, notes = {}, set(), {}

    def attempt(name, func):
        try:
            values[name] = float(func())
        except DataError as exc:
            missing.add(name)
            notes[name] = f"{type(exc).__name__}: {exc}"

    spec = cfg.frame_spec()
    vad = None
    try:
        rms = frame_rms(frame_signal(audio, spec))
        vad = compute_vad(rms, cfg.vad_percentile, cfg.vad_smooth_frames)
    except DataError as exc:
        for name in ("speech_rate_proxy", "pause_ratio"):
            missing.add(name)
            notes[name] = f"{type(exc).__name__}: {exc}"
    if vad is not None:
        attempt("speech_rate_proxy", lambda: speech_rate_proxy(vad, audio.duration_s))
        attempt("pause_ratio", lambda: pause_ratio(vad))

    pitch = None
    try:
        pitch = track_f0(
            audio,
            spec,
            cfg.f0_min_hz,
            cfg.f0_max_hz,
            cfg.voicing_threshold,
            cfg.vad_percentile,
            cfg.vad_smooth_frames,
        )
    except DataError as exc:
        for name in ("f0_sigma", "jitter_local", "shimmer_local", "hnr_db", "vsa_proxy"):
            missing.add(name)
            notes[name] = f"{type(exc).__name__}: {exc}"
    if pitch is not None:
        attempt("f0_sigma", lambda: f0_sigma(pitch))
        seq = None
        try:
            seq = extract_pitch_periods(audio, pitch)
        except DataError as exc:
            for name in ("jitter_local", "shimmer_local"):
                missing.add(name)
                notes[name] = f"{type(exc).__name__}: {exc}"
        if seq is not None:
            attempt("jitter_local", lambda: jitter_local(seq))
            attempt("shimmer_local", lambda: shimmer_local(seq))
        attempt("hnr_db", lambda: hnr_db(audio, pitch))
        attempt(
            "vsa_proxy",
            lambda: vsa_proxy(
                track_formants(audio, pitch, cfg.preemphasis, cfg.formant_bandwidth_max_hz)
            ),
        )

    return BiomarkerVector(values=values, missing=frozenset(missing), notes=notes)


def extract_from_file(path, cfg: PipelineConfig = PipelineConfig()) -> BiomarkerVector:
    """Load a WAV and extract; file-level failures flag every feature."""
    try:
        audio = load_wav(path)
    except (DataError, FileNotFoundError) as exc:
        note = f"{type(exc).__name__}: {exc}"
        from .labels import FEATURE_NAMES

        return BiomarkerVector(
            values={},
            missing=frozenset(FEATURE_NAMES),
            notes={name: note for name in FEATURE_NAMES},
        )
    return extract_biomarkers(audio, cfg)
