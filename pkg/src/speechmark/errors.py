"""Exception hierarchy shared across the package.

``SpeechMarkError`` is the root; ``DataError`` covers bad inputs (files,
manifests, degenerate signals) and maps to exit code 2 in the CLI.
"""


class SpeechMarkError(Exception):
    """Base class for all package errors."""


class DataError(SpeechMarkError):
    """Invalid or degenerate input data."""


# --- audio I/O and framing ---

class UnsupportedFormat(DataError):
    """WAV codec or sample format outside PCM16 / float32."""


class CorruptFile(DataError):
    """Truncated or structurally invalid RIFF/WAVE file."""


class EmptyAudio(DataError):
    """Audio file contains zero samples."""


class UnsupportedSampleRate(DataError):
    """Sample rate below the 8 kHz minimum (no resampling in v1)."""


class AudioTooShort(DataError):
    """Audio shorter than a single analysis frame."""


# --- prosody ---

class EmptySeries(DataError):
    """Empty frame series where at least one frame is required."""


class NonpositiveDuration(DataError):
    """Duration must be strictly positive."""


class InvalidRange(DataError):
    """Invalid parameter range (e.g. pitch search bounds)."""


class InsufficientVoicedFrames(DataError):
    """Fewer voiced frames than the statistic requires."""


# --- phonation ---

class NoVoicedCycles(DataError):
    """No voiced run long enough to mark pitch cycles."""


class InsufficientPeriods(DataError):
    """Fewer than two pitch periods."""


class AllZeroAmplitudes(DataError):
    """Cycle peak amplitudes are all zero; shimmer undefined."""


class NoVoicedFrames(DataError):
    """No voiced frames available."""


# --- articulation ---

class LpcUnstable(DataError):
    """Levinson-Durbin produced a reflection coefficient with |k| >= 1
    on every frame."""


class InsufficientFrames(DataError):
    """Fewer retained frames than the statistic requires."""


# --- biomarker labels ---

class NoControls(DataError):
    """Too few healthy-control vectors to fit normalization stats."""


class NormalizationDegenerate(DataError):
    """A control feature has zero spread; z-scores undefined."""


class MissingFeature(DataError):
    """A flagged-missing feature was requested for labeling."""


# --- corpus / manifests ---

class ManifestError(DataError):
    """Base for manifest problems."""


class ParseError(ManifestError):
    """Malformed manifest line (carries the line number)."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateUttId(ManifestError):
    def __init__(self, utt_id, line_no):
        super().__init__(f"duplicate utt_id {utt_id!r} on line {line_no}")
        self.utt_id = utt_id
        self.line_no = line_no


class UnknownCohort(ManifestError):
    """Cohort outside {control, pre_hd, prodromal, manifest}."""


class EmptyManifest(ManifestError):
    """Manifest contains no records."""


# --- scoring ---

class EmptyReference(DataError):
    """A scoring group has zero reference words."""


class CohortMismatch(DataError):
    """Baseline and variant reports cover different cohorts."""


class MissingHypothesis(DataError):
    """One or more scored utterances lack a hypothesis."""

    def __init__(self, model, utt_ids):
        ids = ", ".join(sorted(utt_ids))
        super().__init__(f"model {model!r} missing hypotheses for: {ids}")
        self.model = model
        self.utt_ids = list(utt_ids)


# --- toy trainer ---

class ShapeMismatch(SpeechMarkError):
    """Tensor shapes inconsistent with the configured model."""


class InfeasibleTarget(DataError):
    """Target sequence longer than CTC alignment can emit."""


class AllMasked(DataError):
    """Pooling mask selects no frames."""


# --- synthesis ---

class InvalidSpec(DataError):
    """Invalid synthetic-signal or synthetic-corpus specification."""


# --- configuration ---

class ConfigError(DataError):
    """Unknown or invalid pipeline configuration key."""
