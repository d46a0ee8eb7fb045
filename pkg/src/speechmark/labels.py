"""Distillation of the seven continuous biomarkers into supervisory
labels: z-scores against healthy-control statistics, low/medium/high bins,
and joint family-level classes.

Feature order is fixed: prosody (speech_rate_proxy, pause_ratio,
f0_sigma), phonation (jitter_local, shimmer_local, hnr_db), articulation
(vsa_proxy). A family class is the base-3 encoding of its member bins in
that order, so prosody and phonation have 27 classes and articulation 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingFeature, NoControls, NormalizationDegenerate

FEATURE_NAMES = (
    "speech_rate_proxy",
    "pause_ratio",
    "f0_sigma",
    "jitter_local",
    "shimmer_local",
    "hnr_db",
    "vsa_proxy",
)

FAMILIES = {
    "prosody": ("speech_rate_proxy", "pause_ratio", "f0_sigma"),
    "phonation": ("jitter_local", "shimmer_local", "hnr_db"),
    "articulation": ("vsa_proxy",),
}

BIN_NAMES = ("low", "medium", "high")

DEFAULT_BIN_EDGE = 0.5


def family_n_classes(family: str) -> int:
    return 3 ** len(FAMILIES[family])


@dataclass(frozen=True)
class BiomarkerVector:
    """The seven continuous measurements for one utterance; failed
    extractions are flagged missing, never silently zeroed."""

    values: dict
    missing: frozenset = frozenset()
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        extra = set(self.values) - set(FEATURE_NAMES)
        if extra:
            raise ValueError(f"unknown features: {sorted(extra)}")
        object.__setattr__(self, "missing", frozenset(self.missing))
        for name in FEATURE_NAMES:
            if name not in self.values and name not in self.missing:
                raise ValueError(f"feature {name!r} neither valued nor flagged missing")

    @classmethod
    def complete(cls, **values) -> "BiomarkerVector":
        return cls(values=dict(values))

    def get(self, name: str) -> float:
        if name in self.missing:
            raise MissingFeature(name)
        return float(self.values[name])


@dataclass(frozen=True)
class ControlStats:
    """Per-feature mean/std over healthy-control training utterances."""

    mean: dict
    std: dict
    control_ids: tuple  # provenance: the utterance ids used for the fit


@dataclass(frozen=True)
class BiomarkerLabels:
    z: dict  # feature -> z-score
    bins: dict  # feature -> "low" | "medium" | "high"
    family_labels: dict  # family -> class index


def fit_control_stats(items, utt_ids=None) -> ControlStats:
    """Fit per-feature mean and population std over healthy controls.

    ``items`` holds (BiomarkerVector, cohort) pairs; only cohort
    "control" contributes, and each feature needs at least two controls
    where it is not flagged missing.
    """
    controls = [v for v, cohort in items if cohort == "control"]
    mean, std = {}, {}
    for name in FEATURE_NAMES:
        vals = np.array([v.values[name] for v in controls if name not in v.missing])
        if len(vals) < 2:
            raise NoControls(
                f"{len(vals)} control values for {name!r}, need >= 2"
            )
        mu = float(np.mean(vals))
        sigma = float(np.std(vals))
        if sigma == 0.0:
            raise NormalizationDegenerate(f"feature {name!r} has zero control spread")
        mean[name] = mu
        std[name] = sigma
    ids = tuple(utt_ids) if utt_ids is not None else ()
    return ControlStats(mean=mean, std=std, control_ids=ids)


def bin_of(z: float, bin_edge: float) -> str:
    if z < -bin_edge:
        return "low"
    if z > bin_edge:
        return "high"
    return "medium"


def encode_family(bins: dict, family: str) -> int:
    """Base-3 class over the family's features in fixed order."""
    return sum(
        BIN_NAMES.index(bins[name]) * 3**k for k, name in enumerate(FAMILIES[family])
    )


def decode_family(label: int, family: str) -> tuple:
    """Inverse of encode_family: bins in the family's feature order."""
    names = FAMILIES[family]
    out = []
    for _ in names:
        out.append(BIN_NAMES[label % 3])
        label //= 3
    return tuple(out)


def make_labels(
    v: BiomarkerVector, stats: ControlStats, bin_edge: float = DEFAULT_BIN_EDGE
) -> BiomarkerLabels:
    """z-score, bin, and family-encode one biomarker vector."""
    if bin_edge <= 0:
        raise ValueError("bin_edge must be > 0")
    z, bins = {}, {}
    for name in FEATURE_NAMES:
        zi = (v.get(name) - stats.mean[name]) / stats.std[name]
        z[name] = float(zi)
        bins[name] = bin_of(zi, bin_edge)
    family_labels = {family: encode_family(bins, family) for family in FAMILIES}
    return BiomarkerLabels(z=z, bins=bins, family_labels=family_labels)
