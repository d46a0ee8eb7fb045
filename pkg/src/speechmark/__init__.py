"""Speech biomarker pipeline for dysarthric speech research.

Subpackages cover audio framing, prosody/phonation/articulation feature
extraction, biomarker label distillation, corpus splitting, WER scoring,
a desk-scale adapter trainer, and signal synthesis for tests.
"""

__version__ = "0.1.0"

__all__ = [
    "articulation",
    "audio_core",
    "cli",
    "config",
    "corpus",
    "errors",
    "extract",
    "labels",
    "phonation",
    "prosody",
    "scoring",
    "synth",
    "trainer",
]
