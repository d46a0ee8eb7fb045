"""Single declarative pipeline configuration.

Every knob surfaced by the extraction, labeling, splitting, and toy
training modules lives here. Unknown keys are rejected so a resolved
config file is always sufficient to reproduce a run byte-identically.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .audio_core import FrameSpec
from .errors import ConfigError


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    # framing
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    window: str = "hamming"
    # VAD / prosody
    vad_percentile: float = 30.0
    vad_smooth_frames: int = 5
    f0_min_hz: float = 75.0
    f0_max_hz: float = 500.0
    voicing_threshold: float = 0.45
    # articulation
    preemphasis: float = 0.94
    formant_bandwidth_max_hz: float = 400.0
    # labels
    bin_edge: float = 0.5
    # toy trainer
    lambda_bio: float = 0.1
    family: str = "none"
    n_mels: int = 40
    n_layers: int = 2
    hidden_dim: int = 64
    adapter_dim: int = 16
    vocab: str = "aeiou"
    train_steps: int = 300
    learning_rate: float = 0.01

    def frame_spec(self) -> FrameSpec:
        return FrameSpec(self.frame_len_ms, self.hop_ms, self.window)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)
