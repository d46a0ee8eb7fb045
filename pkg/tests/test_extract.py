import dataclasses

import pytest

from speechmark.audio_core import write_wav
from speechmark.config import PipelineConfig
from speechmark.errors import ConfigError
from speechmark.extract import extract_biomarkers, extract_from_file
from speechmark.labels import FEATURE_NAMES
from speechmark.synth import SynthSpec, synth_signal


class TestPipelineConfig:
    def test_defaults_roundtrip(self):
        cfg = PipelineConfig()
        text = cfg.to_json()
        import json

        assert PipelineConfig.from_dict(json.loads(text)) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"vad_percentil": 20})

    def test_partial_override(self):
        cfg = PipelineConfig.from_dict({"seed": 7, "lambda_bio": 0.5})
        assert cfg.seed == 7
        assert cfg.lambda_bio == 0.5
        assert cfg.vad_percentile == PipelineConfig().vad_percentile

    def test_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"train_steps": 10}')
        assert PipelineConfig.from_file(path).train_steps == 10

    def test_from_file_bad_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{oops")
        with pytest.raises(ConfigError):
            PipelineConfig.from_file(path)

    def test_frozen(self):
        cfg = PipelineConfig()
        with pytest.raises(dataclasses.FrozenInstanceError):
            cfg.seed = 1


class TestExtractBiomarkers:
    def test_voiced_word_is_complete(self):
        audio = synth_signal(SynthSpec(kind="toy_word", f0_hz=140.0, text="ae io", seed=2))
        vector = extract_biomarkers(audio)
        assert not vector.missing
        assert set(vector.values) == set(FEATURE_NAMES)
        assert vector.values["pause_ratio"] > 0.0

    def test_silence_flags_voiced_features(self, silence_1s):
        vector = extract_biomarkers(silence_1s)
        assert vector.values["pause_ratio"] == 1.0
        assert "f0_sigma" in vector.missing
        assert "jitter_local" in vector.missing
        assert vector.notes["f0_sigma"]

    def test_noise_degrades_gracefully(self, noise_1s):
        vector = extract_biomarkers(noise_1s)
        # unvoiced input: prosody VAD features survive, cycle features do not
        assert "pause_ratio" in vector.values
        assert "jitter_local" in vector.missing

    def test_missing_file_flags_everything(self, tmp_path):
        vector = extract_from_file(tmp_path / "nope.wav")
        assert vector.missing == frozenset(FEATURE_NAMES)
        assert all(n in vector.notes for n in FEATURE_NAMES)

    def test_from_file_matches_in_memory(self, tmp_path):
        audio = synth_signal(SynthSpec(kind="toy_word", f0_hz=140.0, text="ae", seed=2))
        path = tmp_path / "w.wav"
        write_wav(path, audio)
        a = extract_from_file(path)
        b = extract_biomarkers(audio)
        for name in FEATURE_NAMES:
            # quantization to 16-bit perturbs values a little
            assert a.values[name] == pytest.approx(b.values[name], rel=0.05, abs=1e-3)
