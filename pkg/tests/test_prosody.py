import numpy as np
import pytest

from speechmark.audio_core import FrameSpec, frame_rms, frame_signal
from speechmark.errors import (
    EmptySeries,
    InsufficientVoicedFrames,
    InvalidRange,
    NonpositiveDuration,
)
from speechmark.prosody import (
    VadTrack,
    compute_vad,
    f0_sigma,
    pause_ratio,
    prosody_features,
    speech_rate_proxy,
    track_f0,
)
from speechmark.synth import SynthSpec, synth_signal


def vad_from_bits(bits):
    return VadTrack(v=np.asarray(bits, dtype=np.int8), hop_ms=10.0, threshold=0.5, percentile=50.0)


class TestComputeVad:
    def test_median_split_example(self):
        vad = compute_vad(np.array([0.0, 0, 0, 1, 1, 1]), percentile=50.0, smooth_len=1)
        assert list(vad.v) == [0, 0, 0, 1, 1, 1]

    def test_all_silence_inactive(self):
        vad = compute_vad(np.zeros(20), percentile=30.0, smooth_len=5)
        assert not vad.v.any()

    def test_constant_nonzero_all_active(self):
        vad = compute_vad(np.full(20, 0.3), percentile=30.0, smooth_len=5)
        assert vad.v.all()

    def test_smoothing_removes_blips(self):
        rms = np.array([1.0] * 10 + [0.01] + [1.0] * 10)
        vad = compute_vad(rms, percentile=10.0, smooth_len=5)
        assert vad.v.all()

    def test_threshold_recorded(self):
        rms = np.linspace(0.1, 1.0, 10)
        vad = compute_vad(rms, percentile=30.0, smooth_len=1)
        assert vad.threshold == pytest.approx(np.percentile(rms, 30.0))

    def test_empty_series(self):
        with pytest.raises(EmptySeries):
            compute_vad(np.array([]))

    def test_bad_percentile(self):
        with pytest.raises(InvalidRange):
            compute_vad(np.ones(5), percentile=0.0)

    def test_even_smooth_len(self):
        with pytest.raises(InvalidRange):
            compute_vad(np.ones(5), smooth_len=4)


class TestPauseRatio:
    def test_reference_sequence(self):
        assert pause_ratio(vad_from_bits([1, 1, 0, 0, 0, 0, 0, 0, 1, 1])) == pytest.approx(0.6)

    def test_all_active(self):
        assert pause_ratio(vad_from_bits([1] * 8)) == 0.0

    def test_all_silent(self):
        assert pause_ratio(vad_from_bits([0] * 8)) == 1.0

    def test_complement_identity(self, rng):
        v = rng.integers(0, 2, size=50)
        assert pause_ratio(vad_from_bits(v)) + np.mean(v) == pytest.approx(1.0)

    def test_gain_invariance(self, noise_1s):
        spec = FrameSpec()
        rms = frame_rms(frame_signal(noise_1s, spec))
        a = pause_ratio(compute_vad(rms))
        b = pause_ratio(compute_vad(rms * 0.05))
        assert a == b


class TestSpeechRateProxy:
    def test_counts_onsets(self):
        vad = vad_from_bits([0, 1, 1, 0, 1, 0, 0, 1])
        assert speech_rate_proxy(vad, 2.0) == pytest.approx(3 / 2.0)

    def test_active_first_frame_counts(self):
        assert speech_rate_proxy(vad_from_bits([1, 1, 0]), 1.0) == 1.0

    def test_silence_is_zero(self):
        assert speech_rate_proxy(vad_from_bits([0, 0, 0]), 1.0) == 0.0

    def test_nonpositive_duration(self):
        with pytest.raises(NonpositiveDuration):
            speech_rate_proxy(vad_from_bits([1]), 0.0)


class TestTrackF0:
    @pytest.mark.parametrize("f0", [100.0, 150.0, 220.0, 330.0])
    def test_pure_tone(self, f0):
        audio = synth_signal(SynthSpec(kind="tone", f0_hz=f0))
        track = track_f0(audio)
        voiced = track.voiced_f0()
        assert len(voiced) > 0.9 * track.n_frames
        frac_good = np.mean(np.abs(voiced - f0) / f0 < 0.01)
        assert frac_good >= 0.95

    def test_sawtooth_fundamental(self):
        audio = synth_signal(SynthSpec(kind="sawtooth", f0_hz=120.0))
        voiced = track_f0(audio).voiced_f0()
        assert np.median(np.abs(voiced - 120.0)) < 2.0

    def test_noise_unvoiced(self, noise_1s):
        track = track_f0(noise_1s)
        assert track.voiced.sum() < 0.05 * track.n_frames

    def test_unvoiced_marked_nan(self, noise_1s):
        track = track_f0(noise_1s)
        assert np.all(np.isnan(track.f0_hz[~track.voiced]))

    def test_bad_range(self, tone_150hz):
        with pytest.raises(InvalidRange):
            track_f0(tone_150hz, fmin_hz=500.0, fmax_hz=100.0)
        with pytest.raises(InvalidRange):
            track_f0(tone_150hz, voicing_threshold=1.5)

    def test_fmin_needs_room(self, tone_150hz):
        with pytest.raises(InvalidRange):
            track_f0(tone_150hz, FrameSpec(frame_len_ms=10.0, hop_ms=10.0), fmin_hz=75.0)


class TestF0Sigma:
    def test_constant_tone_near_zero(self, tone_150hz):
        assert f0_sigma(track_f0(tone_150hz)) < 1.0

    def test_needs_two_voiced(self, silence_1s):
        with pytest.raises(InsufficientVoicedFrames):
            f0_sigma(track_f0(silence_1s))


def test_prosody_features_wrapper(tone_150hz):
    feats = prosody_features(tone_150hz)
    assert feats.pause_ratio <= 0.1
    assert feats.f0_sigma < 1.0
    assert feats.speech_rate_proxy >= 1.0
