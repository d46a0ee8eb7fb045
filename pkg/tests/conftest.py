"""Shared fixtures: short deterministic synthetic signals."""

import numpy as np
import pytest

from speechmark.audio_core import AudioBuffer
from speechmark.synth import SynthSpec, synth_signal


@pytest.fixture(scope="session")
def tone_150hz():
    return synth_signal(SynthSpec(kind="tone", f0_hz=150.0))


@pytest.fixture(scope="session")
def noise_1s():
    return synth_signal(SynthSpec(kind="noise", seed=3))


@pytest.fixture(scope="session")
def silence_1s():
    return synth_signal(SynthSpec(kind="silence"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_buffer(samples, rate=16000):
    return AudioBuffer(samples=np.asarray(samples, dtype=float), sample_rate_hz=rate)
