import base64
import math

import numpy as np
import pytest

from soundscape.audio import ENGINE_RATE, AudioBuffer, encode_wav
from soundscape.binaural import HrirSet
from soundscape.model import (
    AssetRef,
    ListenerConfig,
    Room,
    SoundSource,
    Soundscape,
    TimingConstraint,
)


def make_wav(samples, sample_rate=8000, depth="pcm16"):
    """Bytes of a WAV holding the given (channels, frames) float data."""
    return encode_wav(AudioBuffer(np.asarray(samples, dtype=float), sample_rate), depth=depth)


def tone_wav(freq=440.0, seconds=0.5, sample_rate=8000, amplitude=0.5):
    t = np.arange(int(seconds * sample_rate)) / sample_rate
    return make_wav(np.sin(2 * math.pi * freq * t) * amplitude, sample_rate)


def embedded_asset(wav_bytes, sample_rate=8000, channels=1, seconds=None):
    return AssetRef(
        embedded=wav_bytes,
        media_type="audio/wav",
        channels=channels,
        sample_rate=sample_rate,
        duration=seconds,
    )


def simple_source(source_id, x=0.0, y=0.0, wav=None, **kwargs):
    wav = wav if wav is not None else tone_wav()
    return SoundSource(
        id=source_id,
        name=source_id,
        asset=embedded_asset(wav),
        position=(x, y),
        **kwargs,
    )


def simple_scape(sources=None, width=10.0, depth=10.0, **kwargs):
    return Soundscape(
        title="test scape",
        room=Room(width=width, depth=depth, height=3.0),
        listener=ListenerConfig(),
        sources=sources or [],
        **kwargs,
    )


@pytest.fixture
def two_source_scape():
    return simple_scape(
        [
            simple_source("a", 2.0, 1.0, loop=True),
            simple_source("b", -2.0, 1.0, timings=[TimingConstraint("a", "after_starts")]),
        ]
    )


@pytest.fixture
def identity_hrirs():
    """Two-direction set whose IRs are unit impulses on both ears."""
    ir = np.zeros((2, 16))
    ir[:, 0] = 1.0
    return HrirSet(ENGINE_RATE, [(0.0, 0.0), (180.0, 0.0)], ir.copy(), ir.copy(), name="identity")


@pytest.fixture
def rng():
    return np.random.default_rng(0x50)


def constant_wav(value=0.5, frames=4000, sample_rate=ENGINE_RATE):
    return make_wav(np.full(frames, value), sample_rate)
