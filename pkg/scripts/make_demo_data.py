#!/usr/bin/env python3
"""Regenerate the demo soundscape and trajectory under data/demo/.

Everything is synthesized from fixed seeds, so reruns are byte-identical.
"""

import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from soundscape.audio import AudioBuffer, encode_wav
from soundscape.document import canonical_dumps, serialize, to_document
from soundscape.model import (
    AssetRef,
    ListenerConfig,
    Room,
    SoundSource,
    Soundscape,
    TimingConstraint,
)

RATE = 8000
OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data", "demo")


def wav(samples):
    return encode_wav(AudioBuffer(np.asarray(samples), RATE), depth="pcm16")


def fountain(seconds=1.5):
    rng = np.random.default_rng(101)
    n = int(seconds * RATE)
    noise = rng.uniform(-1.0, 1.0, n)
    # crude brown-ish wash: leaky integrator over white noise
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = 0.97 * acc + 0.03 * noise[i]
        out[i] = acc
    out /= np.max(np.abs(out))
    return wav(0.4 * out)


def chime(seconds=1.2):
    n = int(seconds * RATE)
    t = np.arange(n) / RATE
    tone = sum(
        a * np.sin(2 * math.pi * f * t) for f, a in [(523.25, 0.5), (659.25, 0.3), (1046.5, 0.2)]
    )
    env = np.exp(-3.0 * t)
    return wav(0.6 * tone * env)


def narration(seconds=2.0):
    n = int(seconds * RATE)
    t = np.arange(n) / RATE
    # two-note motif standing in for a voice clip
    first = np.sin(2 * math.pi * 330.0 * t) * (t < 0.9)
    second = np.sin(2 * math.pi * 392.0 * t) * (t >= 1.0)
    env = np.minimum(1.0, 10 * np.minimum(t, seconds - t))
    return wav(0.45 * (first + second) * env)


def asset(data, seconds):
    return AssetRef(
        embedded=data, media_type="audio/wav", channels=1, sample_rate=RATE, duration=seconds
    )


def build() -> Soundscape:
    return Soundscape(
        title="Courtyard demo",
        description="A fountain, a chime that answers when you come close, "
        "and a motif that follows the fountain's first loop.",
        tags=["demo", "courtyard"],
        room=Room(shape="rectangular", width=12.0, depth=10.0, height=3.5),
        listener=ListenerConfig(position=(0.0, -3.0), yaw=0.0, head_circumference=0.55),
        sources=[
            SoundSource(
                id="fountain",
                name="Fountain",
                asset=asset(fountain(), 1.5),
                position=(2.0, 1.0),
                gain_db=-3.0,
                loop=True,
            ),
            SoundSource(
                id="chime",
                name="Chime",
                asset=asset(chime(), 1.2),
                position=(-3.0, 2.0),
                elevation=0.8,
                reach_enabled=True,
                reach_radius=2.5,
                reach_fade_duration=0.4,
                start_on_enter=True,
            ),
            SoundSource(
                id="motif",
                name="Motif",
                asset=asset(narration(), 2.0),
                position=(0.0, -1.0),
                gain_db=-6.0,
                timings=[TimingConstraint("fountain", "after_completes")],
            ),
        ],
    )


TRAJECTORY = {
    "duration": 10.0,
    "waypoints": [
        {"t": 0.0, "x": 0.0, "y": -3.0, "yaw": 0.0},
        {"t": 4.0, "x": -3.0, "y": 1.5, "yaw": 0.8},
        {"t": 6.0, "x": -2.5, "y": 2.0, "yaw": 1.6},
        {"t": 10.0, "x": 2.0, "y": 2.0, "yaw": 5.5},
    ],
}


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    scape_path = os.path.join(OUT_DIR, "soundscape.json")
    with open(scape_path, "wb") as f:
        f.write(serialize(build()))
    traj_path = os.path.join(OUT_DIR, "trajectory.json")
    with open(traj_path, "wb") as f:
        f.write(canonical_dumps(TRAJECTORY))
    print(f"wrote {scape_path} and {traj_path}")


if __name__ == "__main__":
    main()
