"""Binaural soundscape engine: author, validate, audition and render
interactive 3D soundscapes (sources with reach and timing inside a bounded
room) to stereo, live over a session stream or offline to WAV."""

from .audio import ENGINE_RATE, AudioBuffer, decode_wav, encode_wav, mixdown_mono, resample
from .binaural import (
    DistanceModel,
    HrirSet,
    Spatializer,
    air_absorption_cutoff,
    distance_gain,
    itd_delays,
    load_hrir_dir,
    near_field_ild_gains,
    save_hrir_dir,
    select_hrir,
    synthetic_head_hrirs,
)
from .document import deserialize, embed_assets, serialize
from .engine import BLOCK_FRAMES, Engine, build_engine, prepare_assets
from .model import (
    AssetRef,
    ListenerConfig,
    Room,
    SoundSource,
    Soundscape,
    TimingConstraint,
    resolve_position,
    validate,
)
from .trajectory import Trajectory, Waypoint, pose_at, render_offline

__version__ = "0.1.0"

__all__ = [
    "ENGINE_RATE",
    "BLOCK_FRAMES",
    "AudioBuffer",
    "decode_wav",
    "encode_wav",
    "mixdown_mono",
    "resample",
    "DistanceModel",
    "HrirSet",
    "Spatializer",
    "air_absorption_cutoff",
    "distance_gain",
    "itd_delays",
    "near_field_ild_gains",
    "select_hrir",
    "synthetic_head_hrirs",
    "load_hrir_dir",
    "save_hrir_dir",
    "deserialize",
    "serialize",
    "embed_assets",
    "Engine",
    "build_engine",
    "prepare_assets",
    "AssetRef",
    "ListenerConfig",
    "Room",
    "SoundSource",
    "Soundscape",
    "TimingConstraint",
    "resolve_position",
    "validate",
    "Trajectory",
    "Waypoint",
    "pose_at",
    "render_offline",
]
