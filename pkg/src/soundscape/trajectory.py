"""Scripted listener navigation: timed waypoints rendered to a stereo
buffer through the engine, deterministic to the byte.

The pose is re-issued at every 128-frame block boundary (about 2.67 ms),
far finer than interactive input; that grid is the reproducibility
contract for offline renders. Trajectory documents are JSON
(docs/trajectory.schema.json).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .audio import ENGINE_RATE, AudioBuffer
from .binaural import DistanceModel, HrirSet
from .engine import BLOCK_FRAMES, build_engine
from .model import Soundscape

TWO_PI = 2.0 * math.pi


class TrajectoryError(Exception):
    pass


@dataclass
class Waypoint:
    t: float
    position: tuple[float, float]
    yaw: float


@dataclass
class Trajectory:
    waypoints: list[Waypoint]
    duration: float

    def __post_init__(self):
        if not self.waypoints:
            raise TrajectoryError("trajectory needs at least one waypoint")
        if self.waypoints[0].t != 0.0:
            raise TrajectoryError("first waypoint must be at t = 0")
        times = [w.t for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise TrajectoryError("waypoint times must be strictly increasing")
        if self.duration < times[-1]:
            raise TrajectoryError("duration must cover the last waypoint")


def _lerp_yaw(y0: float, y1: float, alpha: float) -> float:
    """Interpolate along the shorter arc; result normalized to [0, 2*pi)."""
    delta = (y1 - y0 + math.pi) % TWO_PI - math.pi
    return (y0 + delta * alpha) % TWO_PI


def pose_at(traj: Trajectory, t: float) -> tuple[tuple[float, float], float]:
    """((x, y), yaw) at time t; held constant after the last waypoint."""
    if t < 0 or t > traj.duration:
        raise TrajectoryError(f"t = {t:g} outside [0, {traj.duration:g}]")
    pts = traj.waypoints
    if t >= pts[-1].t:
        w = pts[-1]
        return w.position, w.yaw % TWO_PI
    hi = next(i for i, w in enumerate(pts) if w.t > t)
    w0, w1 = pts[hi - 1], pts[hi]
    alpha = (t - w0.t) / (w1.t - w0.t)
    x = w0.position[0] + (w1.position[0] - w0.position[0]) * alpha
    y = w0.position[1] + (w1.position[1] - w0.position[1]) * alpha
    return (x, y), _lerp_yaw(w0.yaw, w1.yaw, alpha)


def render_offline(
    scape: Soundscape,
    traj: Trajectory,
    assets,
    hrirs: HrirSet,
    model: DistanceModel | None = None,
    mode: str = "full_hrir",
) -> AudioBuffer:
    """Drive the engine along the trajectory and return the recording.

    Renders ceil(duration * fs / block) blocks, posing the listener at
    every block boundary, with transport play from t = 0.
    """
    engine = build_engine(scape, assets, hrirs, model, mode)
    blocks = int(math.ceil(traj.duration * ENGINE_RATE / BLOCK_FRAMES))
    engine.start_record()
    engine.apply({"type": "transport", "value": "play"})
    for b in range(blocks):
        (x, y), yaw = pose_at(traj, b * BLOCK_FRAMES / ENGINE_RATE)
        engine.apply({"type": "pose", "x": x, "y": y, "yaw": yaw})
        engine.process_block()
    return engine.stop_record()


def trajectory_from_document(doc: dict) -> Trajectory:
    try:
        waypoints = [
            Waypoint(float(w["t"]), (float(w["x"]), float(w["y"])), float(w.get("yaw", 0.0)))
            for w in doc["waypoints"]
        ]
        duration = float(doc["duration"])
    except (KeyError, TypeError, ValueError) as e:
        raise TrajectoryError(f"malformed trajectory document: {e}")
    return Trajectory(waypoints, duration)


def load_trajectory(path: str) -> Trajectory:
    with open(path, encoding="utf-8") as f:
        return trajectory_from_document(json.load(f))
