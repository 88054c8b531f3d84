"""Runtime audio graph: per-source players, gains, reach gating, timing
scheduler, spatialize-or-bypass lanes, master gain and recorder.

The engine renders fixed 128-frame blocks at 48 kHz. Control messages are
applied only at block boundaries, which is what makes output streams
bit-deterministic for a given message schedule: same soundscape, same
asset bytes, same messages at the same block indices, same samples out.

One owner calls :meth:`Engine.process_block`; any number of producers may
:meth:`Engine.post` messages into the ordered queue that is drained at
each block boundary.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .audio import ENGINE_RATE, AudioBuffer, decode_wav, mixdown_mono, resample
from .binaural import DistanceModel, HrirSet, Spatializer
from .model import SoundSource, Soundscape, resolve_position, validate

BLOCK_FRAMES = 128


class EngineError(Exception):
    pass


class MessageError(EngineError):
    """A control message the engine rejected; engine state is unchanged."""


# source fields that set_source_param may touch
MUTABLE_SOURCE_PARAMS = (
    "gain_db",
    "position",
    "elevation",
    "loop",
    "reach_enabled",
    "reach_radius",
    "reach_fade_duration",
    "start_on_enter",
)


def prepare_assets(scape: Soundscape, resolver=None) -> dict[str, AudioBuffer]:
    """Decode every source asset to mono at the engine rate.

    Embedded assets decode directly; uri assets go through ``resolver``
    (uri -> WAV bytes). Raises EngineError naming the source when neither
    works.
    """
    out: dict[str, AudioBuffer] = {}
    for src in scape.sources:
        a = src.asset
        if a.embedded is not None:
            payload = a.embedded
        elif a.uri is not None and resolver is not None:
            try:
                payload = resolver(a.uri)
            except Exception as e:  # noqa: BLE001
                raise EngineError(f"cannot fetch asset for source {src.id!r}: {e}")
        else:
            raise EngineError(f"no asset data for source {src.id!r} (uri {a.uri!r})")
        buf = mixdown_mono(decode_wav(payload))
        out[src.id] = resample(buf, ENGINE_RATE)
    return out


class _RampedGain:
    """Linear one-block ramp toward the last requested value (click-free)."""

    def __init__(self, value: float):
        self.current = value
        self.target = value

    def set(self, value: float):
        self.target = value

    def block(self, n: int) -> np.ndarray | float:
        if self.current == self.target:
            return self.current
        ramp = self.current + (self.target - self.current) * (np.arange(1, n + 1) / n)
        self.current = self.target
        return ramp


class _ReachSmoother:
    """Time-linear fade of the reach gate over the configured duration."""

    def __init__(self):
        self.current: float | None = None

    def block(self, target: float, fade_s: float, n: int, fs: int) -> np.ndarray | float:
        if self.current is None:
            self.current = target
        if self.current == target:
            return target
        if fade_s <= 0:
            self.current = target
            return target
        per_sample = 1.0 / (fade_s * fs)
        inc = np.arange(1, n + 1) * per_sample
        vals = self.current + np.clip(target - self.current, -inc, inc)
        self.current = float(vals[-1])
        return vals


class _Lane:
    def __init__(self, src: SoundSource, buffer: AudioBuffer, spatializer: Spatializer | None):
        self.src = src
        self.samples = buffer.data[0]
        self.spatializer = spatializer  # None for bypass lanes
        self.gain = _RampedGain(10.0 ** (src.gain_db / 20.0))
        self.reach = _ReachSmoother()
        self.cursor = 0
        self.playing = False
        self.started = False
        self.completed_count = 0
        self.started_this_visit = False
        self.start_clock: int | None = None

    def reset(self):
        self.cursor = 0
        self.playing = False
        self.started = False
        self.completed_count = 0
        self.started_this_visit = False
        self.start_clock = None
        self.reach.current = None
        if self.spatializer is not None:
            self.spatializer.reset()

    def start(self, clock: int):
        self.cursor = 0
        self.playing = True
        self.started = True
        self.start_clock = clock
        if self.spatializer is not None:
            self.spatializer.reset()

    def read_block(self, n: int) -> np.ndarray:
        """Next n samples from the play cursor; zero-padded at the end,
        wrapped when looping. Wraps and endings bump completed_count."""
        out = np.zeros(n)
        if len(self.samples) == 0:
            self.completed_count += 1
            self.playing = False
            return out
        pos = 0
        while pos < n:
            take = min(len(self.samples) - self.cursor, n - pos)
            out[pos : pos + take] = self.samples[self.cursor : self.cursor + take]
            self.cursor += take
            pos += take
            if self.cursor == len(self.samples):
                self.completed_count += 1
                if self.src.loop:
                    self.cursor = 0
                else:
                    self.playing = False
                    self.cursor = 0
                    break
        return out


class Engine:
    def __init__(
        self,
        scape: Soundscape,
        assets: dict[str, AudioBuffer],
        hrirs: HrirSet,
        model: DistanceModel | None = None,
        mode: str = "full_hrir",
    ):
        report = validate(scape)
        if not report.ok:
            first = report.errors[0]
            raise EngineError(f"invalid soundscape: {first.path}: {first.message}")
        self.scape = scape
        self.hrirs = hrirs
        self.model = model or DistanceModel()
        self.mode = mode

        iir_bank = None
        if mode == "high_performance":
            from .iirfit import fit_iir_approximation

            iir_bank = fit_iir_approximation(hrirs, order=6)

        self.lanes: dict[str, _Lane] = {}
        for src in scape.sources:
            if src.id not in assets:
                raise EngineError(f"missing asset for source {src.id!r}")
            buf = assets[src.id]
            if buf.channels != 1 or buf.sample_rate != ENGINE_RATE:
                buf = resample(mixdown_mono(buf), ENGINE_RATE)
            spat = None
            if src.spatialized:
                spat = Spatializer(
                    hrirs,
                    self.model,
                    head_circumference_m=scape.listener.head_circumference,
                    block_size=BLOCK_FRAMES,
                    sample_rate=ENGINE_RATE,
                    mode=mode,
                    iir_bank=iir_bank,
                )
            self.lanes[src.id] = _Lane(src, buf, spat)

        self.listener_position = tuple(scape.listener.position)
        self.listener_yaw = scape.listener.yaw
        self.master = _RampedGain(10.0 ** (scape.listener.master_gain_db / 20.0))
        self.transport = "stopped"
        self.clock = 0
        self.queue: deque[dict] = deque()
        self.rejected: list[tuple[dict, str]] = []
        self._recording: list[np.ndarray] | None = None
        self.finished_recording: AudioBuffer | None = None

    # ----- control -----

    def post(self, msg: dict):
        """Queue a message; it applies at the next block boundary."""
        self.queue.append(msg)

    def apply(self, msg: dict):
        """Apply one control message immediately (call between blocks).

        Raises MessageError and leaves the engine unchanged when the
        message is malformed or names an unknown source/parameter.
        """
        kind = msg.get("type")
        if kind == "pose":
            try:
                x, y = float(msg["x"]), float(msg["y"])
                yaw = float(msg.get("yaw", self.listener_yaw))
            except (KeyError, TypeError, ValueError):
                raise MessageError(f"malformed pose message: {msg!r}")
            self.listener_position = self.scape.room.clamp(x, y)
            self.listener_yaw = yaw
        elif kind == "transport":
            value = msg.get("value")
            if value == "play":
                self.transport = "playing"
            elif value == "stop":
                self.transport = "stopped"
                for lane in self.lanes.values():
                    lane.reset()
            else:
                raise MessageError(f"transport value must be play or stop, got {value!r}")
        elif kind == "set":
            self._apply_set(msg)
        elif kind == "master_gain":
            try:
                self.master.set(10.0 ** (float(msg["value_db"]) / 20.0))
            except (KeyError, TypeError, ValueError):
                raise MessageError(f"malformed master_gain message: {msg!r}")
        elif kind == "record":
            value = msg.get("value")
            if value == "start":
                self.start_record()
            elif value == "stop":
                self.finished_recording = self.stop_record()
            else:
                raise MessageError(f"record value must be start or stop, got {value!r}")
        else:
            raise MessageError(f"unknown message type {kind!r}")

    def _apply_set(self, msg: dict):
        source_id = msg.get("source")
        if source_id not in self.lanes:
            raise MessageError(f"unknown source {source_id!r}")
        path = msg.get("path")
        if path not in MUTABLE_SOURCE_PARAMS:
            raise MessageError(f"parameter {path!r} is not mutable (allowed: "
                               f"{', '.join(MUTABLE_SOURCE_PARAMS)})")
        lane = self.lanes[source_id]
        value = msg.get("value")
        try:
            if path == "gain_db":
                lane.src.gain_db = float(value)
                lane.gain.set(10.0 ** (lane.src.gain_db / 20.0))
            elif path == "position":
                p = (float(value["x"]), float(value["y"]))
                if lane.src.position_mode == "absolute":
                    p = self.scape.room.clamp(*p)
                lane.src.position = p
            elif path == "elevation":
                lane.src.elevation = float(value)
            elif path in ("loop", "reach_enabled", "start_on_enter"):
                if not isinstance(value, bool):
                    raise MessageError(f"{path} expects a boolean")
                setattr(lane.src, path, value)
            elif path == "reach_radius":
                v = float(value)
                if v <= 0:
                    raise MessageError("reach_radius must be > 0")
                lane.src.reach_radius = v
            elif path == "reach_fade_duration":
                v = float(value)
                if v < 0:
                    raise MessageError("reach_fade_duration must be >= 0")
                lane.src.reach_fade_duration = v
        except MessageError:
            raise
        except (KeyError, TypeError, ValueError):
            raise MessageError(f"malformed value for {path!r}: {value!r}")

    # ----- recorder -----

    def start_record(self):
        if self._recording is not None:
            raise MessageError("recording already in progress")
        self._recording = []

    def stop_record(self) -> AudioBuffer:
        if self._recording is None:
            raise MessageError("record stop without start")
        blocks = self._recording
        self._recording = None
        if not blocks:
            return AudioBuffer(np.zeros((2, 0)), ENGINE_RATE)
        return AudioBuffer(np.concatenate(blocks, axis=1), ENGINE_RATE)

    def pop_finished_recording(self) -> AudioBuffer | None:
        buf, self.finished_recording = self.finished_recording, None
        return buf

    # ----- scheduling -----

    def _reach_distance(self, lane: _Lane) -> float:
        sx, sy = resolve_position(lane.src, self.listener_position, self.listener_yaw)
        return math.hypot(sx - self.listener_position[0], sy - self.listener_position[1])

    def _inside_reach(self, lane: _Lane) -> bool:
        if not lane.src.reach_enabled:
            return True
        return self._reach_distance(lane) <= lane.src.reach_radius

    def _eligible(self, lane: _Lane) -> bool:
        src = lane.src
        for t in src.timings:
            dep = self.lanes.get(t.after_source)
            if dep is None:
                return False
            if t.mode == "after_completes" and dep.completed_count < 1:
                return False
            if t.mode == "after_starts" and not dep.started:
                return False
        if src.start_on_enter and src.reach_enabled:
            return self._inside_reach(lane) and not lane.started_this_visit
        return not lane.started

    def scheduler_tick(self) -> set[str]:
        """Start every source whose constraints hold at this boundary.

        Runs to a fixed point so same-boundary after_starts chains begin
        together. Also maintains the per-visit re-trigger state for
        start-on-enter sources.
        """
        started: set[str] = set()
        if self.transport != "playing":
            return started
        for lane in self.lanes.values():
            if lane.src.start_on_enter and lane.src.reach_enabled and not self._inside_reach(lane):
                lane.started_this_visit = False
        changed = True
        while changed:
            changed = False
            for lane in self.lanes.values():
                if lane.playing or not self._eligible(lane):
                    continue
                lane.start(self.clock)
                if lane.src.start_on_enter and lane.src.reach_enabled:
                    lane.started_this_visit = True
                started.add(lane.src.id)
                changed = True
        return started

    def reach_gain_value(self, source_id: str) -> float:
        """Current smoothed reach gain of a source (1 when reach is off)."""
        lane = self.lanes[source_id]
        if not lane.src.reach_enabled:
            return 1.0
        if lane.reach.current is None:
            return 1.0 if self._inside_reach(lane) else 0.0
        return lane.reach.current

    # ----- rendering -----

    def _lane_pose(self, lane: _Lane) -> tuple[float, float, float]:
        sx, sy = resolve_position(lane.src, self.listener_position, self.listener_yaw)
        dx = sx - self.listener_position[0]
        dy = sy - self.listener_position[1]
        dz = lane.src.elevation
        yaw = self.listener_yaw
        f = dx * -math.sin(yaw) + dy * math.cos(yaw)
        l = dx * -math.cos(yaw) + dy * -math.sin(yaw)
        horiz = math.hypot(dx, dy)
        dist = math.hypot(horiz, dz)
        if dist == 0.0:
            return 0.0, 0.0, 0.0
        azimuth = math.atan2(l, f)
        elevation = math.atan2(dz, horiz)
        return azimuth, elevation, dist

    def process_block(self) -> np.ndarray:
        """Render the next 128-frame stereo block, shape (2, 128)."""
        n = BLOCK_FRAMES
        while self.queue:
            msg = self.queue.popleft()
            try:
                self.apply(msg)
            except MessageError as e:
                self.rejected.append((msg, str(e)))
        self.scheduler_tick()

        mix = np.zeros((2, n))
        if self.transport == "playing":
            for lane in self.lanes.values():
                if not lane.playing:
                    continue
                mono = lane.read_block(n)
                gain = lane.gain.block(n)
                if lane.src.reach_enabled:
                    target = 1.0 if self._inside_reach(lane) else 0.0
                    gain = gain * lane.reach.block(
                        target, lane.src.reach_fade_duration, n, ENGINE_RATE
                    )
                mono = mono * gain
                if lane.spatializer is None:
                    mix[0] += mono
                    mix[1] += mono
                else:
                    az, el, dist = self._lane_pose(lane)
                    mix += lane.spatializer.process_block(mono, az, el, dist)
        out = mix * self.master.block(n)
        if self._recording is not None:
            self._recording.append(out.copy())
        self.clock += n
        return out


def build_engine(
    scape: Soundscape,
    assets: dict[str, AudioBuffer],
    hrirs: HrirSet,
    model: DistanceModel | None = None,
    mode: str = "full_hrir",
) -> Engine:
    return Engine(scape, assets, hrirs, model, mode)
