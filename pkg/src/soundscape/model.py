"""Soundscape domain types and validation.

Coordinate conventions used everywhere in this package:

* origin at the room centre, x toward width (right on the floor plan),
  y toward depth (up on the floor plan), all in metres;
* yaw 0 faces +y, positive yaw turns counterclockwise (radians);
* round rooms are ellipses with semi-axes width/2 and depth/2;
* the listener's ears sit at a fixed 1.6 m above the floor and source
  ``elevation`` is the height offset from that ear plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

FORMAT_VERSION = 1
EAR_HEIGHT = 1.6

HEAD_CIRCUMFERENCE_MIN = 0.3
HEAD_CIRCUMFERENCE_MAX = 0.8


@dataclass
class ValidationIssue:
    severity: str  # "error" | "warning"
    path: str
    message: str


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, path: str, message: str):
        self.issues.append(ValidationIssue("error", path, message))

    def warning(self, path: str, message: str):
        self.issues.append(ValidationIssue("warning", path, message))


@dataclass
class Room:
    shape: str = "rectangular"  # "rectangular" | "round"
    width: float = 10.0
    depth: float = 10.0
    height: float = 3.0
    floorplan: Any = None  # opaque image reference, passed through untouched
    extra: dict = field(default_factory=dict)

    def contains(self, x: float, y: float) -> bool:
        """Point-in-room test, boundary included."""
        if self.shape == "round":
            a, b = self.width / 2.0, self.depth / 2.0
            return (x / a) ** 2 + (y / b) ** 2 <= 1.0
        return abs(x) <= self.width / 2.0 and abs(y) <= self.depth / 2.0

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        """Nearest in-room point: per-axis clamp for rectangles, radial
        projection onto the ellipse for round rooms."""
        if self.shape == "round":
            a, b = self.width / 2.0, self.depth / 2.0
            s = math.sqrt((x / a) ** 2 + (y / b) ** 2)
            if s > 1.0:
                return x / s, y / s
            return x, y
        hw, hd = self.width / 2.0, self.depth / 2.0
        return min(max(x, -hw), hw), min(max(y, -hd), hd)


@dataclass
class ListenerConfig:
    position: tuple[float, float] = (0.0, 0.0)
    yaw: float = 0.0
    head_circumference: float = 0.55
    master_gain_db: float = 0.0
    extra: dict = field(default_factory=dict)


@dataclass
class AssetRef:
    """Either a remote reference (uri) or an embedded payload, never both."""

    uri: Optional[str] = None
    embedded: Optional[bytes] = None
    media_type: Optional[str] = None
    channels: Optional[int] = None
    sample_rate: Optional[int] = None
    duration: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def is_embedded(self) -> bool:
        return self.embedded is not None


@dataclass
class TimingConstraint:
    after_source: str
    mode: str = "after_completes"  # "after_completes" | "after_starts"
    extra: dict = field(default_factory=dict)


@dataclass
class SoundSource:
    id: str
    name: str = ""
    asset: AssetRef = field(default_factory=AssetRef)
    position_mode: str = "absolute"  # "absolute" | "relative"
    position: tuple[float, float] = (0.0, 0.0)
    elevation: float = 0.0
    gain_db: float = 0.0
    loop: bool = False
    reach_enabled: bool = False
    reach_radius: float = 3.0
    reach_fade_duration: float = 0.0
    start_on_enter: bool = False
    hidden: bool = False  # UI-only flag, audio ignores it
    spatialized: bool = True
    timings: list[TimingConstraint] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass
class Soundscape:
    title: str = ""
    description: str = ""
    tags: list[str] = field(default_factory=list)
    room: Room = field(default_factory=Room)
    listener: ListenerConfig = field(default_factory=ListenerConfig)
    sources: list[SoundSource] = field(default_factory=list)
    format_version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)

    def source_by_id(self, source_id: str) -> SoundSource:
        for src in self.sources:
            if src.id == source_id:
                return src
        raise KeyError(source_id)


def resolve_position(
    src: SoundSource, listener_position: tuple[float, float], listener_yaw: float
) -> tuple[float, float]:
    """Absolute room-frame position of a source.

    Relative sources store an offset in the listener frame (+x right,
    +y forward); it rotates with yaw and translates with the listener,
    so they move rigidly with the listener.
    """
    if src.position_mode == "absolute":
        return src.position
    ox, oy = src.position
    c, s = math.cos(listener_yaw), math.sin(listener_yaw)
    lx, ly = listener_position
    return (lx + c * ox - s * oy, ly + s * ox + c * oy)


def _finite(*values: float) -> bool:
    return all(isinstance(v, (int, float)) and math.isfinite(v) for v in values)


def _room_min_distance(room: Room, x: float, y: float) -> float:
    """Distance from (x, y) to the closest point of the room (0 if inside)."""
    if room.contains(x, y):
        return 0.0
    if room.shape == "rectangular":
        cx, cy = room.clamp(x, y)
        return math.hypot(x - cx, y - cy)
    # ellipse: the radial projection is not the true nearest point but is a
    # fine upper bound for an audibility warning
    cx, cy = room.clamp(x, y)
    return math.hypot(x - cx, y - cy)


def _check_timing_graph(s: Soundscape, report: ValidationReport):
    ids = {src.id for src in s.sources}
    completes_edges: dict[str, list[str]] = {src.id: [] for src in s.sources}
    for i, src in enumerate(s.sources):
        for j, t in enumerate(src.timings):
            path = f"/sources/{i}/timings/{j}"
            if t.mode not in ("after_completes", "after_starts"):
                report.error(path, f"unknown timing mode {t.mode!r}")
                continue
            if t.after_source == src.id:
                report.error(path, f"source {src.id!r} cannot depend on itself")
                continue
            if t.after_source not in ids:
                report.error(path, f"unknown source {t.after_source!r}")
                continue
            if t.mode == "after_completes":
                completes_edges[src.id].append(t.after_source)

    # cycle detection restricted to after_completes edges
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {sid: WHITE for sid in completes_edges}

    def visit(sid: str, stack: list[str]) -> Optional[list[str]]:
        color[sid] = GRAY
        stack.append(sid)
        for dep in completes_edges[sid]:
            if color.get(dep) == GRAY:
                return stack[stack.index(dep) :] + [dep]
            if color.get(dep) == WHITE:
                cycle = visit(dep, stack)
                if cycle:
                    return cycle
        stack.pop()
        color[sid] = BLACK
        return None

    for sid in completes_edges:
        if color[sid] == WHITE:
            cycle = visit(sid, [])
            if cycle:
                report.error("/sources", "timing cycle: " + " -> ".join(cycle))
                return


def validate(s: Soundscape) -> ValidationReport:
    """Check every model invariant; returns a report instead of raising."""
    report = ValidationReport()

    room = s.room
    if room.shape not in ("rectangular", "round"):
        report.error("/room/shape", f"unknown room shape {room.shape!r}")
    for name in ("width", "depth", "height"):
        v = getattr(room, name)
        if not _finite(v) or v <= 0:
            report.error(f"/room/{name}", f"{name} must be a positive finite number, got {v!r}")
    room_ok = report.ok

    lx, ly = s.listener.position
    if not _finite(lx, ly):
        report.error("/listener/position", "listener position must be finite")
    elif room_ok and not room.contains(lx, ly):
        report.error("/listener/position", f"listener at ({lx:g}, {ly:g}) is outside the room")
    if not _finite(s.listener.yaw):
        report.error("/listener/yaw", "yaw must be finite")
    hc = s.listener.head_circumference
    if not _finite(hc) or not (HEAD_CIRCUMFERENCE_MIN <= hc <= HEAD_CIRCUMFERENCE_MAX):
        report.error(
            "/listener/head_circumference",
            f"head circumference must be in [{HEAD_CIRCUMFERENCE_MIN}, "
            f"{HEAD_CIRCUMFERENCE_MAX}] m, got {hc!r}",
        )
    if not _finite(s.listener.master_gain_db):
        report.error("/listener/master_gain_db", "master gain must be finite")

    if s.format_version != FORMAT_VERSION:
        report.error(
            "/format_version",
            f"unsupported format_version {s.format_version!r} (this build reads {FORMAT_VERSION})",
        )

    seen: dict[str, int] = {}
    for i, src in enumerate(s.sources):
        path = f"/sources/{i}"
        if not src.id:
            report.error(f"{path}/id", "source id must be a non-empty string")
        elif src.id in seen:
            report.error(f"{path}/id", f"duplicate source id {src.id!r} (also /sources/{seen[src.id]})")
        else:
            seen[src.id] = i

        if src.position_mode not in ("absolute", "relative"):
            report.error(f"{path}/position_mode", f"unknown position mode {src.position_mode!r}")
        px, py = src.position
        if not _finite(px, py, src.elevation):
            report.error(f"{path}/position", "source position must be finite")
        elif src.position_mode == "absolute" and room_ok and not room.contains(px, py):
            report.error(f"{path}/position", f"source outside room at ({px:g}, {py:g})")

        if not _finite(src.gain_db):
            report.error(f"{path}/gain_db", "gain must be finite")

        if src.reach_enabled:
            if not _finite(src.reach_radius) or src.reach_radius <= 0:
                report.error(
                    f"{path}/reach_radius",
                    f"reach radius must be > 0 when reach is enabled, got {src.reach_radius!r}",
                )
            if not _finite(src.reach_fade_duration) or src.reach_fade_duration < 0:
                report.error(
                    f"{path}/reach_fade_duration", "reach fade duration must be >= 0"
                )
        if src.start_on_enter and not src.reach_enabled:
            report.warning(
                f"{path}/start_on_enter",
                "start_on_enter has no effect while reach is disabled",
            )

        asset = src.asset
        if (asset.uri is None) == (asset.embedded is None):
            report.error(
                f"{path}/asset", "asset must have exactly one of uri or embedded data"
            )

        # audibility: a reach-gated source no listener position can ever reach
        if src.reach_enabled and _finite(px, py) and _finite(src.reach_radius):
            if src.position_mode == "absolute" and room_ok:
                if _room_min_distance(room, px, py) > src.reach_radius:
                    report.warning(
                        f"{path}/reach_radius",
                        f"reach area of {src.id!r} does not touch the room; it can never be heard",
                    )
            elif src.position_mode == "relative":
                if math.hypot(px, py) > src.reach_radius:
                    report.warning(
                        f"{path}/reach_radius",
                        f"relative source {src.id!r} sits beyond its own reach radius; "
                        "it can never be heard",
                    )

    _check_timing_graph(s, report)
    return report
