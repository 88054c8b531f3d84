"""Canonical JSON interchange for soundscapes (format_version 1).

The canonical form sorts keys lexicographically, strips insignificant
whitespace, and rounds floats to at most 9 significant digits, so two
exports of the same soundscape are byte-identical, diffable and hashable.
Unknown fields are kept on a round-trip (forward compatibility) and
reported as warnings. Embedded assets travel as base64 strings with a
media-type tag; see docs/soundscape.schema.json.
"""

from __future__ import annotations

import base64
import binascii
import json
from typing import Any, Callable

from . import audio
from .model import (
    AssetRef,
    ListenerConfig,
    Room,
    SoundSource,
    Soundscape,
    TimingConstraint,
    ValidationReport,
    validate,
)


class DocumentError(Exception):
    """Structural problem in a soundscape document."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message


class AssetResolutionError(Exception):
    def __init__(self, source_id: str, uri: str, cause: Exception):
        super().__init__(f"could not resolve asset for source {source_id!r} (uri {uri!r}): {cause}")
        self.source_id = source_id
        self.uri = uri


def canonical_number(x: float) -> float:
    """Round to 9 significant digits; idempotent."""
    if isinstance(x, int):
        return x
    return float(f"{x:.9g}")


def _canonicalize(value):
    if isinstance(value, float):
        return canonical_number(value)
    if isinstance(value, dict):
        return {k: _canonicalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonicalize(v) for v in value]
    return value


def canonical_dumps(doc: dict) -> bytes:
    return json.dumps(
        _canonicalize(doc), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def _asset_to_dict(a: AssetRef) -> dict:
    d: dict[str, Any] = {}
    if a.uri is not None:
        d["uri"] = a.uri
    if a.embedded is not None:
        d["data"] = base64.b64encode(a.embedded).decode("ascii")
        d["media_type"] = a.media_type or "application/octet-stream"
    if a.channels is not None:
        d["channels"] = a.channels
    if a.sample_rate is not None:
        d["sample_rate"] = a.sample_rate
    if a.duration is not None:
        d["duration"] = a.duration
    d.update(a.extra)
    return d


def to_document(s: Soundscape) -> dict:
    doc = {
        "format_version": s.format_version,
        "title": s.title,
        "description": s.description,
        "tags": list(s.tags),
        "room": {
            "shape": s.room.shape,
            "width": s.room.width,
            "depth": s.room.depth,
            "height": s.room.height,
            "floorplan": s.room.floorplan,
            **s.room.extra,
        },
        "listener": {
            "position": {"x": s.listener.position[0], "y": s.listener.position[1]},
            "yaw": s.listener.yaw,
            "head_circumference": s.listener.head_circumference,
            "master_gain_db": s.listener.master_gain_db,
            **s.listener.extra,
        },
        "sources": [
            {
                "id": src.id,
                "name": src.name,
                "asset": _asset_to_dict(src.asset),
                "position_mode": src.position_mode,
                "position": {"x": src.position[0], "y": src.position[1]},
                "elevation": src.elevation,
                "gain_db": src.gain_db,
                "loop": src.loop,
                "reach_enabled": src.reach_enabled,
                "reach_radius": src.reach_radius,
                "reach_fade_duration": src.reach_fade_duration,
                "start_on_enter": src.start_on_enter,
                "hidden": src.hidden,
                "spatialized": src.spatialized,
                "timings": [
                    {"after_source": t.after_source, "mode": t.mode, **t.extra}
                    for t in src.timings
                ],
                **src.extra,
            }
            for src in s.sources
        ],
        **s.extra,
    }
    return doc


def serialize(s: Soundscape) -> bytes:
    """Canonical UTF-8 JSON bytes. Fails if the soundscape has validation errors."""
    report = validate(s)
    if not report.ok:
        first = report.errors[0]
        raise DocumentError(first.path, f"cannot serialize invalid soundscape: {first.message}")
    return canonical_dumps(to_document(s))


class _Reader:
    """Typed field access over a JSON object with document-path errors."""

    def __init__(self, obj: Any, path: str, warnings: list[str]):
        if not isinstance(obj, dict):
            raise DocumentError(path or "/", f"expected an object, got {type(obj).__name__}")
        self.obj = obj
        self.path = path
        self.warnings = warnings
        self.seen: set[str] = set()

    def _get(self, key: str, required: bool):
        if key not in self.obj:
            if required:
                raise DocumentError(f"{self.path}/{key}", "missing required field")
            return None
        self.seen.add(key)
        return self.obj[key]

    def child(self, key: str) -> "_Reader":
        return _Reader(self._get(key, True), f"{self.path}/{key}", self.warnings)

    def number(self, key: str, default=None) -> float:
        v = self._get(key, default is None)
        if v is None:
            return default
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise DocumentError(f"{self.path}/{key}", f"expected a number, got {v!r}")
        return float(v)

    def integer(self, key: str, default=None) -> int:
        v = self._get(key, default is None)
        if v is None:
            return default
        if isinstance(v, bool) or not isinstance(v, int):
            raise DocumentError(f"{self.path}/{key}", f"expected an integer, got {v!r}")
        return v

    def string(self, key: str, default=None) -> str:
        v = self._get(key, default is None)
        if v is None:
            return default
        if not isinstance(v, str):
            raise DocumentError(f"{self.path}/{key}", f"expected a string, got {v!r}")
        return v

    def boolean(self, key: str, default=None) -> bool:
        v = self._get(key, default is None)
        if v is None:
            return default
        if not isinstance(v, bool):
            raise DocumentError(f"{self.path}/{key}", f"expected a boolean, got {v!r}")
        return v

    def array(self, key: str, default=None) -> list:
        v = self._get(key, default is None)
        if v is None:
            return default
        if not isinstance(v, list):
            raise DocumentError(f"{self.path}/{key}", f"expected an array, got {v!r}")
        return v

    def raw(self, key: str, default=None):
        v = self._get(key, False)
        return default if v is None else v

    def extras(self, kept: bool = True) -> dict:
        extra = {k: v for k, v in self.obj.items() if k not in self.seen}
        note = "unknown field kept as-is" if kept else "unknown field ignored"
        for k in extra:
            self.warnings.append(f"{self.path}/{k}: {note}")
        return extra


def _point(r: _Reader, key: str) -> tuple[float, float]:
    p = r.child(key)
    x, y = p.number("x"), p.number("y")
    p.extras(kept=False)
    return (x, y)


def _parse_asset(r: _Reader) -> AssetRef:
    uri = r.string("uri", default="") or None
    data64 = r.string("data", default="") or None
    embedded = None
    if data64 is not None:
        try:
            embedded = base64.b64decode(data64, validate=True)
        except (binascii.Error, ValueError) as e:
            raise DocumentError(f"{r.path}/data", f"invalid base64 payload: {e}")
    media_type = r.string("media_type", default="") or None
    channels = r.integer("channels", default=0) or None
    sample_rate = r.integer("sample_rate", default=0) or None
    duration = r.number("duration", default=-1.0)
    return AssetRef(
        uri=uri,
        embedded=embedded,
        media_type=media_type,
        channels=channels,
        sample_rate=sample_rate,
        duration=None if duration < 0 else duration,
        extra=r.extras(),
    )


def parse_document(doc: Any) -> tuple[Soundscape, list[str]]:
    """Build a Soundscape from decoded JSON; returns (scape, warnings)."""
    warnings: list[str] = []
    root = _Reader(doc, "", warnings)

    room_r = root.child("room")
    room = Room(
        shape=room_r.string("shape"),
        width=room_r.number("width"),
        depth=room_r.number("depth"),
        height=room_r.number("height"),
        floorplan=room_r.raw("floorplan"),
        extra=room_r.extras(),
    )

    lis_r = root.child("listener")
    listener = ListenerConfig(
        position=_point(lis_r, "position"),
        yaw=lis_r.number("yaw", default=0.0),
        head_circumference=lis_r.number("head_circumference", default=0.55),
        master_gain_db=lis_r.number("master_gain_db", default=0.0),
        extra=lis_r.extras(),
    )

    sources = []
    for i, item in enumerate(root.array("sources", default=[])):
        src_r = _Reader(item, f"/sources/{i}", warnings)
        timings = []
        for j, titem in enumerate(src_r.array("timings", default=[])):
            t_r = _Reader(titem, f"/sources/{i}/timings/{j}", warnings)
            timings.append(
                TimingConstraint(
                    after_source=t_r.string("after_source"),
                    mode=t_r.string("mode", default="after_completes"),
                    extra=t_r.extras(),
                )
            )
        sources.append(
            SoundSource(
                id=src_r.string("id"),
                name=src_r.string("name", default=""),
                asset=_parse_asset(src_r.child("asset")),
                position_mode=src_r.string("position_mode", default="absolute"),
                position=_point(src_r, "position"),
                elevation=src_r.number("elevation", default=0.0),
                gain_db=src_r.number("gain_db", default=0.0),
                loop=src_r.boolean("loop", default=False),
                reach_enabled=src_r.boolean("reach_enabled", default=False),
                reach_radius=src_r.number("reach_radius", default=3.0),
                reach_fade_duration=src_r.number("reach_fade_duration", default=0.0),
                start_on_enter=src_r.boolean("start_on_enter", default=False),
                hidden=src_r.boolean("hidden", default=False),
                spatialized=src_r.boolean("spatialized", default=True),
                timings=timings,
                extra=src_r.extras(),
            )
        )

    scape = Soundscape(
        title=root.string("title", default=""),
        description=root.string("description", default=""),
        tags=[str(t) for t in root.array("tags", default=[])],
        room=room,
        listener=listener,
        sources=sources,
        format_version=root.integer("format_version", default=1),
        extra=root.extras(),
    )
    return scape, warnings


def deserialize(data: bytes | str) -> Soundscape:
    """Parse canonical (or any syntactically valid) JSON into a Soundscape."""
    scape, _ = deserialize_with_warnings(data)
    return scape


def deserialize_with_warnings(data: bytes | str) -> tuple[Soundscape, list[str]]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise DocumentError("/", f"invalid JSON: {e}")
    return parse_document(doc)


def embed_assets(s: Soundscape, resolver: Callable[[str], bytes]) -> Soundscape:
    """Return a copy with every remote asset fetched and embedded.

    Audio metadata (channels, sample rate, duration) is recomputed from the
    decoded bytes. Already-embedded assets are untouched, so the operation
    is idempotent.
    """
    out, _ = parse_document(to_document(s))  # deep copy through the document form
    for src in out.sources:
        a = src.asset
        if a.embedded is not None:
            continue
        if a.uri is None:
            raise AssetResolutionError(src.id, "", ValueError("asset has neither uri nor data"))
        try:
            payload = resolver(a.uri)
        except Exception as e:  # noqa: BLE001 - resolver failures become a named error
            raise AssetResolutionError(src.id, a.uri, e)
        buf = audio.decode_wav(payload)
        src.asset = AssetRef(
            embedded=payload,
            media_type="audio/wav",
            channels=buf.channels,
            sample_rate=buf.sample_rate,
            duration=buf.duration,
            extra=a.extra,
        )
    return out


def store_report(report: ValidationReport) -> list[dict]:
    """Report in the JSON shape used by the HTTP API and the CLI."""
    return [
        {"severity": i.severity, "path": i.path, "message": i.message} for i in report.issues
    ]
