"""Network front door: soundscape/asset storage, synchronous renders, and
live audition sessions streaming spatialized PCM.

Storage is a content-addressed directory tree (ids are SHA-256 prefixes)
with an index JSON; writes go through a temp file and an atomic rename.

Session wire format (server -> client), little-endian:
    u32 magic 0x50534F4E | u32 sequence | u64 starting sample index |
    u16 frame count F (= 960, 20 ms) | F interleaved stereo float32
Client -> server messages are JSON text: {"type": "pose", x, y, yaw},
{"type": "transport", "value": "play"|"stop"},
{"type": "set", "source", "path", "value"},
{"type": "record", "value": "start"|"stop"}.
Frames are paced at real-time rate (20 ms per frame) unless the app is
created with realtime=False.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import os
import struct
import tempfile
import time

import numpy as np
from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import audio, document
from .binaural import DistanceModel, HrirSet, load_hrir_dir, synthetic_head_hrirs
from .engine import Engine, build_engine, prepare_assets
from .model import validate
from .trajectory import TrajectoryError, render_offline, trajectory_from_document

STREAM_MAGIC = 0x50534F4E
WIRE_FRAME = 960  # samples per wire frame (20 ms at 48 kHz)
MAX_RENDER_SECONDS = 600.0
ID_HEX_CHARS = 16


class Storage:
    """Content-addressed file store for assets and soundscape documents."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(os.path.join(root, "assets"), exist_ok=True)
        os.makedirs(os.path.join(root, "soundscapes"), exist_ok=True)
        self.index_path = os.path.join(root, "index.json")
        if not os.path.exists(self.index_path):
            self._write_index({})

    def _write_index(self, index: dict):
        self._atomic_write(self.index_path, json.dumps(index, indent=2).encode("utf-8"))

    def _read_index(self) -> dict:
        with open(self.index_path, encoding="utf-8") as f:
            return json.load(f)

    @staticmethod
    def _atomic_write(path: str, data: bytes):
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path))
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @staticmethod
    def content_id(data: bytes) -> str:
        return hashlib.sha256(data).hexdigest()[:ID_HEX_CHARS]

    def _record(self, kind: str, item_id: str, meta: dict):
        index = self._read_index()
        index[item_id] = {"kind": kind, "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()), **meta}
        self._write_index(index)

    def put_asset(self, data: bytes, meta: dict) -> str:
        asset_id = self.content_id(data)
        self._atomic_write(os.path.join(self.root, "assets", asset_id), data)
        self._record("asset", asset_id, meta)
        return asset_id

    def get_asset(self, asset_id: str) -> bytes | None:
        if os.path.basename(asset_id) != asset_id:
            return None
        path = os.path.join(self.root, "assets", asset_id)
        if not os.path.exists(path):
            return None
        with open(path, "rb") as f:
            return f.read()

    def put_soundscape(self, canonical: bytes, meta: dict) -> str:
        scape_id = self.content_id(canonical)
        self._atomic_write(os.path.join(self.root, "soundscapes", scape_id + ".json"), canonical)
        self._record("soundscape", scape_id, meta)
        return scape_id

    def get_soundscape(self, scape_id: str) -> bytes | None:
        if os.path.basename(scape_id) != scape_id:
            return None
        path = os.path.join(self.root, "soundscapes", scape_id + ".json")
        if not os.path.exists(path):
            return None
        with open(path, "rb") as f:
            return f.read()

    def asset_resolver(self, uri: str) -> bytes:
        """Map an asset uri (bare id, 'asset:<id>' or '.../assets/<id>') to bytes."""
        candidate = uri
        if candidate.startswith("asset:"):
            candidate = candidate[len("asset:"):]
        candidate = candidate.rstrip("/").rsplit("/", 1)[-1]
        data = self.get_asset(candidate)
        if data is None:
            raise KeyError(f"unknown asset {uri!r}")
        return data


def _error(status: int, code: str, message: str, path: str = "") -> JSONResponse:
    return JSONResponse({"code": code, "message": message, "path": path}, status_code=status)


def pack_frame(sequence: int, sample_index: int, samples: np.ndarray) -> bytes:
    """samples: float array shaped (2, F) -> wire bytes."""
    frames = samples.shape[1]
    header = struct.pack("<IIQH", STREAM_MAGIC, sequence, sample_index, frames)
    interleaved = np.ascontiguousarray(samples.T, dtype="<f4")
    return header + interleaved.tobytes()


def unpack_frame(data: bytes) -> tuple[int, int, np.ndarray]:
    """Wire bytes -> (sequence, sample_index, samples shaped (2, F))."""
    magic, sequence, sample_index, frames = struct.unpack_from("<IIQH", data)
    if magic != STREAM_MAGIC:
        raise ValueError(f"bad stream magic 0x{magic:08X}")
    payload = np.frombuffer(data, dtype="<f4", offset=18, count=frames * 2)
    return sequence, sample_index, payload.reshape(frames, 2).T.astype(np.float64)


class _SessionRunner:
    """Owns one engine and the pacing loop of one live connection."""

    def __init__(self, engine: Engine, realtime: bool):
        self.engine = engine
        self.realtime = realtime
        self.sequence = 0
        self.buffered = np.zeros((2, 0))

    def next_frame(self) -> tuple[int, int, np.ndarray]:
        while self.buffered.shape[1] < WIRE_FRAME:
            self.buffered = np.concatenate([self.buffered, self.engine.process_block()], axis=1)
        frame = self.buffered[:, :WIRE_FRAME]
        self.buffered = self.buffered[:, WIRE_FRAME:]
        seq = self.sequence
        self.sequence += 1
        sample_index = seq * WIRE_FRAME
        return seq, sample_index, frame


def create_app(
    data_dir: str,
    hrir_dir: str | None = None,
    realtime: bool = True,
    hrirs: HrirSet | None = None,
    cors_origin: str = "*",
) -> FastAPI:
    storage = Storage(data_dir)
    if hrirs is None:
        hrirs = load_hrir_dir(hrir_dir) if hrir_dir else synthetic_head_hrirs()
    model = DistanceModel()

    app = FastAPI(title="soundscape service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.storage = storage
    app.state.hrirs = hrirs

    # decoded/resampled source buffers are immutable; share them across the
    # engines of concurrent and repeated sessions on the same soundscape
    asset_cache: dict[str, dict] = {}

    def prepared_assets_for(scape_id: str, scape):
        if scape_id not in asset_cache:
            if len(asset_cache) >= 8:
                asset_cache.pop(next(iter(asset_cache)))
            asset_cache[scape_id] = prepare_assets(scape, resolver=storage.asset_resolver)
        return asset_cache[scape_id]

    @app.put("/assets")
    async def put_asset(request: Request):
        data = await request.body()
        try:
            buf = audio.decode_wav(data)
        except audio.AudioError as e:
            return _error(400, "unsupported_codec", str(e), "/assets")
        asset_id = storage.put_asset(
            data,
            {"channels": buf.channels, "sample_rate": buf.sample_rate, "duration": buf.duration},
        )
        return {
            "id": asset_id,
            "duration": buf.duration,
            "channels": buf.channels,
            "sample_rate": buf.sample_rate,
        }

    @app.get("/assets/{asset_id}")
    async def get_asset(asset_id: str):
        data = storage.get_asset(asset_id)
        if data is None:
            return _error(404, "not_found", f"no asset {asset_id!r}", f"/assets/{asset_id}")
        return Response(content=data, media_type="audio/wav")

    @app.put("/soundscapes")
    async def put_soundscape(request: Request):
        raw = await request.body()
        try:
            scape, _ = document.deserialize_with_warnings(raw)
        except document.DocumentError as e:
            return _error(400, "malformed_document", e.reason, e.path)
        report = validate(scape)
        report_json = document.store_report(report)
        if not report.ok:
            return JSONResponse(
                {"code": "invalid_soundscape", "message": "validation failed",
                 "report": report_json},
                status_code=422,
            )
        canonical = document.serialize(scape)
        scape_id = storage.put_soundscape(canonical, {"title": scape.title})
        return {"id": scape_id, "report": report_json}

    @app.get("/soundscapes/{scape_id}")
    async def get_soundscape(scape_id: str, embed: bool = False):
        raw = storage.get_soundscape(scape_id)
        if raw is None:
            return _error(404, "not_found", f"no soundscape {scape_id!r}", f"/soundscapes/{scape_id}")
        if embed:
            scape = document.deserialize(raw)
            try:
                scape = document.embed_assets(scape, storage.asset_resolver)
            except document.AssetResolutionError as e:
                return _error(422, "unresolved_asset", str(e), f"/soundscapes/{scape_id}")
            raw = document.serialize(scape)
        return Response(content=raw, media_type="application/json")

    @app.post("/render")
    async def render(request: Request):
        body = await request.json()
        scape_id = body.get("soundscape")
        raw = storage.get_soundscape(scape_id) if scape_id else None
        if raw is None:
            return _error(404, "not_found", f"no soundscape {scape_id!r}", "/render")
        try:
            traj = trajectory_from_document(body.get("trajectory", {}))
        except TrajectoryError as e:
            return _error(400, "malformed_trajectory", str(e), "/render")
        if traj.duration > MAX_RENDER_SECONDS:
            return _error(
                413,
                "render_too_long",
                f"projected duration {traj.duration:g} s exceeds {MAX_RENDER_SECONDS:g} s",
                "/render",
            )
        depth = body.get("depth", "float32")
        if depth not in ("pcm16", "float32"):
            return _error(400, "bad_depth", f"depth must be pcm16 or float32, got {depth!r}", "/render")
        scape = document.deserialize(raw)
        loop = asyncio.get_running_loop()

        def work() -> bytes:
            assets = prepared_assets_for(scape_id, scape)
            buf = render_offline(scape, traj, assets, hrirs, model)
            return audio.encode_wav(buf, depth=depth)

        wav = await loop.run_in_executor(None, work)
        return Response(content=wav, media_type="audio/wav")

    @app.websocket("/session/{scape_id}")
    async def session(ws: WebSocket, scape_id: str):
        await ws.accept()
        raw = storage.get_soundscape(scape_id)
        if raw is None:
            await ws.send_text(json.dumps(
                {"type": "error", "code": "not_found", "message": f"no soundscape {scape_id!r}"}
            ))
            await ws.close()
            return
        scape = document.deserialize(raw)
        try:
            assets = prepared_assets_for(scape_id, scape)
            engine = build_engine(scape, assets, hrirs, model)
        except Exception as e:  # noqa: BLE001
            await ws.send_text(json.dumps({"type": "error", "code": "build_failed", "message": str(e)}))
            await ws.close()
            return

        runner = _SessionRunner(engine, realtime)

        async def receive_loop():
            while True:
                text = await ws.receive_text()
                try:
                    msg = json.loads(text)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                except ValueError as e:
                    await ws.send_text(json.dumps(
                        {"type": "error", "code": "malformed_message", "message": str(e)}
                    ))
                    continue
                engine.post(msg)

        recv_task = asyncio.create_task(receive_loop())
        start = time.monotonic()
        try:
            while True:
                if recv_task.done():
                    recv_task.result()
                seq, sample_index, frame = runner.next_frame()
                # report rejected messages (unknown source, bad paths, ...)
                while engine.rejected:
                    _msg, reason = engine.rejected.pop(0)
                    await ws.send_text(json.dumps(
                        {"type": "error", "code": "rejected_message", "message": reason}
                    ))
                recording = engine.pop_finished_recording()
                if recording is not None:
                    wav = audio.encode_wav(recording, depth="float32")
                    rec_id = storage.put_asset(
                        wav,
                        {"channels": 2, "sample_rate": recording.sample_rate,
                         "duration": recording.duration, "recording": True},
                    )
                    await ws.send_text(json.dumps(
                        {"type": "record", "value": "stopped", "url": f"/assets/{rec_id}",
                         "frames": recording.frames}
                    ))
                await ws.send_bytes(pack_frame(seq, sample_index, frame))
                if realtime:
                    deadline = start + (seq + 1) * (WIRE_FRAME / audio.ENGINE_RATE)
                    delay = deadline - time.monotonic()
                    if delay > 0:
                        await asyncio.sleep(delay)
                else:
                    await asyncio.sleep(0)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            recv_task.cancel()

    return app
