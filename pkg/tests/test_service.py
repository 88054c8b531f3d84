import json
import struct

import numpy as np
import pytest
from fastapi.testclient import TestClient

from soundscape.audio import decode_wav
from soundscape.binaural import synthetic_head_hrirs
from soundscape.document import serialize, to_document, canonical_dumps
from soundscape.service import STREAM_MAGIC, WIRE_FRAME, create_app, pack_frame, unpack_frame

from conftest import make_wav, simple_scape, simple_source, tone_wav

HRIRS = synthetic_head_hrirs(azimuth_step_deg=30, elevations_deg=(0.0,), length=32)


@pytest.fixture
def client(tmp_path):
    app = create_app(data_dir=str(tmp_path / "store"), realtime=False, hrirs=HRIRS)
    with TestClient(app) as c:
        yield c


def put_demo_scape(client, sources=None):
    scape = simple_scape(sources if sources is not None else [simple_source("hum", 1.0, 1.0, loop=True)])
    resp = client.put("/soundscapes", content=serialize(scape))
    assert resp.status_code == 200, resp.text
    return resp.json()["id"]


# --- frame codec ---


def test_frame_codec_roundtrip():
    samples = np.linspace(-1, 1, WIRE_FRAME * 2).reshape(2, WIRE_FRAME)
    data = pack_frame(7, 6720, samples)
    magic, seq, idx, count = struct.unpack_from("<IIQH", data)
    assert (magic, seq, idx, count) == (STREAM_MAGIC, 7, 6720, WIRE_FRAME)
    assert len(data) == 18 + WIRE_FRAME * 2 * 4
    seq2, idx2, back = unpack_frame(data)
    assert (seq2, idx2) == (7, 6720)
    np.testing.assert_allclose(back, samples, atol=1e-7)


# --- assets ---


def test_put_asset_returns_metadata(client):
    resp = client.put("/assets", content=tone_wav(seconds=1.0, sample_rate=8000))
    assert resp.status_code == 200
    body = resp.json()
    assert body["duration"] == pytest.approx(1.0)
    assert body["channels"] == 1
    assert body["sample_rate"] == 8000
    fetched = client.get(f"/assets/{body['id']}")
    assert fetched.status_code == 200
    assert decode_wav(fetched.content).frames == 8000


def test_put_asset_rejects_non_wav(client):
    resp = client.put("/assets", content=b"ID3\x04mp3 payload")
    assert resp.status_code == 400
    assert resp.json()["code"] == "unsupported_codec"


def test_get_unknown_asset_404(client):
    resp = client.get("/assets/deadbeef00000000")
    assert resp.status_code == 404
    assert resp.json()["code"] == "not_found"


# --- soundscapes ---


def test_put_soundscape_and_fetch(client):
    scape_id = put_demo_scape(client)
    resp = client.get(f"/soundscapes/{scape_id}")
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["title"] == "test scape"


def test_put_soundscape_with_cycle_422(client):
    from soundscape.model import TimingConstraint

    scape = simple_scape(
        [
            simple_source("a", timings=[TimingConstraint("b", "after_completes")]),
            simple_source("b", timings=[TimingConstraint("a", "after_completes")]),
        ]
    )
    resp = client.put("/soundscapes", content=canonical_dumps(to_document(scape)))
    assert resp.status_code == 422
    report = resp.json()["report"]
    assert any("timing cycle" in item["message"] for item in report)


def test_get_soundscape_embed_resolves_store_assets(client):
    wav = tone_wav(seconds=0.25)
    asset_id = client.put("/assets", content=wav).json()["id"]
    src = simple_source("remote")
    src.asset.embedded = None
    src.asset.uri = f"/assets/{asset_id}"
    scape_id = put_demo_scape(client, [src])
    doc = client.get(f"/soundscapes/{scape_id}", params={"embed": "true"}).json()
    asset = doc["sources"][0]["asset"]
    assert "uri" not in asset
    assert asset["duration"] == pytest.approx(0.25)
    plain = client.get(f"/soundscapes/{scape_id}", params={"embed": "false"}).json()
    assert plain["sources"][0]["asset"]["uri"] == f"/assets/{asset_id}"


def test_soundscape_ids_are_stable_through_the_wire(client):
    """Canonical serialization makes a fetched document re-upload to the
    same content-addressed id."""
    scape_id = put_demo_scape(client)
    doc = client.get(f"/soundscapes/{scape_id}").content
    again = client.put("/soundscapes", content=doc)
    assert again.status_code == 200
    assert again.json()["id"] == scape_id


# --- render ---


def test_render_endpoint_returns_wav(client):
    scape_id = put_demo_scape(client)
    body = {
        "soundscape": scape_id,
        "trajectory": {"duration": 0.25, "waypoints": [{"t": 0, "x": 0, "y": 0, "yaw": 0}]},
    }
    resp = client.post("/render", json=body)
    assert resp.status_code == 200
    buf = decode_wav(resp.content)
    assert buf.channels == 2
    assert buf.frames >= 0.25 * 48000


def test_render_too_long_413(client):
    scape_id = put_demo_scape(client)
    body = {
        "soundscape": scape_id,
        "trajectory": {"duration": 601.0, "waypoints": [{"t": 0, "x": 0, "y": 0, "yaw": 0}]},
    }
    resp = client.post("/render", json=body)
    assert resp.status_code == 413
    assert resp.json()["code"] == "render_too_long"


# --- live sessions ---


def recv_binary(ws):
    while True:
        msg = ws.receive()
        if "bytes" in msg and msg["bytes"] is not None:
            return unpack_frame(msg["bytes"])
        if "text" in msg and msg["text"] is not None:
            continue
        raise AssertionError(f"unexpected ws message: {msg}")


def recv_text(ws, expect_type):
    while True:
        msg = ws.receive()
        if "text" in msg and msg["text"] is not None:
            body = json.loads(msg["text"])
            if body.get("type") == expect_type:
                return body


def test_session_streams_with_default_pose(client):
    scape_id = put_demo_scape(client)
    with client.websocket_connect(f"/session/{scape_id}") as ws:
        seq, idx, frame = recv_binary(ws)
        assert (seq, idx) == (0, 0)
        assert frame.shape == (2, WIRE_FRAME)
        ws.send_text(json.dumps({"type": "transport", "value": "play"}))
        heard = False
        for _ in range(30):
            _, _, frame = recv_binary(ws)
            if np.any(frame != 0.0):
                heard = True
                break
        assert heard


def test_session_indices_gapless(client):
    scape_id = put_demo_scape(client)
    with client.websocket_connect(f"/session/{scape_id}") as ws:
        ws.send_text(json.dumps({"type": "transport", "value": "play"}))
        prev_seq, prev_idx, _ = recv_binary(ws)
        for _ in range(49):
            seq, idx, _ = recv_binary(ws)
            assert seq == prev_seq + 1
            assert idx == prev_idx + WIRE_FRAME
            prev_seq, prev_idx = seq, idx
        assert prev_idx == 49 * WIRE_FRAME  # 1 s of audio: final index 47040


def test_session_malformed_and_unknown_source_errors(client):
    scape_id = put_demo_scape(client)
    with client.websocket_connect(f"/session/{scape_id}") as ws:
        ws.send_text("{not json")
        err = recv_text(ws, "error")
        assert err["code"] == "malformed_message"
        ws.send_text(json.dumps({"type": "set", "source": "ghost", "path": "gain_db", "value": 0}))
        err = recv_text(ws, "error")
        assert err["code"] == "rejected_message"
        # connection still alive
        seq, idx, _ = recv_binary(ws)
        assert idx >= 0


def test_session_record_returns_url(client):
    scape_id = put_demo_scape(client)
    with client.websocket_connect(f"/session/{scape_id}") as ws:
        ws.send_text(json.dumps({"type": "transport", "value": "play"}))
        ws.send_text(json.dumps({"type": "record", "value": "start"}))
        for _ in range(5):
            recv_binary(ws)
        ws.send_text(json.dumps({"type": "record", "value": "stop"}))
        done = recv_text(ws, "record")
        assert done["value"] == "stopped"
        assert done["url"].startswith("/assets/")
    wav = client.get(done["url"])
    assert wav.status_code == 200
    rec = decode_wav(wav.content)
    assert rec.channels == 2
    assert rec.frames == done["frames"]


def test_sessions_are_isolated(client):
    scape_id = put_demo_scape(client)
    with client.websocket_connect(f"/session/{scape_id}") as ws1:
        with client.websocket_connect(f"/session/{scape_id}") as ws2:
            ws1.send_text(json.dumps({"type": "transport", "value": "play"}))
            loud = False
            for _ in range(20):
                _, _, f1 = recv_binary(ws1)
                if np.any(f1 != 0):
                    loud = True
                    break
            assert loud
            # second session was never played: still silent, own sequence
            seq, idx, f2 = recv_binary(ws2)
            assert seq == 0
            assert np.array_equal(f2, np.zeros_like(f2))


def test_session_unknown_soundscape(client):
    with client.websocket_connect("/session/ffffffffffffffff") as ws:
        msg = ws.receive()
        body = json.loads(msg["text"])
        assert body["code"] == "not_found"
