import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from streampaint.codec import image_to_bytes
from streampaint.masks import mask_to_png
from streampaint.scene import Scene, SceneBrush, scene_from_json
from streampaint.service import (
    ServiceConfig,
    StreamSession,
    create_app,
    decode_frame_message,
    default_scene,
    load_config,
)

CANVAS = 128  # latent 16x16: fast ticks


def small_scene():
    return Scene(
        height=CANVAS,
        width=CANVAS,
        seed=5,
        mode="lcm",
        steps=4,
        brushes=[
            SceneBrush(id=0, name="background", background=True,
                       target={"color": [0.9, 0.9, 0.9]}, mask={"full": True}),
        ],
    )


@pytest.fixture
def client():
    config = ServiceConfig(frame_cap=200.0)
    session = StreamSession(small_scene(), config)
    app = create_app(session)
    with TestClient(app) as test_client:
        test_client.session = session
        yield test_client
    session.stop()


def brush_doc(color=(0.1, 0.2, 0.8), with_mask=True, name="brush"):
    doc = {"name": name, "target": {"color": list(color)}}
    if with_mask:
        mask = np.zeros((CANVAS, CANVAS))
        mask[:, : CANVAS // 2] = 1.0
        doc["mask"] = {"png_b64": base64.b64encode(mask_to_png(mask)).decode("ascii")}
    return doc


class TestPaletteEndpoints:
    def test_background_is_id_zero_and_fixed(self, client):
        scene = scene_from_json(client.get("/scene").text)
        assert scene.brushes[0].id == 0 and scene.brushes[0].background
        resp = client.post("/palette", json={"background": True, "target": {"color": [1, 1, 1]}})
        assert resp.status_code == 409

    def test_register_assigns_incrementing_ids(self, client):
        first = client.post("/palette", json=brush_doc(name="a"))
        second = client.post("/palette", json=brush_doc(name="a"))  # duplicate name ok
        assert first.status_code == 200 and first.json()["id"] == 1
        assert second.status_code == 200 and second.json()["id"] == 2

    def test_missing_target_rejected(self, client):
        resp = client.post("/palette", json={"name": "x"})
        assert resp.status_code == 400
        assert "target" in resp.json()["error"]

    def test_wrong_mask_dims_rejected(self, client):
        doc = brush_doc()
        bad = np.ones((32, 32))
        doc["mask"] = {"png_b64": base64.b64encode(mask_to_png(bad)).decode("ascii")}
        resp = client.post("/palette", json=doc)
        assert resp.status_code == 400

    def test_delete_brush(self, client):
        brush_id = client.post("/palette", json=brush_doc()).json()["id"]
        assert client.delete(f"/palette/{brush_id}").status_code == 200
        assert client.delete(f"/palette/{brush_id}").status_code == 404


class TestSceneEndpoints:
    def test_scene_round_trip_through_service(self, client):
        client.post("/palette", json=brush_doc())
        text = client.get("/scene").text
        assert client.put("/scene", content=text).status_code == 200
        assert client.get("/scene").text == text

    def test_put_invalid_scene(self, client):
        resp = client.put("/scene", content='{"format": "nope"}')
        assert resp.status_code == 400

    def test_scene_reload_reproduces_identical_frames(self, client):
        import hashlib

        client.post("/palette", json=brush_doc())
        scene_text = client.get("/scene").text

        def first_frame_hash():
            with client.websocket_connect("/stream") as ws:
                send_command(ws, {"kind": "play"})
                frame = collect_frames(ws, 1)[0]
                send_command(ws, {"kind": "pause"})
                return hashlib.sha256(frame["png"]).hexdigest(), frame["tick"]

        assert client.put("/scene", content=scene_text).status_code == 200
        hash_a, _ = first_frame_hash()
        assert client.put("/scene", content=scene_text).status_code == 200
        hash_b, _ = first_frame_hash()
        assert hash_a == hash_b

    def test_background_upload(self, client):
        image = np.random.default_rng(0).random((CANVAS, CANVAS, 3))
        resp = client.post("/background", content=image_to_bytes(image))
        assert resp.status_code == 200
        scene = scene_from_json(client.get("/scene").text)
        assert "png_b64" in scene.brushes[0].target

    def test_background_wrong_dims_rescaled(self, client):
        image = np.random.default_rng(1).random((64, 256, 3))
        assert client.post("/background", content=image_to_bytes(image)).status_code == 200


def collect_frames(ws, count, max_messages=200):
    frames = []
    for _ in range(max_messages):
        message = ws.receive()
        if "bytes" in message and message["bytes"] is not None:
            frames.append(decode_frame_message(message["bytes"]))
            if len(frames) >= count:
                return frames
    raise AssertionError(f"only received {len(frames)} frames")


def send_command(ws, doc, max_messages=200):
    ws.send_text(json.dumps(doc))
    for _ in range(max_messages):
        message = ws.receive()
        if message.get("text"):
            return json.loads(message["text"])
    raise AssertionError("no command reply received")


class TestWebSocket:
    def test_play_streams_frames_with_headers(self, client):
        with client.websocket_connect("/stream") as ws:
            reply = send_command(ws, {"id": 1, "kind": "play"})
            assert reply["type"] == "ack" and reply["id"] == 1
            frames = collect_frames(ws, 3)
            assert all(f["width"] == CANVAS and f["height"] == CANVAS for f in frames)
            assert frames[0]["png"].startswith(b"\x89PNG")
            assert frames[1]["tick"] > frames[0]["tick"]

    def test_update_mask_acked_and_reflected(self, client):
        brush_id = client.post("/palette", json=brush_doc()).json()["id"]
        with client.websocket_connect("/stream") as ws:
            send_command(ws, {"kind": "play"})
            collect_frames(ws, 1)
            version_before = client.session.pipeline.palette.version
            mask = np.ones((CANVAS, CANVAS))
            reply = send_command(ws, {
                "id": 5,
                "kind": "update_mask",
                "brush_id": brush_id,
                "mask_png_b64": base64.b64encode(mask_to_png(mask)).decode("ascii"),
            })
            assert reply["type"] == "ack" and isinstance(reply["tick"], int)
            deadline = 3 * 4  # a few pipeline depths
            for frame in collect_frames(ws, deadline):
                if frame["palette_version"] > version_before:
                    break
            else:
                raise AssertionError("no frame reflected the mask edit")

    def test_malformed_messages_keep_connection(self, client):
        with client.websocket_connect("/stream") as ws:
            reply = send_command(ws, {"kind": "no_such_kind"})
            assert reply["type"] == "error"
            ws.send_text("this is not json")
            for _ in range(50):
                message = ws.receive()
                if message.get("text"):
                    assert json.loads(message["text"])["type"] == "error"
                    break
            reply = send_command(ws, {"id": 2, "kind": "play"})
            assert reply["type"] == "ack"

    def test_register_brush_over_ws(self, client):
        with client.websocket_connect("/stream") as ws:
            reply = send_command(ws, {"kind": "register_brush", "brush": brush_doc()})
            assert reply["type"] == "ack" and reply["result"] >= 1

    def test_two_subscribers_see_the_same_stream(self, client):
        with client.websocket_connect("/stream") as a, client.websocket_connect("/stream") as b:
            send_command(a, {"kind": "play"})
            frames_a = collect_frames(a, 4)
            frames_b = collect_frames(b, 4)
            ticks_a = {f["tick"] for f in frames_a}
            ticks_b = {f["tick"] for f in frames_b}
            assert ticks_a & ticks_b  # same sequence ids, drops permitted

    def test_pause_and_step(self, client):
        with client.websocket_connect("/stream") as ws:
            send_command(ws, {"kind": "play"})
            collect_frames(ws, 1)
            reply = send_command(ws, {"kind": "pause"})
            assert reply["type"] == "ack"
            reply = send_command(ws, {"kind": "step_once"})
            assert reply["type"] == "ack"


class TestConfig:
    def test_file_and_env_overrides(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"port": 9100, "steps": 4, "beta_end": 0.02}))
        cfg = load_config(str(path), env={"STREAMPAINT_PORT": "9200", "STREAMPAINT_MODE": "ddim"})
        assert cfg.port == 9200  # env wins
        assert cfg.steps == 4
        assert cfg.mode == "ddim"
        assert cfg.beta_end == 0.02

    def test_schedule_params_reach_the_engine(self):
        config = ServiceConfig(max_timestep=500, beta_start=0.001, beta_end=0.02)
        scene = small_scene()
        scene.steps = 4
        session = StreamSession(scene, config)
        try:
            assert session.schedule.max_timestep == 500
            assert session.pipeline.config.plan.steps[0] == 499
        finally:
            session.stop()

    def test_default_scene_has_background(self):
        scene = default_scene(ServiceConfig())
        assert scene.brushes[0].background
        scene.validate()
