"""Network front door: palette management, live frame streaming, persistence.

Connection handlers never touch engine state directly; they enqueue
commands onto the pipeline's queue and subscribe to the frame broadcast.
One driver thread owns the pipeline and runs ticks, publishing finished
frames to all subscribers (slow subscribers drop frames, never stall the
driver).

Wire formats:
  * frames (server -> client, binary): ``SPF1`` magic, then u32 tick,
    u32 palette version, u32 width, u32 height, u32 PNG byte count,
    then the PNG image.
  * commands (client -> server, text): JSON ``{"kind": ..., ...}`` mapping
    1:1 onto the pipeline command kinds; every message is answered with an
    ``ack`` or ``error`` JSON message carrying the same ``id``.
"""

from __future__ import annotations

import base64
import json
import os
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import anyio
import cv2
import numpy as np
from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect

from .codec import SCALE, LatentCodec, encode, image_from_bytes, image_to_bytes, luminance
from .denoiser import AnalyticDenoiser, Conditioning, Denoiser, LatencyDenoiser
from .errors import SceneError, StreamPaintError
from .masks import SemanticBrush, downsample_mask, mask_from_png, mask_to_png
from .scene import Scene, SceneBrush, scene_from_json, scene_to_engine, scene_to_json
from .stream import (
    Command,
    CommandKind,
    Frame,
    FrameBroadcaster,
    StreamPipeline,
)
from .wire import RemoteDenoiser, parse_backend_address

FRAME_MAGIC = b"SPF1"
_FRAME_HEADER = struct.Struct("<4sIIIII")


def encode_frame_message(frame: Frame) -> bytes:
    png = image_to_bytes(frame.image)
    height, width = frame.image.shape[:2]
    header = _FRAME_HEADER.pack(
        FRAME_MAGIC, frame.tick, frame.palette_version, width, height, len(png)
    )
    return header + png


def decode_frame_message(data: bytes) -> dict:
    magic, tick, version, width, height, png_len = _FRAME_HEADER.unpack_from(data, 0)
    if magic != FRAME_MAGIC:
        raise ValueError(f"bad frame magic {magic!r}")
    png = data[_FRAME_HEADER.size : _FRAME_HEADER.size + png_len]
    return {
        "tick": tick,
        "palette_version": version,
        "width": width,
        "height": height,
        "png": png,
    }


@dataclass
class ServiceConfig:
    """Startup configuration; file values can be overridden by environment
    variables (STREAMPAINT_PORT, STREAMPAINT_HOST, STREAMPAINT_BACKEND,
    STREAMPAINT_SCENE, STREAMPAINT_STEPS, STREAMPAINT_MODE,
    STREAMPAINT_SEED, STREAMPAINT_LATENCY, STREAMPAINT_FRAME_CAP)."""

    host: str = "127.0.0.1"
    port: int = 8000
    scene_path: str | None = None
    height: int = 512
    width: int = 512
    steps: int = 5
    mode: str = "lcm"
    seed: int = 0
    backend: str = "analytic"  # 'analytic' or 'external:HOST:PORT'
    denoiser_latency: float = 0.0
    frame_cap: float | None = None  # max frames per second, None = free-running
    max_timestep: int = 1000
    beta_start: float = 0.00085
    beta_end: float = 0.012


def load_config(path: str | None = None, env: dict | None = None) -> ServiceConfig:
    cfg = ServiceConfig()
    if path:
        doc = json.loads(Path(path).read_text())
        for key, value in doc.items():
            if hasattr(cfg, key):
                setattr(cfg, key, value)
    env = os.environ if env is None else env
    mapping = {
        "STREAMPAINT_HOST": ("host", str),
        "STREAMPAINT_PORT": ("port", int),
        "STREAMPAINT_SCENE": ("scene_path", str),
        "STREAMPAINT_STEPS": ("steps", int),
        "STREAMPAINT_MODE": ("mode", str),
        "STREAMPAINT_SEED": ("seed", int),
        "STREAMPAINT_BACKEND": ("backend", str),
        "STREAMPAINT_LATENCY": ("denoiser_latency", float),
        "STREAMPAINT_FRAME_CAP": ("frame_cap", float),
    }
    for var, (attr, cast) in mapping.items():
        if var in env:
            setattr(cfg, attr, cast(env[var]))
    return cfg


def default_scene(config: ServiceConfig) -> Scene:
    return Scene(
        height=config.height,
        width=config.width,
        seed=config.seed,
        mode=config.mode,
        steps=config.steps,
        brushes=[
            SceneBrush(
                id=0,
                name="background",
                background=True,
                target={"color": [1.0, 1.0, 1.0]},
                mask={"full": True},
            )
        ],
    )


def make_denoiser(config: ServiceConfig, schedule) -> Denoiser:
    if config.backend.startswith("external:"):
        host, port = parse_backend_address(config.backend.split(":", 1)[1])
        backend: Denoiser = RemoteDenoiser(host, port)
    else:
        backend = AnalyticDenoiser(schedule)
    if config.denoiser_latency > 0.0:
        backend = LatencyDenoiser(backend, config.denoiser_latency)
    return backend


class StreamSession:
    """Owns the pipeline, its driver thread, and the persistent scene."""

    def __init__(self, scene: Scene, config: ServiceConfig | None = None,
                 codec: LatentCodec | None = None):
        self.config = config or ServiceConfig()
        self.codec = codec or LatentCodec()
        self.broadcaster = FrameBroadcaster()
        self._lock = threading.RLock()  # guards scene + pipeline swap
        self._driver: threading.Thread | None = None
        self._stop = threading.Event()
        self._build(scene)

    def _build(self, scene: Scene) -> None:
        scene.validate()
        palette, gen_config, schedule = scene_to_engine(
            scene,
            max_timestep=self.config.max_timestep,
            beta_start=self.config.beta_start,
            beta_end=self.config.beta_end,
        )
        denoiser = make_denoiser(self.config, schedule)
        self.scene = scene
        self.schedule = schedule
        self.pipeline = StreamPipeline(
            palette, scene.latent_dims, gen_config, schedule, denoiser, self.codec
        )
        self.tile_shape = self.pipeline.tiles.tile_shape

    # -- driver ---------------------------------------------------------

    def start(self) -> None:
        with self._lock:
            if self._driver is not None and self._driver.is_alive():
                return
            self._stop.clear()
            self._driver = threading.Thread(target=self._drive, daemon=True)
            self._driver.start()

    def stop(self) -> None:
        self._stop.set()
        driver = self._driver
        if driver is not None:
            driver.join(timeout=5.0)
        self._driver = None

    def _drive(self) -> None:
        period = 1.0 / self.config.frame_cap if self.config.frame_cap else 0.0
        while not self._stop.is_set():
            with self._lock:
                pipeline = self.pipeline
            started = time.perf_counter()
            frame = pipeline.tick()
            if frame is not None:
                self.broadcaster.publish(frame)
                if period:
                    leftover = period - (time.perf_counter() - started)
                    if leftover > 0:
                        time.sleep(leftover)
            elif not pipeline.playing:
                time.sleep(0.002)  # idle; keep draining commands promptly

    # -- command plumbing -------------------------------------------------

    def submit(self, cmd: Command, timeout: float = 30.0):
        ack = self.pipeline.enqueue(cmd).wait(timeout)
        if not ack.done.is_set():
            raise StreamPaintError("command was not applied in time")
        return ack

    def allocate_brush_id(self) -> int:
        with self._lock:
            return max((b.id for b in self.scene.brushes), default=0) + 1

    def image_dims(self) -> tuple[int, int]:
        with self._lock:
            return self.scene.height, self.scene.width

    # -- brush / scene operations ------------------------------------------

    def brush_from_doc(self, doc: dict, brush_id: int):
        """Client brush spec -> (SemanticBrush, Conditioning, SceneBrush)."""
        if "target" not in doc:
            raise SceneError("brush spec is missing a target")
        height, width = self.image_dims()
        mask_doc = doc.get("mask", {"full": True})
        if mask_doc.get("full"):
            mask_image = np.ones((height, width))
            canonical_mask = {"full": True}
        else:
            if "png_b64" not in mask_doc:
                raise SceneError("brush mask must be PNG data or full coverage")
            mask_image = mask_from_png(base64.b64decode(mask_doc["png_b64"]))
            if mask_image.shape != (height, width):
                raise SceneError(
                    f"mask is {mask_image.shape}, canvas is ({height}, {width})"
                )
            canonical_mask = {
                "png_b64": base64.b64encode(mask_to_png(mask_image)).decode("ascii")
            }
        scene_brush = SceneBrush(
            id=brush_id,
            name=str(doc.get("name", f"brush-{brush_id}")),
            background=False,
            target=dict(doc["target"]),
            mask=canonical_mask,
            alpha=float(doc.get("alpha", 1.0)),
            blur_sigma=float(doc.get("blur_sigma", 0.0)),
            strength=float(doc.get("strength", 1.0)),
        )
        brush = SemanticBrush(
            id=brush_id,
            name=scene_brush.name,
            conditioning_ref=brush_id,
            raw_mask=downsample_mask(mask_image),
            alpha=scene_brush.alpha,
            blur_sigma=scene_brush.blur_sigma,
            strength=scene_brush.strength,
        )
        cond = self._conditioning_from_target(scene_brush.target, brush_id)
        return brush, cond, scene_brush

    def _conditioning_from_target(self, target_doc: dict, cond_id: int) -> Conditioning:
        th, tw = self.tile_shape
        if "color" in target_doc:
            color = np.asarray(target_doc["color"], dtype=np.float64)
            if color.shape != (3,) or color.min() < 0 or color.max() > 1:
                raise SceneError("target color must be 3 values in [0, 1]")
            luma = float(luminance(color))
            return Conditioning(
                id=cond_id, vector=color.copy(),
                target=np.array([color[0], color[1], color[2], luma]),
            )
        if "png_b64" not in target_doc:
            raise SceneError("target must be a color or PNG data")
        image = image_from_bytes(base64.b64decode(target_doc["png_b64"]))
        resized = cv2.resize(
            image.astype(np.float32), (tw * SCALE, th * SCALE),
            interpolation=cv2.INTER_AREA,
        ).astype(np.float64)
        return Conditioning(
            id=cond_id,
            vector=image.reshape(-1, 3).mean(axis=0),
            target=encode(resized),
        )

    def register_brush(self, doc: dict, timeout: float = 30.0) -> int:
        brush_id = self.allocate_brush_id()
        brush, cond, scene_brush = self.brush_from_doc(doc, brush_id)
        ack = self.submit(
            Command(CommandKind.REGISTER_BRUSH, {"brush": brush, "conditioning": cond}),
            timeout,
        )
        if ack.error:
            raise SceneError(ack.error)
        with self._lock:
            self.scene.brushes.append(scene_brush)
        return brush_id

    def remove_brush(self, brush_id: int, timeout: float = 30.0) -> None:
        ack = self.submit(Command(CommandKind.REMOVE_BRUSH, {"brush_id": brush_id}), timeout)
        if ack.error:
            raise SceneError(ack.error)
        with self._lock:
            self.scene.brushes = [b for b in self.scene.brushes if b.id != brush_id]

    def set_background_image(self, png_bytes: bytes, timeout: float = 30.0) -> None:
        image = image_from_bytes(png_bytes)
        height, width = self.image_dims()
        if image.shape[:2] != (height, width):
            image = cv2.resize(
                image.astype(np.float32), (width, height),
                interpolation=cv2.INTER_AREA,
            ).astype(np.float64)
        canonical = image_to_bytes(image)
        bg = self.scene.brushes[
            next(i for i, b in enumerate(self.scene.brushes) if b.background)
        ]
        cond = self._conditioning_from_target(
            {"png_b64": base64.b64encode(canonical).decode("ascii")}, bg.id
        )
        ack = self.submit(Command(CommandKind.SET_BACKGROUND, {"conditioning": cond}), timeout)
        if ack.error:
            raise SceneError(ack.error)
        with self._lock:
            bg.target = {"png_b64": base64.b64encode(canonical).decode("ascii")}

    def scene_json(self) -> str:
        with self._lock:
            return scene_to_json(self.scene)

    def load_scene(self, scene: Scene) -> None:
        """Full flush and reinit from a scene document."""
        with self._lock:
            was_playing = self.pipeline.playing
            self._build(scene)
            if was_playing:
                self.pipeline.enqueue(Command(CommandKind.PLAY))

    # -- websocket command translation ---------------------------------------

    def command_from_doc(self, doc: dict) -> Command:
        try:
            kind = CommandKind(doc["kind"])
        except (KeyError, ValueError):
            raise SceneError(f"unknown command kind {doc.get('kind')!r}") from None
        if kind in (CommandKind.PLAY, CommandKind.PAUSE, CommandKind.STEP_ONCE):
            return Command(kind)
        if kind is CommandKind.SET_SEED:
            return Command(kind, {"value": int(doc["value"])})
        if kind in (CommandKind.SET_ALPHA, CommandKind.SET_SIGMA, CommandKind.SET_STRENGTH):
            return Command(kind, {"brush_id": int(doc["brush_id"]), "value": float(doc["value"])})
        if kind is CommandKind.REMOVE_BRUSH:
            return Command(kind, {"brush_id": int(doc["brush_id"])})
        if kind is CommandKind.UPDATE_MASK:
            mask_image = mask_from_png(base64.b64decode(doc["mask_png_b64"]))
            height, width = self.image_dims()
            if mask_image.shape != (height, width):
                raise SceneError(
                    f"mask is {mask_image.shape}, canvas is ({height}, {width})"
                )
            brush_id = int(doc["brush_id"])
            with self._lock:
                for scene_brush in self.scene.brushes:
                    if scene_brush.id == brush_id and not scene_brush.background:
                        scene_brush.mask = {
                            "png_b64": base64.b64encode(mask_to_png(mask_image)).decode("ascii")
                        }
            return Command(kind, {"brush_id": brush_id, "mask": downsample_mask(mask_image)})
        if kind is CommandKind.REGISTER_BRUSH:
            brush_id = self.allocate_brush_id()
            brush, cond, scene_brush = self.brush_from_doc(doc.get("brush", {}), brush_id)
            with self._lock:
                self.scene.brushes.append(scene_brush)
            return Command(kind, {"brush": brush, "conditioning": cond})
        if kind is CommandKind.SET_BACKGROUND:
            cond = self._conditioning_from_target(
                doc.get("target", {}), self.scene.brushes[0].id
            )
            return Command(kind, {"conditioning": cond})
        raise SceneError(f"unsupported command kind {kind}")


def create_app(session: StreamSession) -> FastAPI:
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        session.stop()

    app = FastAPI(title="streampaint", lifespan=lifespan)
    session.start()
    app.state.session = session

    @app.post("/palette")
    async def register_brush(request: Request):
        doc = await request.json()
        if doc.get("background"):
            return Response(
                content=json.dumps({"error": "background brush is fixed at id 0; "
                                    "use POST /background to change its image"}),
                status_code=409, media_type="application/json",
            )
        try:
            brush_id = await anyio.to_thread.run_sync(session.register_brush, doc)
        except (SceneError, StreamPaintError, ValueError) as exc:
            return Response(
                content=json.dumps({"error": str(exc)}),
                status_code=400, media_type="application/json",
            )
        return {"id": brush_id}

    @app.delete("/palette/{brush_id}")
    async def delete_brush(brush_id: int):
        try:
            await anyio.to_thread.run_sync(session.remove_brush, brush_id)
        except SceneError as exc:
            return Response(
                content=json.dumps({"error": str(exc)}),
                status_code=404, media_type="application/json",
            )
        return {"removed": brush_id}

    @app.post("/background")
    async def set_background(request: Request):
        data = await request.body()
        try:
            await anyio.to_thread.run_sync(session.set_background_image, data)
        except Exception as exc:  # bad image data
            return Response(
                content=json.dumps({"error": str(exc)}),
                status_code=400, media_type="application/json",
            )
        return {"ok": True}

    @app.get("/scene")
    async def get_scene():
        return Response(content=session.scene_json(), media_type="application/json")

    @app.put("/scene")
    async def put_scene(request: Request):
        text = (await request.body()).decode("utf-8")
        try:
            scene = scene_from_json(text)
            await anyio.to_thread.run_sync(session.load_scene, scene)
        except SceneError as exc:
            return Response(
                content=json.dumps({"error": str(exc)}),
                status_code=400, media_type="application/json",
            )
        return {"ok": True}

    @app.websocket("/stream")
    async def stream_ws(ws: WebSocket):
        await ws.accept()
        sub = session.broadcaster.subscribe()
        send_lock = anyio.Lock()

        async def pump_frames():
            while True:
                frame = await anyio.to_thread.run_sync(sub.get, 0.1)
                if frame is not None:
                    async with send_lock:
                        await ws.send_bytes(encode_frame_message(frame))

        async def handle_commands():
            while True:
                text = await ws.receive_text()
                reply: dict
                msg_id = None
                try:
                    doc = json.loads(text)
                    msg_id = doc.get("id")
                    cmd = session.command_from_doc(doc)
                    ack = await anyio.to_thread.run_sync(session.submit, cmd)
                    if ack.error:
                        reply = {"type": "error", "id": msg_id, "message": ack.error}
                    else:
                        reply = {"type": "ack", "id": msg_id, "tick": ack.applied_tick}
                        if ack.result is not None:
                            reply["result"] = ack.result
                except WebSocketDisconnect:
                    raise
                except Exception as exc:
                    reply = {"type": "error", "id": msg_id, "message": str(exc)}
                async with send_lock:
                    await ws.send_text(json.dumps(reply))

        try:
            async with anyio.create_task_group() as tg:
                tg.start_soon(pump_frames)
                try:
                    await handle_commands()
                except WebSocketDisconnect:
                    pass
                finally:
                    tg.cancel_scope.cancel()
        finally:
            session.broadcaster.unsubscribe(sub)

    return app


def build_service(config: ServiceConfig) -> FastAPI:
    if config.scene_path:
        from .scene import load_scene

        scene = load_scene(config.scene_path)
    else:
        scene = default_scene(config)
    return create_app(StreamSession(scene, config))
