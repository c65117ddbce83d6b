"""Pipelined stream scheduler: n in-flight canvases, one frame per tick.

Instead of stepping one canvas n times and then starting the next, the
pipeline keeps up to n canvases in flight at staggered steps and advances
all of them with a single batched denoiser call per tick.  Once warm, every
tick finishes exactly one canvas, so the frame period collapses from
n denoiser calls to one.

Commands arrive through a queue and are applied between ticks.  Fast
commands (mask and knob edits, playback control) take effect on the next
canvas admitted; canvases already in flight keep the palette snapshot they
were born with.  Slow commands (new brush, new background) flush the whole
ring and re-run preprocessing, so the next frame appears n ticks later.
"""

from __future__ import annotations

import enum
import queue
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng
from .codec import CHANNELS, LatentCodec
from .denoiser import Conditioning, Denoiser
from .engine import (
    GenerationConfig,
    Palette,
    PreparedPalette,
    TileSet,
    apply_step_responses,
    build_step_requests,
    make_tiles,
    prepare_palette,
)
from .denoiser import DenoiseRequest
from .errors import BackendError, CommandError
from .masks import SemanticBrush
from .sampler import StepContext, inject_noise
from .schedule import NoiseSchedule


class CommandKind(str, enum.Enum):
    UPDATE_MASK = "update_mask"
    SET_ALPHA = "set_alpha"
    SET_SIGMA = "set_sigma"
    SET_STRENGTH = "set_strength"
    SET_SEED = "set_seed"
    PLAY = "play"
    PAUSE = "pause"
    STEP_ONCE = "step_once"
    REGISTER_BRUSH = "register_brush"
    REMOVE_BRUSH = "remove_brush"
    SET_BACKGROUND = "set_background"


SLOW_KINDS = frozenset({CommandKind.REGISTER_BRUSH, CommandKind.SET_BACKGROUND})


@dataclass
class Command:
    kind: CommandKind
    payload: dict = field(default_factory=dict)

    @property
    def is_slow(self) -> bool:
        return self.kind in SLOW_KINDS


@dataclass
class CommandAck:
    """Set by the pipeline when the command has been applied."""

    done: threading.Event = field(default_factory=threading.Event)
    applied_tick: int = -1
    error: str | None = None
    result: object = None

    def wait(self, timeout: float | None = None) -> "CommandAck":
        self.done.wait(timeout)
        return self


@dataclass(eq=False)
class Frame:
    image: np.ndarray
    tick: int
    frame_index: int
    palette_version: int
    seed: int


@dataclass(eq=False)
class _Slot:
    latent: np.ndarray
    ordinal: int  # next step position to run, 0-based
    frame_index: int
    seed: int
    prep: PreparedPalette
    palette_version: int


class StreamPipeline:
    """Owns the slot ring, the palette, and the command queue.

    Single-owner: exactly one thread may call :meth:`tick`; any thread may
    :meth:`enqueue`.  Frames are returned from ``tick`` and also fanned out
    to registered frame callbacks.
    """

    def __init__(
        self,
        palette: Palette,
        dims: tuple[int, int],
        config: GenerationConfig,
        schedule: NoiseSchedule,
        denoiser: Denoiser,
        codec: LatentCodec | None = None,
    ):
        self.palette = palette
        self.dims = dims
        self.config = config
        self.schedule = schedule
        self.denoiser = denoiser
        self.codec = codec or LatentCodec()
        self.tiles: TileSet = make_tiles(dims[0], dims[1], config.tile, config.stride)
        self.base_seed = config.seed
        self.playing = False
        self.tick_count = 0
        self.next_frame_index = 0
        self.slots: list[_Slot] = []
        self._pending_steps = 0
        self._commands: queue.Queue[tuple[Command, CommandAck]] = queue.Queue()
        self._prep: PreparedPalette | None = None
        self.on_error: list[Callable[[str], None]] = []
        self.flush()

    # -- commands -----------------------------------------------------------

    def enqueue(self, cmd: Command) -> CommandAck:
        ack = CommandAck()
        self._commands.put((cmd, ack))
        return ack

    def _apply_pending(self) -> None:
        while True:
            try:
                cmd, ack = self._commands.get_nowait()
            except queue.Empty:
                return
            try:
                ack.result = self._apply(cmd)
                ack.applied_tick = self.tick_count
            except CommandError as exc:
                ack.error = str(exc)
            except Exception as exc:  # malformed payloads must not kill the stream
                ack.error = f"{type(exc).__name__}: {exc}"
            finally:
                ack.done.set()

    def _brush(self, brush_id: int) -> SemanticBrush:
        for brush in self.palette.brushes:
            if brush.id == brush_id:
                return brush
        raise CommandError(f"no brush with id {brush_id}")

    def _apply(self, cmd: Command):
        kind, payload = cmd.kind, cmd.payload
        if kind is CommandKind.PLAY:
            self.playing = True
        elif kind is CommandKind.PAUSE:
            self.playing = False
        elif kind is CommandKind.STEP_ONCE:
            self._pending_steps += 1
        elif kind is CommandKind.SET_SEED:
            self.base_seed = int(payload["value"])
        elif kind is CommandKind.UPDATE_MASK:
            brush = self._brush(int(payload["brush_id"]))
            if brush.is_background:
                raise CommandError("background mask is fixed")
            mask = np.asarray(payload["mask"], dtype=np.float64)
            if mask.shape != self.dims:
                raise CommandError(
                    f"mask shape {mask.shape} does not match canvas {self.dims}"
                )
            brush.raw_mask = np.clip(mask, 0.0, 1.0)
            self._bump_and_rebuild()
        elif kind is CommandKind.SET_ALPHA:
            brush = self._brush(int(payload["brush_id"]))
            value = float(payload["value"])
            if not (0.0 <= value <= 1.0):
                raise CommandError(f"alpha must be in [0, 1], got {value}")
            brush.alpha = value
            self._bump_and_rebuild()
        elif kind is CommandKind.SET_SIGMA:
            brush = self._brush(int(payload["brush_id"]))
            value = float(payload["value"])
            if value < 0.0:
                raise CommandError(f"blur sigma must be >= 0, got {value}")
            brush.blur_sigma = value
            self._bump_and_rebuild()
        elif kind is CommandKind.SET_STRENGTH:
            brush = self._brush(int(payload["brush_id"]))
            value = float(payload["value"])
            if not (0.0 <= value <= 1.0):
                raise CommandError(f"strength must be in [0, 1], got {value}")
            brush.strength = value
            self._bump_and_rebuild()
        elif kind is CommandKind.REMOVE_BRUSH:
            brush = self._brush(int(payload["brush_id"]))
            if brush.is_background:
                raise CommandError("cannot remove the background brush")
            self.palette.brushes.remove(brush)
            self._bump_and_rebuild()
        elif kind is CommandKind.REGISTER_BRUSH:
            brush: SemanticBrush = payload["brush"]
            cond: Conditioning = payload["conditioning"]
            if brush.is_background:
                raise CommandError("background brush is fixed; set its target instead")
            if any(b.id == brush.id for b in self.palette.brushes):
                raise CommandError(f"brush id {brush.id} already registered")
            if brush.raw_mask.shape != self.dims:
                raise CommandError(
                    f"mask shape {brush.raw_mask.shape} does not match canvas {self.dims}"
                )
            self.palette.conditionings[cond.id] = cond
            self.palette.brushes.append(brush)
            self.palette.version += 1
            self.flush()
            return brush.id
        elif kind is CommandKind.SET_BACKGROUND:
            cond: Conditioning = payload["conditioning"]
            bg = self.palette.background()
            self.palette.conditionings[bg.conditioning_ref] = cond
            self.palette.version += 1
            self.flush()
        else:  # pragma: no cover - enum is exhaustive
            raise CommandError(f"unknown command kind {kind}")
        return None

    def _bump_and_rebuild(self) -> None:
        self.palette.version += 1
        self._rebuild_prep()

    def _rebuild_prep(self) -> None:
        self._prep = prepare_palette(
            self.palette, self.config.plan, self.schedule, self.denoiser
        )

    # -- pipeline -----------------------------------------------------------

    def flush(self) -> None:
        """Drop all in-flight canvases and re-run palette preprocessing."""
        self.slots.clear()
        self._rebuild_prep()

    def _admit_slot(self) -> None:
        frame_index = self.next_frame_index
        self.next_frame_index += 1
        seed = rng.derive_seed(self.base_seed, frame_index)
        self.slots.append(
            _Slot(
                latent=rng.normal(self.dims + (CHANNELS,), seed, rng.INIT),
                ordinal=0,
                frame_index=frame_index,
                seed=seed,
                prep=self._prep,
                palette_version=self.palette.version,
            )
        )

    def tick(self) -> Frame | None:
        """Apply pending commands, then advance the pipeline by one step.

        Returns the finished frame if a canvas completed this tick.  While
        paused (and with no single-steps pending) this is a no-op.
        """
        self._apply_pending()
        if not self.playing:
            if self._pending_steps <= 0:
                return None
            self._pending_steps -= 1

        n = self.config.plan.n
        admitted = None
        if len(self.slots) < n:
            self._admit_slot()
            admitted = self.slots[-1]

        contexts = []
        requests = []
        elements_per_slot = []
        for slot in self.slots:
            ctx = StepContext(
                plan=self.config.plan,
                schedule=self.schedule,
                step_index=n - slot.ordinal,
                rng_seed=slot.seed,
            )
            req, elements = build_step_requests(
                slot.latent, ctx, slot.prep, self.tiles, self.config
            )
            contexts.append(ctx)
            requests.append(req)
            elements_per_slot.append(elements)

        merged = DenoiseRequest(
            tiles=np.concatenate([r.tiles for r in requests]),
            timesteps=np.concatenate([r.timesteps for r in requests]),
            conditioning_ids=np.concatenate([r.conditioning_ids for r in requests]),
        )
        try:
            eps = self.denoiser.predict_noise(merged)
        except BackendError as exc:
            # Frame skipped: undo this tick's admission so the failed tick
            # leaves no trace (the keyed init noise redraws identically).
            if admitted is not None:
                self.slots.remove(admitted)
                self.next_frame_index = admitted.frame_index
            for callback in self.on_error:
                callback(str(exc))
            self.tick_count += 1
            return None

        frame: Frame | None = None
        offset = 0
        finished = None
        for slot, ctx, req, elements in zip(
            self.slots, contexts, requests, elements_per_slot
        ):
            count = req.batch_size
            slot.latent = apply_step_responses(
                req, eps[offset : offset + count], elements, ctx, self.tiles, self.dims
            )
            slot.latent = inject_noise(slot.latent, ctx)
            slot.ordinal += 1
            offset += count
            if slot.ordinal == n:
                finished = slot

        if finished is not None:
            self.slots.remove(finished)
            frame = Frame(
                image=self.codec.decode(finished.latent),
                tick=self.tick_count,
                frame_index=finished.frame_index,
                palette_version=finished.palette_version,
                seed=finished.seed,
            )
        self.tick_count += 1
        return frame


class FrameSubscription:
    """Droppable frame buffer: slow consumers miss frames, never stall ticks."""

    def __init__(self, capacity: int = 2):
        self._queue: queue.Queue[Frame] = queue.Queue(maxsize=capacity)

    def push(self, frame: Frame) -> None:
        while True:
            try:
                self._queue.put_nowait(frame)
                return
            except queue.Full:
                try:
                    self._queue.get_nowait()  # drop the oldest
                except queue.Empty:
                    pass

    def get(self, timeout: float | None = None) -> Frame | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None


class FrameBroadcaster:
    """Fan-out of frames to any number of droppable subscribers."""

    def __init__(self):
        self._subscribers: list[FrameSubscription] = []
        self._lock = threading.Lock()

    def subscribe(self, capacity: int = 2) -> FrameSubscription:
        sub = FrameSubscription(capacity)
        with self._lock:
            self._subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: FrameSubscription) -> None:
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)

    def publish(self, frame: Frame) -> None:
        with self._lock:
            subs = list(self._subscribers)
        for sub in subs:
            sub.push(frame)
