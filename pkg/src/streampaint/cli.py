"""Batch entry points: panorama rendering, region scenes with a mask-fidelity
report, the stream-batch throughput benchmark, and the network service."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .codec import LatentCodec, save_image, tiny_codec
from .denoiser import AnalyticDenoiser, Denoiser, LatencyDenoiser
from .engine import generate, make_tiles, prepare_palette
from .errors import StreamPaintError
from .rng import derive_seed
from .scene import load_scene, scene_to_engine
from .schedule import build_schedule, make_timesteps
from .stream import Command, CommandKind, StreamPipeline
from .wire import RemoteDenoiser, parse_backend_address

FIDELITY_NOTE = (
    "note: absolute mask-fidelity scores published for pretrained diffusion "
    "models are not reproducible with the analytic backend; the figures below "
    "measure this engine's mask adherence only."
)
THROUGHPUT_NOTE = (
    "note: published absolute throughput numbers are hardware-bound and not "
    "reproduced here; figures below come from the simulated-latency backend."
)


def _make_denoiser(args, schedule) -> Denoiser:
    if args.backend.startswith("external:"):
        host, port = parse_backend_address(args.backend.split(":", 1)[1])
        return RemoteDenoiser(host, port)
    return AnalyticDenoiser(schedule)


def _apply_overrides(scene, args) -> None:
    if args.seed is not None:
        scene.seed = args.seed
    if args.steps is not None:
        scene.steps = args.steps
    if args.mode is not None:
        scene.mode = args.mode
    if args.tile is not None:
        scene.tile = (args.tile, args.tile)
    if args.stride is not None:
        scene.stride = (args.stride, args.stride)
    if args.bootstrap is not None:
        scene.n_bootstrap = args.bootstrap


def _coverage_report(palette, config, schedule, dims) -> dict:
    """Tile count plus the min/max total blend weight over steps and pixels."""
    tiles = make_tiles(dims[0], dims[1], config.tile, config.stride)
    prep = prepare_palette(palette, config.plan, schedule, _NullDenoiser())
    w_min, w_max = np.inf, 0.0
    for ordinal in range(config.plan.n):
        weight = np.zeros(dims)
        for top, bottom, left, right in tiles.rects:
            for stack in prep.stacks:
                weight[top:bottom, left:right] += stack.at_position(ordinal)[
                    top:bottom, left:right
                ]
        w_min = min(w_min, float(weight.min()))
        w_max = max(w_max, float(weight.max()))
    return {"tiles": len(tiles), "min_weight": w_min, "max_weight": w_max}


class _NullDenoiser(Denoiser):
    """Registration sink for preprocessing-only runs."""

    def register(self, cond) -> None:
        pass

    def predict_noise(self, req):  # pragma: no cover - never called
        raise NotImplementedError


def cmd_panorama(args) -> int:
    scene = load_scene(args.scene)
    _apply_overrides(scene, args)
    if args.width is not None:
        scene.width = args.width
    if args.height is not None:
        scene.height = args.height
    scene.validate()
    palette, config, schedule = scene_to_engine(scene)
    denoiser = _make_denoiser(args, schedule)
    dims = scene.latent_dims
    started = time.perf_counter()
    image = generate(palette, dims, config, schedule, denoiser)
    elapsed = time.perf_counter() - started
    save_image(args.out, image)
    report = _coverage_report(palette, config, schedule, dims)
    report.update(
        canvas=[scene.height, scene.width],
        latent=[dims[0], dims[1]],
        seed=scene.seed,
        out=str(args.out),
    )
    print(json.dumps(report, sort_keys=True))
    print(f"rendered {scene.width}x{scene.height} in {elapsed:.2f}s", file=sys.stderr)
    return 0


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def cmd_regions(args) -> int:
    from .masks import mask_from_png
    import base64

    scene = load_scene(args.scene)
    _apply_overrides(scene, args)
    palette, config, schedule = scene_to_engine(scene)
    fg_brushes = [b for b in scene.brushes if not b.background]
    if len(scene.brushes) < 2:
        print("regions needs at least two brushes (background + foreground)", file=sys.stderr)
        return 2
    denoiser = _make_denoiser(args, schedule)
    image = generate(palette, scene.latent_dims, config, schedule, denoiser)
    save_image(args.out, image)

    # Classify pixels by nearest brush target color (ties: lowest brush id).
    ordered = sorted(scene.brushes, key=lambda b: b.id)
    colors = []
    for brush in ordered:
        if "color" in brush.target:
            colors.append(np.asarray(brush.target["color"], dtype=np.float64))
        else:
            data = base64.b64decode(brush.target["png_b64"])
            from .codec import image_from_bytes

            colors.append(image_from_bytes(data).reshape(-1, 3).mean(axis=0))
    color_arr = np.stack(colors)  # (p, 3)
    dists = ((image[:, :, None, :] - color_arr[None, None, :, :]) ** 2).sum(axis=3)
    labels = np.argmin(dists, axis=2)

    print(FIDELITY_NOTE)
    report = {"out": str(args.out), "seed": scene.seed, "iou": {}}
    for pos, brush in enumerate(ordered):
        if brush.background:
            continue
        if brush.mask.get("full"):
            ref = np.ones((scene.height, scene.width), dtype=bool)
        else:
            ref = mask_from_png(base64.b64decode(brush.mask["png_b64"])) > 0.5
        predicted = labels == pos
        report["iou"][brush.name] = round(_iou(predicted, ref), 6)
    print(json.dumps(report, sort_keys=True))
    return 0


BENCH_LATENT = (32, 32)  # small canvas: the scheduling structure under test
# is canvas-independent, and a small canvas keeps per-tick math well under
# the simulated model latency.


def _build_bench_palette(seed):
    from .scene import Scene, SceneBrush, scene_to_engine as to_engine
    import base64
    from .masks import mask_to_png

    side = BENCH_LATENT[0] * 8
    mask = np.zeros((side, side))
    mask[:, : side // 2] = 1.0
    scene = Scene(
        height=side,
        width=side,
        seed=seed,
        mode="lcm",
        steps=5,
        brushes=[
            SceneBrush(id=0, name="background", background=True,
                       target={"color": [0.9, 0.9, 0.9]}, mask={"full": True}),
            SceneBrush(id=1, name="left", background=False,
                       target={"color": [0.1, 0.3, 0.8]},
                       mask={"png_b64": base64.b64encode(mask_to_png(mask)).decode("ascii")}),
        ],
    )
    return to_engine(scene), scene


def _steady_fps(periods: list[float]) -> float:
    """Steady-state rate from the median frame period (robust to host noise)."""
    ordered = sorted(periods)
    mid = len(ordered) // 2
    median = ordered[mid] if len(ordered) % 2 else 0.5 * (ordered[mid - 1] + ordered[mid])
    return 1.0 / median


def _measure_sequential(palette, config, schedule, latency, codec, frames) -> float:
    denoiser = LatencyDenoiser(AnalyticDenoiser(schedule), latency)
    periods = []
    for f in range(frames):
        started = time.perf_counter()
        generate(palette, BENCH_LATENT, config, schedule, denoiser, codec,
                 seed=derive_seed(config.seed, f))
        periods.append(time.perf_counter() - started)
    return _steady_fps(periods)


def _measure_stream(palette, config, schedule, latency, codec, frames) -> float:
    denoiser = LatencyDenoiser(AnalyticDenoiser(schedule), latency)
    pipeline = StreamPipeline(palette, BENCH_LATENT, config, schedule, denoiser, codec)
    pipeline.enqueue(Command(CommandKind.PLAY))
    n = config.plan.n
    for _ in range(n):  # warm the pipeline
        pipeline.tick()
    periods = []
    last = time.perf_counter()
    while len(periods) < frames:
        if pipeline.tick() is not None:
            now = time.perf_counter()
            periods.append(now - last)
            last = now
    return _steady_fps(periods)


def cmd_bench(args) -> int:
    (palette, config, schedule), _ = _build_bench_palette(args.seed or 0)
    latency = args.latency
    standard = LatentCodec(latency=args.codec_latency)
    tiny = tiny_codec(latency=args.tiny_codec_latency)

    sequential_fps = _measure_sequential(
        palette, config, schedule, latency, standard, args.frames_sequential
    )
    stream_fps = _measure_stream(
        palette, config, schedule, latency, standard, args.frames
    )
    tiny_fps = _measure_stream(palette, config, schedule, latency, tiny, args.frames)

    rows = [
        ("sequential", sequential_fps, 1.0),
        ("+ stream batch", stream_fps, stream_fps / sequential_fps),
        ("+ tiny codec", tiny_fps, tiny_fps / sequential_fps),
    ]
    print(THROUGHPUT_NOTE)
    print("FPS = steady-state rate from the median frame period.")
    print(f"{'method':<16} {'FPS':>8} {'speedup':>9}")
    for name, fps, speedup in rows:
        print(f"{name:<16} {fps:>8.2f} {'x' + format(speedup, '.1f'):>9}")
    if args.json:
        doc = {
            "latency": latency,
            "rows": [
                {"method": name, "fps": fps, "speedup": speedup}
                for name, fps, speedup in rows
            ],
        }
        Path(args.json).write_text(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_service, load_config

    config = load_config(args.config)
    if args.port is not None:
        config.port = args.port
    if args.scene is not None:
        config.scene_path = args.scene
    if args.backend != "analytic":
        config.backend = args.backend
    app = build_service(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streampaint",
        description="Region-based image generation: panoramas, masked scenes, "
        "a stream-batch benchmark, and a live drawing service.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scene", required=True, help="scene JSON file")
        p.add_argument("--out", required=True, help="output PNG path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--mode", choices=["ddim", "lcm"], default=None)
        p.add_argument("--tile", type=int, default=None, help="tile size, latent units")
        p.add_argument("--stride", type=int, default=None, help="tile stride, latent units")
        p.add_argument("--bootstrap", type=int, default=None, help="bootstrap step count")
        p.add_argument(
            "--backend", default="analytic",
            help="analytic or external:HOST:PORT",
        )

    pano = sub.add_parser("panorama", help="render a wide canvas with tiling")
    common(pano)
    pano.add_argument("--width", type=int, default=None, help="canvas width override, pixels")
    pano.add_argument("--height", type=int, default=None, help="canvas height override, pixels")
    pano.set_defaults(func=cmd_panorama)

    regions = sub.add_parser("regions", help="render a masked scene and report IoU")
    common(regions)
    regions.set_defaults(func=cmd_regions)

    bench = sub.add_parser("bench", help="throughput comparison table")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--latency", type=float, default=0.05,
                       help="simulated denoiser latency per call, seconds")
    bench.add_argument("--codec-latency", type=float, default=0.004)
    bench.add_argument("--tiny-codec-latency", type=float, default=0.001)
    bench.add_argument("--frames", type=int, default=25, help="streamed frames to time")
    bench.add_argument("--frames-sequential", type=int, default=3)
    bench.add_argument("--json", default=None, help="also write results to this JSON file")
    bench.set_defaults(func=cmd_bench)

    serve = sub.add_parser("serve", help="run the HTTP/WebSocket service")
    serve.add_argument("--config", default=None, help="service config JSON file")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--scene", default=None)
    serve.add_argument("--backend", default="analytic")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StreamPaintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
