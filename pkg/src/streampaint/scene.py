"""Scene files: one format for CLI input and service persistence.

A scene is a canonical JSON document describing the canvas, the sampler
setup, and every brush (mask, target, knobs).  Canonical means: sorted
keys, fixed indentation, masks and image targets embedded as base64 PNG.
Saving what was just loaded reproduces the file byte for byte.

Masks and targets may also reference PNG files by path (convenient for
hand-written scenes); they are inlined on the next save.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .codec import SCALE, encode, image_from_bytes, image_to_bytes, luminance
from .denoiser import Conditioning
from .engine import GenerationConfig, Palette, make_tiles
from .errors import SceneError
from .masks import SemanticBrush, downsample_mask, mask_from_png, mask_to_png
from .schedule import NoiseSchedule, build_schedule, make_timesteps

FORMAT_NAME = "streampaint-scene"
FORMAT_VERSION = 1

@dataclass
class SceneBrush:
    id: int
    name: str
    background: bool
    target: dict  # {"color": [r,g,b]} or {"png_b64": ...} or {"path": ...}
    mask: dict  # {"full": true} or {"png_b64": ...} or {"path": ...}
    alpha: float = 1.0
    blur_sigma: float = 0.0
    strength: float = 1.0


@dataclass
class Scene:
    height: int  # image pixels, divisible by 8
    width: int
    seed: int = 0
    mode: str = "lcm"
    steps: int = 5
    tile: tuple[int, int] = (64, 64)  # latent units
    stride: tuple[int, int] = (32, 32)
    n_bootstrap: int = 1
    brushes: list[SceneBrush] = field(default_factory=list)

    @property
    def latent_dims(self) -> tuple[int, int]:
        return self.height // SCALE, self.width // SCALE

    def validate(self) -> None:
        if self.height % SCALE or self.width % SCALE:
            raise SceneError(f"canvas {self.height}x{self.width} not divisible by {SCALE}")
        if self.height < SCALE or self.width < SCALE:
            raise SceneError("canvas too small")
        backgrounds = [b for b in self.brushes if b.background]
        if len(backgrounds) != 1:
            raise SceneError(
                f"scene needs exactly one background brush, found {len(backgrounds)}"
            )
        ids = [b.id for b in self.brushes]
        if len(set(ids)) != len(ids):
            raise SceneError("brush ids must be unique")
        for brush in self.brushes:
            if "color" not in brush.target and "png_b64" not in brush.target \
                    and "path" not in brush.target:
                raise SceneError(f"brush {brush.id} is missing a target")


def _mask_array(brush: SceneBrush, scene: Scene, base_dir: Path | None) -> np.ndarray:
    """Image-resolution float mask for a brush."""
    if brush.background or brush.mask.get("full"):
        return np.ones((scene.height, scene.width))
    if "png_b64" in brush.mask:
        mask = mask_from_png(base64.b64decode(brush.mask["png_b64"]))
    elif "path" in brush.mask:
        path = Path(brush.mask["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        mask = mask_from_png(path.read_bytes())
    else:
        raise SceneError(f"brush {brush.id} has neither a mask image nor full coverage")
    if mask.shape != (scene.height, scene.width):
        raise SceneError(
            f"brush {brush.id} mask is {mask.shape}, canvas is "
            f"({scene.height}, {scene.width})"
        )
    return mask


def _target_conditioning(
    brush: SceneBrush, tile_shape: tuple[int, int], base_dir: Path | None
) -> Conditioning:
    """Conditioning whose target matches the engine's denoiser tile size."""
    if "color" in brush.target:
        color = np.asarray(brush.target["color"], dtype=np.float64)
        if color.shape != (3,) or color.min() < 0.0 or color.max() > 1.0:
            raise SceneError(f"brush {brush.id} target color must be 3 values in [0,1]")
        target = np.array([color[0], color[1], color[2], float(luminance(color))])
        return Conditioning(id=brush.id, vector=color.copy(), target=target)
    if "png_b64" in brush.target:
        image = image_from_bytes(base64.b64decode(brush.target["png_b64"]))
    else:
        path = Path(brush.target["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        image = image_from_bytes(path.read_bytes())
    th, tw = tile_shape
    resized = cv2.resize(
        image.astype(np.float32), (tw * SCALE, th * SCALE), interpolation=cv2.INTER_AREA
    ).astype(np.float64)
    latent = encode(resized)
    vector = image.reshape(-1, 3).mean(axis=0)
    return Conditioning(id=brush.id, vector=vector, target=latent)


def scene_to_engine(
    scene: Scene,
    base_dir: Path | None = None,
    *,
    max_timestep: int = 1000,
    beta_start: float = 0.00085,
    beta_end: float = 0.012,
) -> tuple[Palette, GenerationConfig, NoiseSchedule]:
    """Materialize a scene into engine inputs."""
    scene.validate()
    schedule = build_schedule(max_timestep, beta_start, beta_end, mode=scene.mode)
    plan = make_timesteps(schedule, scene.steps)
    latent_h, latent_w = scene.latent_dims
    tile_shape = make_tiles(latent_h, latent_w, scene.tile, scene.stride).tile_shape

    brushes: list[SemanticBrush] = []
    conditionings: dict[int, Conditioning] = {}
    for sb in scene.brushes:
        mask = downsample_mask(_mask_array(sb, scene, base_dir))
        brushes.append(
            SemanticBrush(
                id=sb.id,
                name=sb.name,
                conditioning_ref=sb.id,
                raw_mask=np.ones((latent_h, latent_w)) if sb.background else mask,
                alpha=sb.alpha,
                blur_sigma=sb.blur_sigma,
                strength=sb.strength,
                is_background=sb.background,
            )
        )
        conditionings[sb.id] = _target_conditioning(sb, tile_shape, base_dir)

    palette = Palette(brushes=brushes, conditionings=conditionings)
    config = GenerationConfig(
        plan=plan,
        seed=scene.seed,
        tile=scene.tile,
        stride=scene.stride,
        n_bootstrap=scene.n_bootstrap,
    )
    return palette, config, schedule


def _canonical_brush(brush: SceneBrush, scene: Scene, base_dir: Path | None) -> dict:
    if brush.background or brush.mask.get("full"):
        mask_doc = {"full": True}
    else:
        mask_doc = {
            "png_b64": base64.b64encode(
                mask_to_png(_mask_array(brush, scene, base_dir))
            ).decode("ascii")
        }
    if "color" in brush.target:
        target_doc = {"color": [float(c) for c in brush.target["color"]]}
    else:
        if "png_b64" in brush.target:
            data = base64.b64decode(brush.target["png_b64"])
        else:
            path = Path(brush.target["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            data = path.read_bytes()
        # Re-encode through the deterministic PNG writer so the canonical
        # form is stable regardless of the source encoder.
        target_doc = {
            "png_b64": base64.b64encode(image_to_bytes(image_from_bytes(data))).decode("ascii")
        }
    return {
        "alpha": float(brush.alpha),
        "background": bool(brush.background),
        "blur_sigma": float(brush.blur_sigma),
        "id": int(brush.id),
        "mask": mask_doc,
        "name": str(brush.name),
        "strength": float(brush.strength),
        "target": target_doc,
    }


def scene_to_json(scene: Scene, base_dir: Path | None = None) -> str:
    scene.validate()
    doc = {
        "brushes": [_canonical_brush(b, scene, base_dir) for b in scene.brushes],
        "canvas": {"height": int(scene.height), "width": int(scene.width)},
        "format": FORMAT_NAME,
        "mode": scene.mode,
        "n_bootstrap": int(scene.n_bootstrap),
        "seed": int(scene.seed),
        "steps": int(scene.steps),
        "stride": [int(scene.stride[0]), int(scene.stride[1])],
        "tile": [int(scene.tile[0]), int(scene.tile[1])],
        "version": FORMAT_VERSION,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def scene_from_json(text: str) -> Scene:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"scene is not valid JSON: {exc}") from exc
    if doc.get("format") != FORMAT_NAME:
        raise SceneError(f"not a scene document (format={doc.get('format')!r})")
    if doc.get("version") != FORMAT_VERSION:
        raise SceneError(
            f"scene version {doc.get('version')} not supported "
            f"(expected {FORMAT_VERSION}); migrate the file first"
        )
    try:
        brushes = [
            SceneBrush(
                id=int(b["id"]),
                name=str(b.get("name", f"brush-{b['id']}")),
                background=bool(b.get("background", False)),
                target=dict(b["target"]),
                mask=dict(b.get("mask", {"full": True})),
                alpha=float(b.get("alpha", 1.0)),
                blur_sigma=float(b.get("blur_sigma", 0.0)),
                strength=float(b.get("strength", 1.0)),
            )
            for b in doc["brushes"]
        ]
        scene = Scene(
            height=int(doc["canvas"]["height"]),
            width=int(doc["canvas"]["width"]),
            seed=int(doc.get("seed", 0)),
            mode=str(doc.get("mode", "lcm")),
            steps=int(doc.get("steps", 5)),
            tile=tuple(doc.get("tile", (64, 64))),
            stride=tuple(doc.get("stride", (32, 32))),
            n_bootstrap=int(doc.get("n_bootstrap", 1)),
            brushes=brushes,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"malformed scene document: {exc}") from exc
    scene.validate()
    return scene


def save_scene(scene: Scene, path, base_dir: Path | None = None) -> None:
    Path(path).write_text(scene_to_json(scene, base_dir))


def load_scene(path) -> Scene:
    path = Path(path)
    scene = scene_from_json(path.read_text())
    # Inline any path references now, anchored at the scene file location.
    for brush in scene.brushes:
        if "path" in brush.mask:
            mask = _mask_array(brush, scene, path.parent)
            brush.mask = {
                "png_b64": base64.b64encode(mask_to_png(mask)).decode("ascii")
            }
        if "path" in brush.target:
            target_path = Path(brush.target["path"])
            if not target_path.is_absolute():
                target_path = path.parent / target_path
            image = image_from_bytes(target_path.read_bytes())
            brush.target = {
                "png_b64": base64.b64encode(image_to_bytes(image)).decode("ascii")
            }
    return scene
