"""Tiled multi-prompt generation over a latent canvas.

Two loops share the same tiling and aggregation machinery:

  * :func:`generate` — the stabilized loop: per-step quantized masks,
    white-background bootstrapping with mask centering for the first few
    (noisiest) steps, tile/prompt averaging applied to the deterministic
    part of each step only, and a single post-average noise injection on
    the full canvas.
  * :func:`generate_baseline` — the reference loop it improves on: raw
    binary masks at every step, random-color bootstrapping for the first
    40% of steps, and the full step (noise included) running before
    aggregation, so per-prompt noise gets averaged away in overlaps.

Step requests across tiles and prompts are gathered into one batched
denoiser call per step; the stream scheduler reuses the same request
builder to batch across in-flight canvases as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import rng
from .codec import CHANNELS, LatentCodec, luminance
from .denoiser import Conditioning, Denoiser, DenoiseRequest, mix_conditioning
from .errors import (
    AggregationError,
    ConditioningError,
    NumericError,
    ParameterError,
)
from .masks import (
    QuantizedMaskStack,
    SemanticBrush,
    background_stack,
    bounding_box_center,
    quantize_mask,
    roll_by,
    smooth_mask,
)
from .sampler import StepContext, inject_noise, step_except_noise
from .schedule import NoiseSchedule, TimestepPlan, add_noise

# Registered ids for strength-mixed conditionings start here; base prompt
# conditionings use the brush-assigned small ids below this.
MIX_ID_BASE = 1000


@dataclass(frozen=True)
class TileSet:
    """Overlapping, equally sized view rectangles covering the canvas."""

    rects: tuple[tuple[int, int, int, int], ...]  # (top, bottom, left, right)
    tile_shape: tuple[int, int]
    stride: tuple[int, int]

    def __len__(self) -> int:
        return len(self.rects)


def _tile_starts(extent: int, size: int, stride: int) -> list[int]:
    if size >= extent:
        return [0]
    starts = list(range(0, extent - size + 1, stride))
    if starts[-1] != extent - size:
        starts.append(extent - size)  # snap the last tile to the canvas edge
    return starts


def make_tiles(
    height: int,
    width: int,
    tile: tuple[int, int] = (64, 64),
    stride: tuple[int, int] = (32, 32),
) -> TileSet:
    """Grid of stride-spaced tiles; edge tiles shift inward, never pad.

    Tiles larger than the canvas clamp to the canvas extent (a single view).
    """
    if height < 1 or width < 1:
        raise ParameterError(f"canvas dims must be positive, got {height}x{width}")
    if tile[0] < 1 or tile[1] < 1 or stride[0] < 1 or stride[1] < 1:
        raise ParameterError("tile and stride dims must be positive")
    th, tw = min(tile[0], height), min(tile[1], width)
    rects = tuple(
        (top, top + th, left, left + tw)
        for top in _tile_starts(height, th, stride[0])
        for left in _tile_starts(width, tw, stride[1])
    )
    return TileSet(rects=rects, tile_shape=(th, tw), stride=stride)


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for one generation run.

    ``n_bootstrap`` counts from the first (noisiest) step.  The stabilized
    loop always uses white bootstrapping with centering; ``bootstrap_color``
    and ``centering`` only matter for the baseline loop.
    """

    plan: TimestepPlan
    seed: int = 0
    tile: tuple[int, int] = (64, 64)
    stride: tuple[int, int] = (32, 32)
    n_bootstrap: int = 1
    bootstrap_color: str = "white"  # 'white' | 'random_uniform'
    centering: bool = True

    def __post_init__(self) -> None:
        if self.n_bootstrap < 0 or self.n_bootstrap > self.plan.n:
            raise ParameterError(
                f"n_bootstrap must be in [0, {self.plan.n}], got {self.n_bootstrap}"
            )
        if self.bootstrap_color not in ("white", "random_uniform"):
            raise ParameterError(f"unknown bootstrap color {self.bootstrap_color!r}")


@dataclass(eq=False)
class Palette:
    """Brush list plus the conditioning store backing it."""

    brushes: list[SemanticBrush]
    conditionings: dict[int, Conditioning]
    version: int = 0

    def background(self) -> SemanticBrush:
        bgs = [b for b in self.brushes if b.is_background]
        if len(bgs) != 1:
            raise ParameterError(f"palette needs exactly one background brush, has {len(bgs)}")
        return bgs[0]

    def validate(self) -> None:
        if not self.brushes:
            raise ParameterError("palette is empty")
        self.background()
        for brush in self.brushes:
            if brush.conditioning_ref not in self.conditionings:
                raise ConditioningError(
                    f"brush {brush.id} references unknown conditioning {brush.conditioning_ref}"
                )


@dataclass(eq=False)
class PreparedPalette:
    """Palette after preprocessing: quantized stacks and registered prompts."""

    brushes: list[SemanticBrush]
    stacks: list[QuantizedMaskStack]
    cond_ids: list[int]
    background_index: int
    version: int = 0


def prepare_palette(
    palette: Palette,
    plan: TimestepPlan,
    schedule: NoiseSchedule,
    denoiser: Denoiser,
    *,
    quantized: bool = True,
) -> PreparedPalette:
    """Blur/quantize masks and register (strength-mixed) conditionings.

    With ``quantized=False`` (baseline), masks binarize at 0.5 and stay
    fixed across steps.  Either way the background claims the per-step
    complement of the union of foreground coverage, so total aggregation
    weight is at least 1 everywhere.
    """
    palette.validate()
    bg = palette.background()
    n = plan.n
    shape = bg.raw_mask.shape

    fg_stacks: list[QuantizedMaskStack] = []
    stacks_by_brush: dict[int, QuantizedMaskStack] = {}
    for brush in palette.brushes:
        if brush.is_background:
            continue
        if brush.raw_mask.shape != shape:
            raise ParameterError(
                f"brush {brush.id} mask shape {brush.raw_mask.shape} != canvas {shape}"
            )
        if quantized:
            stack = quantize_mask(
                smooth_mask(brush.raw_mask, brush.blur_sigma), brush.alpha, plan, schedule
            )
        else:
            binary = np.broadcast_to(brush.raw_mask > 0.5, (n,) + shape)
            stack = QuantizedMaskStack(masks=np.array(binary), steps=plan.steps)
        fg_stacks.append(stack)
        stacks_by_brush[brush.id] = stack
    bg_stack = background_stack(fg_stacks, n, shape)

    bg_cond = palette.conditionings[bg.conditioning_ref]
    brushes, stacks, cond_ids = [], [], []
    for brush in palette.brushes:
        cond = palette.conditionings[brush.conditioning_ref]
        if not brush.is_background and brush.strength < 1.0:
            cond = mix_conditioning(cond, bg_cond, brush.strength, new_id=MIX_ID_BASE + brush.id)
        denoiser.register(cond)
        brushes.append(brush)
        stacks.append(bg_stack if brush.is_background else stacks_by_brush[brush.id])
        cond_ids.append(cond.id)

    return PreparedPalette(
        brushes=brushes,
        stacks=stacks,
        cond_ids=cond_ids,
        background_index=next(i for i, b in enumerate(brushes) if b.is_background),
        version=palette.version,
    )


def aggregate(
    tile_outputs: list[tuple[np.ndarray, np.ndarray]],
    value_acc: np.ndarray,
    weight_acc: np.ndarray,
    rect: tuple[int, int, int, int],
) -> None:
    """Accumulate masked tile outputs into the canvas running sums."""
    top, bottom, left, right = rect
    for latent_tile, mask_tile in tile_outputs:
        w = mask_tile.astype(np.float64)
        value_acc[top:bottom, left:right] += w[..., None] * latent_tile
        weight_acc[top:bottom, left:right] += w


def normalize_aggregate(value_acc: np.ndarray, weight_acc: np.ndarray) -> np.ndarray:
    if (weight_acc <= 0.0).any():
        bad = int((weight_acc <= 0.0).sum())
        raise AggregationError(f"{bad} canvas pixels ended the step with zero blend weight")
    return value_acc / weight_acc[..., None]


def _background_latent(color: np.ndarray) -> np.ndarray:
    """Constant-color image encoded directly: RGB channels plus luminance."""
    latent = np.empty(CHANNELS, dtype=np.float64)
    latent[:3] = color
    latent[3] = float(luminance(np.asarray(color, dtype=np.float64)))
    return latent


def bootstrap_mix(
    tile: np.ndarray,
    mask: np.ndarray,
    t: int,
    color_mode: str,
    schedule: NoiseSchedule,
    seed: int,
    *noise_key: int,
) -> np.ndarray:
    """Replace the outside-mask region with a noised constant background.

    White mode uses an all-ones background; random mode draws one uniform
    RGB color per call.  The background is noised to the tile's timestep so
    the mixture stays level-consistent.
    """
    if color_mode == "white":
        color = np.ones(3)
    else:
        color = rng.uniform(3, seed, rng.COLOR, *noise_key)
    flat = np.broadcast_to(_background_latent(color), tile.shape)
    eps = rng.normal(tile.shape, seed, rng.BOOTSTRAP, *noise_key)
    x_bg = add_noise(flat, eps, t, schedule)
    m = mask.astype(np.float64)[..., None]
    return m * tile + (1.0 - m) * x_bg


@dataclass(eq=False)
class _StepElement:
    """Bookkeeping for one (tile, brush) entry of a step batch."""

    tile_index: int
    brush_index: int
    mask: np.ndarray
    roll_offset: tuple[int, int] | None


def build_step_requests(
    x: np.ndarray,
    ctx: StepContext,
    prep: PreparedPalette,
    tiles: TileSet,
    config: GenerationConfig,
    *,
    stabilized: bool = True,
) -> tuple[DenoiseRequest, list[_StepElement]]:
    """Assemble the batched denoise request for one step of one canvas.

    Brushes with no mask coverage inside a tile are skipped; they would
    enter the average with zero weight.  Bootstrapping (and centering, in
    the stabilized loop) applies to foreground brushes during the first
    ``n_bootstrap`` processed steps.
    """
    n = ctx.plan.n
    ordinal = n - ctx.step_index  # 0-based position in processing order
    bootstrapping = ordinal < config.n_bootstrap
    # Stabilized mode pins white backgrounds and centering; the baseline
    # keeps its random colors and never centers.
    color_mode = "white" if stabilized else config.bootstrap_color
    centering = stabilized

    batch_tiles: list[np.ndarray] = []
    batch_t: list[int] = []
    batch_cond: list[int] = []
    elements: list[_StepElement] = []

    for j, rect in enumerate(tiles.rects):
        top, bottom, left, right = rect
        view = x[top:bottom, left:right]
        th, tw = tiles.tile_shape
        for k, brush in enumerate(prep.brushes):
            mask = prep.stacks[k].at_position(ordinal)[top:bottom, left:right]
            if not mask.any():
                continue
            tile = view.copy()
            roll_offset = None
            if bootstrapping and not brush.is_background:
                tile = bootstrap_mix(
                    tile, mask, ctx.t, color_mode, ctx.schedule, ctx.rng_seed,
                    ctx.step_index, j, k,
                )
                if centering:
                    r, c = bounding_box_center(mask)
                    roll_offset = (th // 2 - r, tw // 2 - c)
                    tile = roll_by(tile, roll_offset)
            batch_tiles.append(tile)
            batch_t.append(ctx.t)
            batch_cond.append(prep.cond_ids[k])
            elements.append(_StepElement(j, k, mask, roll_offset))

    req = DenoiseRequest(
        tiles=np.stack(batch_tiles),
        timesteps=np.array(batch_t),
        conditioning_ids=np.array(batch_cond),
    )
    return req, elements


def apply_step_responses(
    req: DenoiseRequest,
    eps: np.ndarray,
    elements: list[_StepElement],
    ctx: StepContext,
    tiles: TileSet,
    canvas_shape: tuple[int, int],
    *,
    stabilized: bool = True,
) -> np.ndarray:
    """Run the per-element reverse step and average the results.

    The stabilized loop steps without noise (noise is injected later on the
    averaged canvas); the baseline completes each step, noise included,
    before averaging.
    """
    value = np.zeros(canvas_shape + (req.tiles.shape[3],), dtype=np.float64)
    weight = np.zeros(canvas_shape, dtype=np.float64)
    for b, elem in enumerate(elements):
        stepped = step_except_noise(req.tiles[b], eps[b], ctx)
        if not stabilized:
            stepped = inject_noise(stepped, ctx, elem.tile_index, elem.brush_index)
        if elem.roll_offset is not None:
            stepped = roll_by(stepped, (-elem.roll_offset[0], -elem.roll_offset[1]))
        if not np.isfinite(stepped).all():
            raise NumericError(
                f"non-finite latent at step {ctx.step_index}, tile {elem.tile_index}, "
                f"brush index {elem.brush_index}"
            )
        aggregate([(stepped, elem.mask)], value, weight, tiles.rects[elem.tile_index])
    return normalize_aggregate(value, weight)


def _run_loop(
    palette: Palette,
    dims: tuple[int, int],
    config: GenerationConfig,
    schedule: NoiseSchedule,
    denoiser: Denoiser,
    codec: LatentCodec,
    *,
    stabilized: bool,
    n_bootstrap: int,
    seed: int | None,
    on_step=None,
    return_latent: bool = False,
):
    plan = config.plan
    run_seed = config.seed if seed is None else seed
    run_config = replace(config, n_bootstrap=n_bootstrap)
    prep = prepare_palette(palette, plan, schedule, denoiser, quantized=stabilized)
    height, width = dims
    for brush in palette.brushes:
        if brush.raw_mask.shape != dims:
            raise ParameterError(
                f"brush {brush.id} mask shape {brush.raw_mask.shape} != canvas {dims}"
            )
    tiles = make_tiles(height, width, run_config.tile, run_config.stride)

    x = rng.normal((height, width, CHANNELS), run_seed, rng.INIT)
    for ordinal in range(plan.n):
        i = plan.n - ordinal
        ctx = StepContext(plan=plan, schedule=schedule, step_index=i, rng_seed=run_seed)
        req, elements = build_step_requests(x, ctx, prep, tiles, run_config, stabilized=stabilized)
        eps = denoiser.predict_noise(req)
        x = apply_step_responses(
            req, eps, elements, ctx, tiles, dims, stabilized=stabilized
        )
        if not np.isfinite(x).all():
            raise NumericError(f"non-finite canvas after step {i}")
        if stabilized:
            if on_step is not None:
                on_step(i, "aggregated", x)
            x = inject_noise(x, ctx)
            if on_step is not None:
                on_step(i, "noised", x)
        elif on_step is not None:
            on_step(i, "stepped", x)

    image = codec.decode(x)
    return (image, x) if return_latent else image


def generate(
    palette: Palette,
    dims: tuple[int, int],
    config: GenerationConfig,
    schedule: NoiseSchedule,
    denoiser: Denoiser,
    codec: LatentCodec | None = None,
    *,
    seed: int | None = None,
    on_step=None,
    return_latent: bool = False,
):
    """Stabilized generation; returns the decoded RGB image.

    ``seed`` overrides ``config.seed`` (used by the stream scheduler to give
    every frame its own derived seed).  ``on_step(i, stage, canvas)`` is
    called with stages ``aggregated`` and ``noised`` at every step.
    """
    return _run_loop(
        palette, dims, config, schedule, denoiser, codec or LatentCodec(),
        stabilized=True, n_bootstrap=config.n_bootstrap, seed=seed,
        on_step=on_step, return_latent=return_latent,
    )


def generate_baseline(
    palette: Palette,
    dims: tuple[int, int],
    config: GenerationConfig,
    schedule: NoiseSchedule,
    denoiser: Denoiser,
    codec: LatentCodec | None = None,
    *,
    seed: int | None = None,
    on_step=None,
    return_latent: bool = False,
):
    """Reference tile-averaging loop for A/B comparison.

    Full steps (noise included) run before aggregation, masks stay binary at
    every step, and bootstrapping uses a random constant color over the
    first 40% of steps.
    """
    n_bootstrap = math.ceil(0.4 * config.plan.n)
    baseline_config = replace(config, bootstrap_color="random_uniform", centering=False)
    return _run_loop(
        palette, dims, baseline_config, schedule, denoiser, codec or LatentCodec(),
        stabilized=False, n_bootstrap=n_bootstrap, seed=seed,
        on_step=on_step, return_latent=return_latent,
    )
