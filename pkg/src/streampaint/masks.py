"""Semantic brushes and mask preprocessing.

A brush is one prompt-mask pair.  Before generation each foreground mask is
blurred, scaled by its alpha, and thresholded against the per-step noise
levels, yielding one binary mask per step whose coverage grows as the noise
level falls.  The background brush covers whatever the foreground masks do
not claim at each step, so every canvas pixel always has at least one
contributor.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .codec import SCALE
from .errors import EmptyMaskError, ParameterError, ShapeError
from .schedule import NoiseSchedule, TimestepPlan


@dataclass(eq=False)
class SemanticBrush:
    """One prompt-mask pair plus its preprocessing knobs.

    ``raw_mask`` lives at latent resolution in [0, 1].  ``alpha`` scales the
    blurred mask before quantization (values just below 1 make the brush
    skip the earliest, noisiest steps).  ``strength`` is the mix ratio
    between this brush's conditioning and the background's.
    """

    id: int
    name: str
    conditioning_ref: int
    raw_mask: np.ndarray
    alpha: float = 1.0
    blur_sigma: float = 0.0
    strength: float = 1.0
    is_background: bool = False

    def __post_init__(self) -> None:
        self.raw_mask = np.asarray(self.raw_mask, dtype=np.float64)
        if self.raw_mask.ndim != 2:
            raise ShapeError(f"mask must be 2-D, got shape {self.raw_mask.shape}")
        if self.raw_mask.min() < 0.0 or self.raw_mask.max() > 1.0:
            raise ParameterError("mask values must lie in [0, 1]")
        if not (0.0 <= self.alpha <= 1.0):
            raise ParameterError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.blur_sigma < 0.0:
            raise ParameterError(f"blur sigma must be >= 0, got {self.blur_sigma}")
        if not (0.0 <= self.strength <= 1.0):
            raise ParameterError(f"strength must be in [0, 1], got {self.strength}")
        if self.is_background and not np.all(self.raw_mask == 1.0):
            raise ParameterError("background brush mask must be all-ones")


@dataclass(frozen=True, eq=False)
class QuantizedMaskStack:
    """Per-step binary masks, aligned with the plan's step order.

    ``masks[k]`` belongs to ``plan.steps[k]``; coverage is non-decreasing in
    ``k`` because the thresholding noise level only falls.
    """

    masks: np.ndarray  # (n, H, W) bool
    steps: tuple[int, ...] = field(default=())

    def at_position(self, k: int) -> np.ndarray:
        return self.masks[k]

    @property
    def n(self) -> int:
        return self.masks.shape[0]


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def smooth_mask(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect padding; sigma=0 is identity."""
    if sigma < 0.0:
        raise ParameterError(f"blur sigma must be >= 0, got {sigma}")
    mask = np.asarray(mask, dtype=np.float64)
    if sigma == 0.0:
        return mask.copy()
    kernel = _gaussian_kernel(sigma)
    radius = (kernel.size - 1) // 2
    padded = np.pad(mask, radius, mode="reflect")
    # Horizontal then vertical pass over the padded field.
    rows = np.apply_along_axis(np.convolve, 1, padded, kernel, mode="valid")
    cols = np.apply_along_axis(np.convolve, 0, rows, kernel, mode="valid")
    return cols


def quantize_mask(
    smoothed: np.ndarray,
    alpha: float,
    plan: TimestepPlan,
    schedule: NoiseSchedule,
) -> QuantizedMaskStack:
    """Threshold the (blurred) mask against each step's noise level.

    A pixel is active at a step iff ``alpha * value`` strictly exceeds the
    step's noise level, so coverage widens monotonically as steps denoise.
    """
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha must be in [0, 1], got {alpha}")
    smoothed = np.asarray(smoothed, dtype=np.float64)
    betas = np.array([schedule.beta(t) for t in plan.steps])
    stack = alpha * smoothed[None, :, :] > betas[:, None, None]
    return QuantizedMaskStack(masks=stack, steps=plan.steps)


def background_stack(
    fg_stacks: list[QuantizedMaskStack], n: int, shape: tuple[int, int]
) -> QuantizedMaskStack:
    """Per-step complement of the union of foreground coverage.

    Guarantees total blend weight >= 1 everywhere: the background claims
    exactly the pixels no foreground mask covers at that step (the whole
    canvas when there are no foregrounds, or before any have kicked in).
    """
    union = np.zeros((n,) + shape, dtype=bool)
    for stack in fg_stacks:
        union |= stack.masks
    return QuantizedMaskStack(masks=~union)


def bounding_box_center(mask: np.ndarray) -> tuple[int, int]:
    """Midpoint of the tight bounding box of nonzero pixels (round half up)."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptyMaskError("mask has no nonzero pixels")
    r = (int(rows[0]) + int(rows[-1]) + 1) // 2
    c = (int(cols[0]) + int(cols[-1]) + 1) // 2
    return r, c


def roll_by(canvas: np.ndarray, offset: tuple[int, int]) -> np.ndarray:
    """Circular shift by (drow, dcol); inverse is the negated offset."""
    return np.roll(canvas, shift=offset, axis=(0, 1))


def downsample_mask(mask_image: np.ndarray) -> np.ndarray:
    """Image-resolution mask -> latent resolution by 8x8 area averaging."""
    mask_image = np.asarray(mask_image, dtype=np.float64)
    H8, W8 = mask_image.shape
    if H8 % SCALE or W8 % SCALE:
        raise ShapeError(f"mask dims {H8}x{W8} not divisible by {SCALE}")
    h, w = H8 // SCALE, W8 // SCALE
    return mask_image.reshape(h, SCALE, w, SCALE).mean(axis=(1, 3))


def mask_from_png(data: bytes) -> np.ndarray:
    """8-bit grayscale PNG bytes -> float mask in [0, 1] (image resolution)."""
    img = Image.open(io.BytesIO(data)).convert("L")
    return np.asarray(img, dtype=np.float64) / 255.0


def mask_to_png(mask: np.ndarray) -> bytes:
    """Float mask in [0, 1] -> deterministic 8-bit grayscale PNG bytes."""
    u8 = np.clip(np.rint(np.asarray(mask) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def export_stack_png(stack: QuantizedMaskStack, path) -> None:
    """Debug dump of a quantized stack as a multi-frame PNG (APNG)."""
    frames = [
        Image.fromarray((stack.masks[k] * 255).astype(np.uint8), mode="L")
        for k in range(stack.n)
    ]
    frames[0].save(path, format="PNG", save_all=True, append_images=frames[1:])
