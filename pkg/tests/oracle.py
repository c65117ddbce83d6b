"""Independent reference implementations used to cross-check the engine.

Everything here re-derives results from first principles: direct product
loops for the schedule, shifted-slice accumulation for the blur, the erf
integral for blurred step edges, and a closed-form per-pixel recursion for
whole-canvas generation with the analytic backend (whose clean-latent
estimate equals the target algebraically, so no tensor machinery from the
package is needed).  Only the addressed-noise helper is shared, because the
noise keying is part of the engine's determinism contract.
"""

from __future__ import annotations

import math

import numpy as np

from streampaint import rng


D = 4


def alpha_bar_product(T: int, beta_start: float, beta_end: float) -> list[float]:
    """Direct cumulative product over the scaled-linear variances."""
    lo, hi = math.sqrt(beta_start), math.sqrt(beta_end)
    table = [1.0]
    acc = 1.0
    for k in range(T):
        frac = k / (T - 1)
        variance = (lo + frac * (hi - lo)) ** 2
        acc *= 1.0 - variance
        table.append(acc)
    return table


def beta_of(table: list[float], t: int) -> float:
    return math.sqrt(1.0 - table[t])


def plan_steps(T: int, n: int) -> list[int]:
    spacing = T // n
    return [T - 1 - k * spacing for k in range(n)]


def erf_step_profile(distance: float, sigma: float) -> float:
    """Blurred unit step evaluated at a pixel center `distance` inside.

    The pixel grid samples the step at integer centers; the edge of the
    covered half-plane sits half a pixel before the first covered center.
    """
    return 0.5 * (1.0 + math.erf((distance + 0.5) / (sigma * math.sqrt(2.0))))


def blur_reference(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur by explicit shifted-slice accumulation."""
    if sigma == 0.0:
        return mask.astype(np.float64).copy()
    radius = int(math.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(np.asarray(mask, dtype=np.float64), radius, mode="reflect")
    h, w = mask.shape
    horiz = np.zeros((h + 2 * radius, w), dtype=np.float64)
    for idx, off in enumerate(offsets):
        horiz += kernel[idx] * padded[:, radius + off : radius + off + w]
    out = np.zeros((h, w), dtype=np.float64)
    for idx, off in enumerate(offsets):
        out += kernel[idx] * horiz[radius + off : radius + off + h, :]
    return out


def tile_rects(height, width, tile, stride):
    def starts(extent, size, step):
        if size >= extent:
            return [0]
        xs = list(range(0, extent - size + 1, step))
        if xs[-1] != extent - size:
            xs.append(extent - size)
        return xs

    th, tw = min(tile[0], height), min(tile[1], width)
    return [
        (top, top + th, left, left + tw)
        for top in starts(height, th, stride[0])
        for left in starts(width, tw, stride[1])
    ], (th, tw)


def constant_latent(color) -> np.ndarray:
    r, g, b = color
    return np.array([r, g, b, r + 0.587 * (g - r) + 0.114 * (b - r)])


class SceneSpec:
    """Plain-data scene for the reference recursion.

    brushes: list of dicts with keys mask (latent-res float array or None
    for the background), color (rgb tuple), alpha, sigma, strength,
    background (bool).
    """

    def __init__(self, dims, brushes, mode="lcm", n=5, seed=0,
                 tile=(64, 64), stride=(32, 32), n_bootstrap=1,
                 T=1000, beta_start=0.00085, beta_end=0.012):
        self.dims = dims
        self.brushes = brushes
        self.mode = mode
        self.n = n
        self.seed = seed
        self.tile = tile
        self.stride = stride
        self.n_bootstrap = n_bootstrap
        self.T = T
        self.beta_start = beta_start
        self.beta_end = beta_end


def reference_generate(spec: SceneSpec, trajectory: list | None = None) -> np.ndarray:
    """Per-pixel recursion predicting the final latent canvas.

    Valid for constant-color targets, where mask centering provably cancels
    (roll, elementwise update, inverse roll) and every pixel follows a
    closed-form scalar recursion.  If ``trajectory`` is given, the canvas
    after every step (noise included) is appended to it.
    """
    height, width = spec.dims
    table = alpha_bar_product(spec.T, spec.beta_start, spec.beta_end)
    steps = plan_steps(spec.T, spec.n)
    n = spec.n

    bg_idx = next(i for i, b in enumerate(spec.brushes) if b["background"])
    bg_color = spec.brushes[bg_idx]["color"]

    # Per-brush quantized stacks; background complements the union.
    stacks: list[np.ndarray | None] = []
    for brush in spec.brushes:
        if brush["background"]:
            stacks.append(None)
            continue
        smoothed = blur_reference(brush["mask"], brush["sigma"])
        stack = np.stack(
            [brush["alpha"] * smoothed > beta_of(table, t) for t in steps]
        )
        stacks.append(stack)
    union = np.zeros((n, height, width), dtype=bool)
    for stack in stacks:
        if stack is not None:
            union |= stack
    stacks[bg_idx] = ~union

    targets = []
    bg_target = constant_latent(bg_color)
    for brush in spec.brushes:
        g = constant_latent(brush["color"])
        s = brush.get("strength", 1.0)
        if not brush["background"] and s < 1.0:
            g = s * g + (1.0 - s) * bg_target
        targets.append(g)

    rects, _ = tile_rects(height, width, spec.tile, spec.stride)
    white = constant_latent((1.0, 1.0, 1.0))

    x = rng.normal((height, width, D), spec.seed, rng.INIT)
    for ordinal in range(n):
        i = n - ordinal
        t = steps[ordinal]
        ab_t = table[t]
        beta_t = max(math.sqrt(1.0 - ab_t), 1e-6)
        if ordinal < n - 1:
            t_next = steps[ordinal + 1]
            ab_next = table[t_next]
        else:
            ab_next = 1.0
        value = np.zeros((height, width, D), dtype=np.float64)
        weight = np.zeros((height, width), dtype=np.float64)
        for j, (top, bottom, left, right) in enumerate(rects):
            for k, brush in enumerate(spec.brushes):
                m = stacks[k][ordinal][top:bottom, left:right]
                if not m.any():
                    continue
                x_bar = x[top:bottom, left:right]
                if ordinal < spec.n_bootstrap and not brush["background"]:
                    eps_bg = rng.normal(x_bar.shape, spec.seed, rng.BOOTSTRAP, i, j, k)
                    x_white = math.sqrt(ab_t) * white + math.sqrt(1.0 - ab_t) * eps_bg
                    x_bar = m[..., None] * x_bar + (1.0 - m[..., None]) * x_white
                g = targets[k]
                eps_hat = (x_bar - math.sqrt(ab_t) * g) / beta_t
                if i == 1:
                    out = np.broadcast_to(g, x_bar.shape)
                elif spec.mode == "ddim":
                    out = math.sqrt(ab_next) * g + math.sqrt(1.0 - ab_next) * eps_hat
                else:
                    out = np.broadcast_to(math.sqrt(ab_next) * g, x_bar.shape)
                mf = m.astype(np.float64)
                value[top:bottom, left:right] += mf[..., None] * out
                weight[top:bottom, left:right] += mf
        x = value / weight[..., None]
        if spec.mode == "lcm" and ordinal < n - 1:
            eta = beta_of(table, steps[ordinal + 1])
            x = x + eta * rng.normal((height, width, D), spec.seed, rng.INJECT, i)
        if trajectory is not None:
            trajectory.append(x.copy())
    return x


def decode_reference(latent: np.ndarray) -> np.ndarray:
    """Bilinear x8 upsample used only to turn oracle latents into images."""
    import cv2

    h, w = latent.shape[:2]
    rgb = np.ascontiguousarray(latent[..., :3], dtype=np.float32)
    out = cv2.resize(rgb, (w * 8, h * 8), interpolation=cv2.INTER_LINEAR)
    return np.clip(out, np.float32(0.0), np.float32(1.0))
