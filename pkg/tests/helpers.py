"""Builders shared by the unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from streampaint.denoiser import AnalyticDenoiser, Conditioning
from streampaint.engine import GenerationConfig, Palette
from streampaint.masks import SemanticBrush
from streampaint.schedule import build_schedule, make_timesteps

import oracle


def engine_setup(spec: oracle.SceneSpec):
    """SceneSpec -> (palette, config, schedule, denoiser) for the engine."""
    schedule = build_schedule(spec.T, spec.beta_start, spec.beta_end, spec.mode)
    plan = make_timesteps(schedule, spec.n)
    brushes = []
    conditionings = {}
    for k, b in enumerate(spec.brushes):
        mask = np.ones(spec.dims) if b["background"] else b["mask"]
        brushes.append(
            SemanticBrush(
                id=k,
                name=f"brush-{k}",
                conditioning_ref=k,
                raw_mask=mask,
                alpha=b.get("alpha", 1.0),
                blur_sigma=b.get("sigma", 0.0),
                strength=b.get("strength", 1.0),
                is_background=b["background"],
            )
        )
        conditionings[k] = Conditioning(
            id=k,
            vector=np.asarray(b["color"], dtype=np.float64),
            target=oracle.constant_latent(b["color"]),
        )
    palette = Palette(brushes=brushes, conditionings=conditionings)
    config = GenerationConfig(
        plan=plan,
        seed=spec.seed,
        tile=spec.tile,
        stride=spec.stride,
        n_bootstrap=spec.n_bootstrap,
    )
    return palette, config, schedule, AnalyticDenoiser(schedule)


def random_scene(seed: int, rng_: np.random.Generator) -> oracle.SceneSpec:
    """Randomized scene in the acceptance envelope.

    1-5 brushes total, canvas up to 64x576 latent, sigma in {0, 4},
    alpha in {0.98, 1}, both sampler modes, 4 or 5 steps.
    """
    height = 64
    width = int(rng_.choice([64, 128, 192, 320, 576]))
    n_brushes = int(rng_.integers(1, 6))
    mode = str(rng_.choice(["lcm", "ddim"]))
    n = int(rng_.choice([4, 5]))
    brushes = [
        {
            "background": True,
            "color": tuple(rng_.random(3)),
            "alpha": 1.0,
            "sigma": 0.0,
            "strength": 1.0,
        }
    ]
    for _ in range(n_brushes - 1):
        mask = np.zeros((height, width))
        top = int(rng_.integers(0, height - 8))
        left = int(rng_.integers(0, width - 8))
        h = int(rng_.integers(8, height - top + 1))
        w = int(rng_.integers(8, width - left + 1))
        mask[top : top + h, left : left + w] = 1.0
        brushes.append(
            {
                "background": False,
                "mask": mask,
                "color": tuple(rng_.random(3)),
                "alpha": float(rng_.choice([0.98, 1.0])),
                "sigma": float(rng_.choice([0.0, 4.0])),
                "strength": float(rng_.choice([1.0, 0.9])),
            }
        )
    return oracle.SceneSpec(
        dims=(height, width),
        brushes=brushes,
        mode=mode,
        n=n,
        seed=seed,
        tile=(64, 64),
        stride=(32, 32),
        n_bootstrap=1,
    )
