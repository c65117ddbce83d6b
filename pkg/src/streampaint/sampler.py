"""Single reverse-diffusion step, split into a deterministic part and noise.

The split is what makes tile/prompt averaging safe with samplers that
re-noise every step: the average is applied to the deterministic part only,
and the step's noise is injected once afterwards on the averaged result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ShapeError
from .schedule import NoiseSchedule, SamplerMode, TimestepPlan, estimate_x0


@dataclass(frozen=True)
class StepContext:
    """Everything a single step needs besides the latent itself.

    ``step_index`` is 1-based: ``n`` is the first (noisiest) step of the
    plan, 1 the final one.  Noise draws are keyed by ``(rng_seed, step)``
    so re-running a step reproduces it exactly.
    """

    plan: TimestepPlan
    schedule: NoiseSchedule
    step_index: int
    rng_seed: int

    def __post_init__(self) -> None:
        if not (1 <= self.step_index <= self.plan.n):
            raise ValueError(f"step_index {self.step_index} outside [1, {self.plan.n}]")

    @property
    def t(self) -> int:
        return self.plan.timestep(self.step_index)

    @property
    def t_next(self) -> int:
        """Timestep this step lands on (t=0 conceptually for the final step)."""
        return 0 if self.step_index == 1 else self.plan.timestep(self.step_index - 1)

    @property
    def eta(self) -> float:
        """Noise scale applied after this step's deterministic part."""
        return self.plan.eta[self.plan.n - self.step_index]


def step_except_noise(x_t: np.ndarray, eps_hat: np.ndarray, ctx: StepContext) -> np.ndarray:
    """Deterministic part of one reverse step.

    Estimates the clean latent from ``eps_hat`` and moves it to the next
    timestep's noise level: the deterministic sampler carries ``eps_hat``
    forward, the re-noising sampler keeps only the scaled clean estimate
    (its noise arrives later via :func:`inject_noise`).  The final step
    returns the clean estimate itself.
    """
    if x_t.shape != eps_hat.shape:
        raise ShapeError(f"latent {x_t.shape} vs noise estimate {eps_hat.shape}")
    x0p = estimate_x0(x_t, eps_hat, ctx.t, ctx.schedule)
    if ctx.step_index == 1:
        return x0p
    ab_next = ctx.schedule.alpha_bar(ctx.t_next)
    if ctx.schedule.mode is SamplerMode.DDIM:
        return np.sqrt(ab_next) * x0p + np.sqrt(1.0 - ab_next) * eps_hat
    return np.sqrt(ab_next) * x0p


def inject_noise(x_tilde: np.ndarray, ctx: StepContext, *extra_key: int) -> np.ndarray:
    """Add this step's post-noise, if the mode calls for any.

    ``extra_key`` extends the noise address for callers that run several
    independent draws at the same step (e.g. one per stream slot).
    """
    eta = ctx.eta
    if eta == 0.0:
        return x_tilde
    eps = rng.normal(x_tilde.shape, ctx.rng_seed, rng.INJECT, ctx.step_index, *extra_key)
    return x_tilde + eta * eps


def step_full(x_t: np.ndarray, eps_hat: np.ndarray, ctx: StepContext, *extra_key: int) -> np.ndarray:
    """Complete reverse step: deterministic part plus post-noise."""
    return inject_noise(step_except_noise(x_t, eps_hat, ctx), ctx, *extra_key)
