"""Noise schedule, noise levels, and timestep plans.

Conventions:
  * ``alpha_bar(t)`` is the cumulative signal retention at timestep ``t``,
    tabulated for integer ``t`` in ``[0, T]`` with ``alpha_bar(0) = 1``.
  * ``beta(t) = sqrt(1 - alpha_bar(t))`` is the noise level, so a latent at
    timestep ``t`` is ``sqrt(alpha_bar(t)) * x0 + beta(t) * eps``.
  * A plan holds ``n`` strictly decreasing timesteps; generation walks them
    from the noisiest (``T - 1``) down to the cleanest.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError


class SamplerMode(str, enum.Enum):
    """Selects how much noise each reverse step re-injects."""

    DDIM = "ddim"  # fully deterministic steps
    LCM = "lcm"  # re-noise to the next level after every step

    @classmethod
    def parse(cls, value: "SamplerMode | str") -> "SamplerMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"unknown sampler mode {value!r}") from None


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable alpha_bar table plus the sampler mode it serves."""

    max_timestep: int
    alpha_bar_table: np.ndarray  # shape (T + 1,), alpha_bar_table[0] == 1.0
    mode: SamplerMode

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bar_table[t])

    def beta(self, t: int) -> float:
        """Noise level sqrt(1 - alpha_bar(t)); 0 at t = 0."""
        return float(np.sqrt(1.0 - self.alpha_bar_table[t]))


@dataclass(frozen=True)
class TimestepPlan:
    """Strictly decreasing timesteps walked during generation.

    ``steps[0]`` is the noisiest timestep (always ``T - 1``) and
    ``steps[-1]`` the last one before the final denoised output.
    ``eta[k]`` is the noise scale applied after completing the step taken
    at ``steps[k]``; the final entry is always 0 so the emitted image is
    noise-free.
    """

    steps: tuple[int, ...]
    eta: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.steps)

    def timestep(self, i: int) -> int:
        """Timestep for 1-based step index ``i``; ``i = n`` runs first."""
        return self.steps[self.n - i]


def build_schedule(
    T: int = 1000,
    beta_start: float = 0.00085,
    beta_end: float = 0.012,
    mode: SamplerMode | str = SamplerMode.LCM,
) -> NoiseSchedule:
    """Scaled-linear variance schedule with a cumulative-product table.

    Per-step variances interpolate linearly in sqrt space between
    ``beta_start`` and ``beta_end`` over ``T`` steps;
    ``alpha_bar(t)`` is the running product of ``(1 - variance)`` so
    ``alpha_bar(0)`` is exactly 1 (empty product) and ``alpha_bar(T)``
    bottoms out near but strictly above zero.
    """
    if T < 2:
        raise ParameterError(f"T must be >= 2, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ParameterError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    variances = np.linspace(beta_start**0.5, beta_end**0.5, T, dtype=np.float64) ** 2
    table = np.empty(T + 1, dtype=np.float64)
    table[0] = 1.0
    table[1:] = np.cumprod(1.0 - variances)
    return NoiseSchedule(max_timestep=T, alpha_bar_table=table, mode=SamplerMode.parse(mode))


def make_timesteps(schedule: NoiseSchedule, n: int = 5) -> TimestepPlan:
    """Uniformly spaced descending plan starting at ``T - 1``."""
    T = schedule.max_timestep
    if not (1 <= n <= T):
        raise ParameterError(f"step count must be in [1, {T}], got {n}")
    spacing = T // n
    steps = tuple(T - 1 - k * spacing for k in range(n))
    if schedule.mode is SamplerMode.LCM:
        # Re-noise to the level of the timestep each step lands on; the
        # final step emits the clean estimate, so no noise there.
        eta = tuple(schedule.beta(steps[k + 1]) for k in range(n - 1)) + (0.0,)
    else:
        eta = (0.0,) * n
    return TimestepPlan(steps=steps, eta=eta)


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def add_noise(x0: np.ndarray, eps: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """Forward-noise ``x0`` to timestep ``t``: sqrt(ab)*x0 + sqrt(1-ab)*eps."""
    _check_shapes(x0, eps)
    ab = schedule.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def estimate_x0(x_t: np.ndarray, eps_hat: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """Invert the forward process given a noise estimate.

    At ``t = 0`` the latent is already clean and ``eps_hat`` is ignored.
    """
    _check_shapes(x_t, eps_hat)
    if t == 0:
        return x_t.copy()
    ab = schedule.alpha_bar(t)
    return (x_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)
