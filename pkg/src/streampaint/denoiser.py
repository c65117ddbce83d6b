"""Pluggable noise-prediction backends.

The engine only ever sees the ``Denoiser`` interface: register conditionings
up front, then answer batched noise-prediction requests whose elements may
sit at different timesteps.  Three implementations ship:

  * ``AnalyticDenoiser`` — closed-form backend whose prediction makes the
    clean-latent estimate equal a registered target exactly.  Every pixel's
    trajectory becomes a scalar recursion, giving the whole pipeline an
    exact independent oracle.
  * ``LatencyDenoiser`` — wraps any backend and sleeps a fixed time per
    call (not per batch element), mimicking amortized accelerator batching.
  * ``RemoteDenoiser`` (wire module) — speaks the binary socket protocol.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, ShapeError
from .schedule import NoiseSchedule

BETA_FLOOR = 1e-6


@dataclass(eq=False)
class Conditioning:
    """Opaque prompt embedding, plus a latent target for the analytic backend."""

    id: int
    vector: np.ndarray
    target: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        if self.target is not None:
            self.target = np.asarray(self.target, dtype=np.float64)


@dataclass(eq=False)
class DenoiseRequest:
    """Batch of latent tiles to denoise; timesteps may differ per element."""

    tiles: np.ndarray  # (B, H, W, D)
    timesteps: np.ndarray  # (B,) int
    conditioning_ids: np.ndarray  # (B,) int

    def __post_init__(self) -> None:
        self.tiles = np.asarray(self.tiles, dtype=np.float64)
        self.timesteps = np.asarray(self.timesteps, dtype=np.int64).reshape(-1)
        self.conditioning_ids = np.asarray(self.conditioning_ids, dtype=np.int64).reshape(-1)
        if self.tiles.ndim != 4:
            raise ShapeError(f"expected (B, H, W, D) tiles, got {self.tiles.shape}")
        B = self.tiles.shape[0]
        if self.timesteps.shape != (B,) or self.conditioning_ids.shape != (B,):
            raise ShapeError("batch size mismatch between tiles, timesteps, and ids")

    @property
    def batch_size(self) -> int:
        return self.tiles.shape[0]


class Denoiser:
    """Interface: conditioning registry plus batched noise prediction."""

    def register(self, cond: Conditioning) -> None:
        raise NotImplementedError

    def predict_noise(self, req: DenoiseRequest) -> np.ndarray:
        raise NotImplementedError

    def close(self) -> None:  # pragma: no cover - trivial default
        pass


class AnalyticDenoiser(Denoiser):
    """Predicts exactly the noise that separates the tile from its target.

    By construction ``estimate_x0(x_t, predict(x_t, t, y), t)`` equals the
    target registered under ``y`` for any input, which is what makes the
    full generation loop verifiable in closed form.
    """

    def __init__(self, schedule: NoiseSchedule):
        self.schedule = schedule
        self._conditionings: dict[int, Conditioning] = {}

    def register(self, cond: Conditioning) -> None:
        if cond.target is None:
            raise ConditioningError(f"analytic backend needs a target for id {cond.id}")
        self._conditionings[cond.id] = cond

    def conditioning(self, cond_id: int) -> Conditioning:
        try:
            return self._conditionings[int(cond_id)]
        except KeyError:
            raise ConditioningError(f"unknown conditioning id {cond_id}") from None

    def predict_noise(self, req: DenoiseRequest) -> np.ndarray:
        out = np.empty_like(req.tiles)
        h, w, d = req.tiles.shape[1:]
        for b in range(req.batch_size):
            cond = self.conditioning(req.conditioning_ids[b])
            target = np.asarray(cond.target, dtype=np.float64)
            if target.size == d:
                # Per-channel constant target: valid at any tile size.
                target = np.broadcast_to(target.reshape(1, 1, d), (h, w, d))
            elif target.size == h * w * d:
                target = target.reshape(h, w, d)
            else:
                raise ConditioningError(
                    f"target for id {cond.id} has {target.size} values, "
                    f"expected {d} or {h * w * d}"
                )
            t = int(req.timesteps[b])
            ab = self.schedule.alpha_bar(t)
            beta = max(np.sqrt(1.0 - ab), BETA_FLOOR)
            out[b] = (req.tiles[b] - np.sqrt(ab) * target) / beta
        return out


class LatencyDenoiser(Denoiser):
    """Fixed per-call delay around any backend.

    The delay is charged once per ``predict_noise`` call regardless of batch
    size; that amortization is exactly what pipelined stream batching hides.
    """

    def __init__(self, inner: Denoiser, latency: float):
        self.inner = inner
        self.latency = float(latency)
        self.calls = 0

    def register(self, cond: Conditioning) -> None:
        self.inner.register(cond)

    def predict_noise(self, req: DenoiseRequest) -> np.ndarray:
        if self.latency > 0.0:
            time.sleep(self.latency)
        self.calls += 1
        return self.inner.predict_noise(req)

    def close(self) -> None:
        self.inner.close()


def mix_conditioning(fg: Conditioning, bg: Conditioning, s: float, new_id: int | None = None) -> Conditioning:
    """Linear blend ``s * fg + (1 - s) * bg`` of vectors (and targets)."""
    if not (0.0 <= s <= 1.0):
        raise ConditioningError(f"mix ratio must be in [0, 1], got {s}")
    if fg.vector.shape != bg.vector.shape:
        raise ConditioningError(
            f"embedding size mismatch: {fg.vector.shape} vs {bg.vector.shape}"
        )
    target = None
    if fg.target is not None and bg.target is not None:
        if fg.target.shape != bg.target.shape:
            raise ConditioningError("target shape mismatch in conditioning mix")
        target = s * fg.target + (1.0 - s) * bg.target
    elif fg.target is not None or bg.target is not None:
        raise ConditioningError("cannot mix a targeted conditioning with an untargeted one")
    return Conditioning(
        id=fg.id if new_id is None else new_id,
        vector=s * fg.vector + (1.0 - s) * bg.vector,
        target=target,
    )
