"""Counter-based noise streams.

Every random draw in the engine is addressed by an integer key tuple
(seed; purpose, step, tile, brush, ...) instead of consuming a shared
stateful generator.  Draws are therefore reproducible regardless of
execution order, which is what lets the stream scheduler interleave
canvases and still emit frames bit-identical to sequential runs.
"""

from __future__ import annotations

import numpy as np

# Purpose codes: first element of every key tuple.
INIT = 0  # initial canvas latent
BOOTSTRAP = 1  # background noising during bootstrap mixing
INJECT = 2  # step noise (canvas-level, or per tile/prompt in the baseline)
COLOR = 3  # random constant bootstrap color (baseline algorithm only)


def generator(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the stream addressed by (seed, *key)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def normal(shape, seed: int, *key: int) -> np.ndarray:
    """Unit Gaussian draw from the (seed, *key) stream."""
    return generator(seed, *key).standard_normal(shape)


def uniform(shape, seed: int, *key: int) -> np.ndarray:
    """U(0,1) draw from the (seed, *key) stream."""
    return generator(seed, *key).random(shape)


def derive_seed(seed: int, index: int) -> int:
    """Stable per-frame seed for stream slot `index`.

    Sequential reference runs use the same derivation, so a streamed
    frame and its sequential twin share every noise draw.
    """
    ss = np.random.SeedSequence(entropy=(int(seed), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])
