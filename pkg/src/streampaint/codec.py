"""Deterministic latent codec honoring the x8 spatial contract.

A stand-in for a learned autoencoder: encoding takes per-channel 8x8 block
means (RGB plus a luminance channel), decoding bilinearly upsamples the RGB
channels back to pixel space.  A real autoencoder can replace it behind the
same interface; everything downstream only relies on the x8 size contract
and on white encoding to an all-ones latent.
"""

from __future__ import annotations

import io
import struct
import time

import cv2
import numpy as np
from PIL import Image

from .errors import ShapeError

SCALE = 8
CHANNELS = 4

_LATENT_MAGIC = b"SPL1"


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luma of an (..., 3) array.

    Written as offsets from red so grayscale inputs (and in particular pure
    white) map to their exact value despite the weights not summing to 1 in
    binary floating point.
    """
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    return r + 0.587 * (g - r) + 0.114 * (b - r)


class LatentCodec:
    """Block-mean encoder / bilinear decoder with optional simulated latency.

    ``latency`` models the per-call cost of a heavier learned codec so the
    throughput benchmark can compare codec variants; 0 disables it.
    """

    def __init__(self, latency: float = 0.0):
        self.latency = float(latency)

    def _delay(self) -> None:
        if self.latency > 0.0:
            time.sleep(self.latency)

    def encode(self, image: np.ndarray) -> np.ndarray:
        """RGB image (8H, 8W, 3) in [0,1] -> latent (H, W, 4)."""
        self._delay()
        return encode(image)

    def decode(self, latent: np.ndarray) -> np.ndarray:
        """Latent (H, W, D>=3) -> RGB image (8H, 8W, 3) clamped to [0,1]."""
        self._delay()
        return decode(latent)


def tiny_codec(latency: float = 0.0) -> LatentCodec:
    """Compressed-codec stand-in: identical contract, lower latency."""
    return LatentCodec(latency=latency)


def encode(image: np.ndarray) -> np.ndarray:
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeError(f"expected (H, W, 3) image, got {image.shape}")
    H8, W8 = image.shape[:2]
    if H8 % SCALE or W8 % SCALE:
        raise ShapeError(f"image dims {H8}x{W8} not divisible by {SCALE}")
    h, w = H8 // SCALE, W8 // SCALE
    blocks = image.reshape(h, SCALE, w, SCALE, 3).mean(axis=(1, 3))
    latent = np.empty((h, w, CHANNELS), dtype=np.float64)
    latent[..., :3] = blocks
    latent[..., 3] = luminance(blocks)
    return latent


def decode(latent: np.ndarray) -> np.ndarray:
    if latent.ndim != 3 or latent.shape[2] < 3:
        raise ShapeError(f"expected (H, W, >=3) latent, got {latent.shape}")
    h, w = latent.shape[:2]
    rgb = np.ascontiguousarray(latent[..., :3], dtype=np.float32)
    out = cv2.resize(rgb, (w * SCALE, h * SCALE), interpolation=cv2.INTER_LINEAR)
    # Images stay float32: plenty for 8-bit output, and the hot path of the
    # streaming loop.
    return np.clip(out, np.float32(0.0), np.float32(1.0))


def image_to_bytes(image: np.ndarray) -> bytes:
    """Deterministic PNG encoding of a float RGB image in [0,1]."""
    u8 = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def image_from_bytes(data: bytes) -> np.ndarray:
    """PNG/JPEG bytes -> float RGB image in [0,1]."""
    img = Image.open(io.BytesIO(data)).convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def save_image(path, image: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(image_to_bytes(image))


def load_image(path) -> np.ndarray:
    with open(path, "rb") as f:
        return image_from_bytes(f.read())


def save_latent(path, latent: np.ndarray) -> None:
    """Raw little-endian f32 dump: magic, H, W, D header then data."""
    h, w, d = latent.shape
    with open(path, "wb") as f:
        f.write(_LATENT_MAGIC)
        f.write(struct.pack("<III", h, w, d))
        f.write(latent.astype("<f4").tobytes())


def load_latent(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _LATENT_MAGIC:
            raise ShapeError(f"bad latent file magic {magic!r}")
        h, w, d = struct.unpack("<III", f.read(12))
        data = np.frombuffer(f.read(h * w * d * 4), dtype="<f4")
        if data.size != h * w * d:
            raise ShapeError("latent file truncated")
        return data.reshape(h, w, d).astype(np.float64)
