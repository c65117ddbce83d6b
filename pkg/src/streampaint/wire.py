"""Binary wire protocol for serving a denoiser over a stream socket.

Frames are length-prefixed: a little-endian u32 byte count, then the
payload.  Payloads start with a 4-byte magic:

  ``SMDR``  request:  u32 batch, u32 H, u32 W, u32 D, then per element
            (u32 timestep, u32 conditioning id, H*W*D little-endian f32).
  ``SMDE``  response: same layout carrying the predicted noise.
  ``SMDC``  conditioning registration: u32 id, u32 K, K f32 embedding,
            optionally followed by a flat f32 target (reshaped lazily to
            the tile shape of the first request that uses it).

One connection serves one client; requests are answered in order.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading

import numpy as np

from .denoiser import Conditioning, Denoiser, DenoiseRequest
from .errors import BackendError

MAGIC_REQUEST = b"SMDR"
MAGIC_RESPONSE = b"SMDE"
MAGIC_CONDITIONING = b"SMDC"

_HEADER = struct.Struct("<I")
_BATCH_HEADER = struct.Struct("<IIII")
_ELEMENT_HEADER = struct.Struct("<II")
_COND_HEADER = struct.Struct("<II")


def _read_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise BackendError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> bytes | None:
    """One length-prefixed frame, or None on clean EOF."""
    head = b""
    while len(head) < _HEADER.size:
        chunk = sock.recv(_HEADER.size - len(head))
        if not chunk:
            if head:
                raise BackendError("connection closed mid-length-prefix")
            return None
        head += chunk
    (length,) = _HEADER.unpack(head)
    return _read_exact(sock, length)


def write_frame(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(_HEADER.pack(len(payload)) + payload)


def pack_batch(magic: bytes, tiles: np.ndarray, timesteps, cond_ids) -> bytes:
    b, h, w, d = tiles.shape
    parts = [magic, _BATCH_HEADER.pack(b, h, w, d)]
    data = np.ascontiguousarray(tiles, dtype="<f4")
    for k in range(b):
        parts.append(_ELEMENT_HEADER.pack(int(timesteps[k]), int(cond_ids[k])))
        parts.append(data[k].tobytes())
    return b"".join(parts)


def unpack_batch(payload: bytes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Payload after the magic -> (tiles, timesteps, conditioning ids)."""
    b, h, w, d = _BATCH_HEADER.unpack_from(payload, 0)
    offset = _BATCH_HEADER.size
    element_bytes = h * w * d * 4
    tiles = np.empty((b, h, w, d), dtype=np.float32)
    timesteps = np.empty(b, dtype=np.int64)
    cond_ids = np.empty(b, dtype=np.int64)
    for k in range(b):
        timesteps[k], cond_ids[k] = _ELEMENT_HEADER.unpack_from(payload, offset)
        offset += _ELEMENT_HEADER.size
        flat = np.frombuffer(payload, dtype="<f4", count=h * w * d, offset=offset)
        tiles[k] = flat.reshape(h, w, d)
        offset += element_bytes
    if offset != len(payload):
        raise BackendError("trailing bytes in batch frame")
    return tiles, timesteps, cond_ids


def pack_conditioning(cond: Conditioning) -> bytes:
    vector = np.ascontiguousarray(cond.vector, dtype="<f4")
    parts = [MAGIC_CONDITIONING, _COND_HEADER.pack(int(cond.id), vector.size), vector.tobytes()]
    if cond.target is not None:
        parts.append(np.ascontiguousarray(cond.target, dtype="<f4").tobytes())
    return b"".join(parts)


def unpack_conditioning(payload: bytes) -> Conditioning:
    cond_id, k = _COND_HEADER.unpack_from(payload, 0)
    offset = _COND_HEADER.size
    vector = np.frombuffer(payload, dtype="<f4", count=k, offset=offset).astype(np.float64)
    offset += k * 4
    target = None
    if offset < len(payload):
        if (len(payload) - offset) % 4:
            raise BackendError("conditioning target not f32-aligned")
        target = np.frombuffer(payload, dtype="<f4", offset=offset).astype(np.float64)
    return Conditioning(id=cond_id, vector=vector, target=target)


class _DenoiseHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        backend: Denoiser = self.server.backend  # type: ignore[attr-defined]
        while True:
            try:
                payload = read_frame(self.request)
            except BackendError:
                return
            if payload is None:
                return
            magic, body = payload[:4], payload[4:]
            if magic == MAGIC_CONDITIONING:
                backend.register(unpack_conditioning(body))
            elif magic == MAGIC_REQUEST:
                tiles, timesteps, cond_ids = unpack_batch(body)
                req = DenoiseRequest(
                    tiles=tiles.astype(np.float64),
                    timesteps=timesteps,
                    conditioning_ids=cond_ids,
                )
                eps = backend.predict_noise(req)
                write_frame(
                    self.request,
                    pack_batch(MAGIC_RESPONSE, eps, timesteps, cond_ids),
                )
            else:
                return  # unknown magic: drop the connection


class DenoiseServer(socketserver.ThreadingTCPServer):
    """Serves a denoiser backend on a TCP port; one thread per connection.

    Targets arrive flat over the wire; they are reshaped to each request's
    tile shape inside the backend, so the server needs no tile-size config.
    """

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], backend: Denoiser):
        super().__init__(address, _DenoiseHandler)
        self.backend = backend

    def serve_in_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


class RemoteDenoiser(Denoiser):
    """Client side: a denoiser living behind a socket.

    All requests share one connection and are strictly serialized, matching
    the engine loop's single-in-flight usage.
    """

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._lock = threading.Lock()

    def register(self, cond: Conditioning) -> None:
        with self._lock:
            write_frame(self._sock, pack_conditioning(cond))

    def predict_noise(self, req: DenoiseRequest) -> np.ndarray:
        with self._lock:
            write_frame(
                self._sock,
                pack_batch(MAGIC_REQUEST, req.tiles, req.timesteps, req.conditioning_ids),
            )
            try:
                payload = read_frame(self._sock)
            except socket.timeout as exc:
                raise BackendError("denoiser backend timed out") from exc
        if payload is None or payload[:4] != MAGIC_RESPONSE:
            raise BackendError("malformed response from denoiser backend")
        eps32, _, _ = unpack_batch(payload[4:])
        return eps32.astype(np.float64)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def parse_backend_address(spec: str) -> tuple[str, int]:
    """'host:port' -> (host, port)."""
    host, _, port = spec.rpartition(":")
    if not host or not port.isdigit():
        raise BackendError(f"backend address must be host:port, got {spec!r}")
    return host, int(port)
