import socket

import numpy as np
import pytest

from streampaint.denoiser import AnalyticDenoiser, Conditioning, DenoiseRequest
from streampaint.errors import BackendError
from streampaint.wire import (
    MAGIC_REQUEST,
    MAGIC_RESPONSE,
    DenoiseServer,
    RemoteDenoiser,
    pack_batch,
    pack_conditioning,
    parse_backend_address,
    unpack_batch,
    unpack_conditioning,
    write_frame,
)


class TestFrameCodecs:
    def test_batch_round_trip(self):
        rng_ = np.random.default_rng(0)
        tiles = rng_.standard_normal((3, 4, 5, 2)).astype(np.float32)
        timesteps = np.array([999, 500, 7])
        ids = np.array([1, 2, 1])
        payload = pack_batch(MAGIC_REQUEST, tiles, timesteps, ids)
        assert payload[:4] == MAGIC_REQUEST
        out_tiles, out_t, out_ids = unpack_batch(payload[4:])
        np.testing.assert_array_equal(out_tiles, tiles)
        np.testing.assert_array_equal(out_t, timesteps)
        np.testing.assert_array_equal(out_ids, ids)

    def test_conditioning_round_trip_with_target(self):
        target = np.random.default_rng(1).standard_normal((4, 4, 4)).astype(np.float32)
        cond = Conditioning(id=7, vector=np.array([0.5, 0.25], dtype=np.float32), target=target)
        back = unpack_conditioning(pack_conditioning(cond)[4:])
        assert back.id == 7
        np.testing.assert_array_equal(back.vector, cond.vector)
        np.testing.assert_array_equal(back.target, target.reshape(-1).astype(np.float64))

    def test_conditioning_round_trip_without_target(self):
        cond = Conditioning(id=3, vector=np.zeros(5))
        back = unpack_conditioning(pack_conditioning(cond)[4:])
        assert back.id == 3 and back.target is None

    def test_trailing_bytes_rejected(self):
        tiles = np.zeros((1, 2, 2, 1), dtype=np.float32)
        payload = pack_batch(MAGIC_REQUEST, tiles, [5], [1])[4:] + b"xx"
        with pytest.raises(BackendError):
            unpack_batch(payload)

    def test_backend_address_parsing(self):
        assert parse_backend_address("localhost:9000") == ("localhost", 9000)
        with pytest.raises(BackendError):
            parse_backend_address("nonsense")


@pytest.fixture
def served_backend(lcm_schedule):
    server = DenoiseServer(("127.0.0.1", 0), AnalyticDenoiser(lcm_schedule))
    server.serve_in_background()
    yield server.server_address, lcm_schedule
    server.shutdown()
    server.server_close()


class TestRemoteBackend:
    def test_round_trip_is_bit_identical(self, served_backend):
        (host, port), schedule = served_backend
        rng_ = np.random.default_rng(2)
        target32 = rng_.standard_normal((8, 8, 4)).astype(np.float32)
        tiles32 = rng_.standard_normal((2, 8, 8, 4)).astype(np.float32)
        req = DenoiseRequest(
            tiles=tiles32.astype(np.float64),
            timesteps=np.array([999, 400]),
            conditioning_ids=np.array([1, 1]),
        )

        local = AnalyticDenoiser(schedule)
        local.register(Conditioning(id=1, vector=np.zeros(3), target=target32.astype(np.float64)))
        expected = local.predict_noise(req).astype(np.float32)

        client = RemoteDenoiser(host, port)
        try:
            client.register(Conditioning(id=1, vector=np.zeros(3), target=target32))
            remote = client.predict_noise(req)
        finally:
            client.close()
        np.testing.assert_array_equal(remote.astype(np.float32), expected)

    def test_unknown_magic_drops_connection_but_not_server(self, served_backend):
        (host, port), schedule = served_backend
        with socket.create_connection((host, port), timeout=5.0) as sock:
            write_frame(sock, b"BOGUS-FRAME")
            sock.settimeout(2.0)
            assert sock.recv(16) == b""  # server closed this connection

        # Server still answers fresh connections.
        client = RemoteDenoiser(host, port)
        try:
            client.register(
                Conditioning(id=1, vector=np.zeros(3), target=np.zeros(4, dtype=np.float32))
            )
            out = client.predict_noise(
                DenoiseRequest(
                    tiles=np.zeros((1, 2, 2, 4)),
                    timesteps=np.array([500]),
                    conditioning_ids=np.array([1]),
                )
            )
            assert out.shape == (1, 2, 2, 4)
        finally:
            client.close()

    def test_response_magic(self, served_backend):
        (host, port), _ = served_backend
        with socket.create_connection((host, port), timeout=5.0) as sock:
            write_frame(
                sock,
                pack_conditioning(
                    Conditioning(id=9, vector=np.zeros(2), target=np.zeros(4, dtype=np.float32))
                ),
            )
            tiles = np.zeros((1, 2, 2, 4), dtype=np.float32)
            write_frame(sock, pack_batch(MAGIC_REQUEST, tiles, [100], [9]))
            from streampaint.wire import read_frame

            payload = read_frame(sock)
            assert payload is not None and payload[:4] == MAGIC_RESPONSE
