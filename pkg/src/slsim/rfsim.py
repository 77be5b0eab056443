"""Software RF board: channel impairments and an IQ-sample exchange between
device processes, over TCP sockets or in-process queues.

One relay serves exactly two endpoints.  Each direction owns an independent
channel state (delay line, oscillator phase, noise generator), so a fixed
(input, model, seed) triple reproduces bit-identical sample streams across
runs and across transports.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
from dataclasses import dataclass

import numpy as np

FRAME_MAGIC = 0x534C4951
_HEADER = struct.Struct("<IIQ")  # magic, sample_count, timestamp


class LinkError(RuntimeError):
    """Raised on malformed frames or broken sessions."""


@dataclass(frozen=True)
class ChannelModel:
    """Impairment description for one link direction.

    Exactly one noise mode may be active: ``snr_db`` calibrates noise
    against the post-attenuation power of each processed block, while
    ``noise_floor_dbfs`` applies a fixed per-sample noise power.
    """

    attenuation_db: float = 0.0
    snr_db: float | None = None
    noise_floor_dbfs: float | None = None
    cfo_hz: float = 0.0
    delay_samples: int = 0
    clip_level: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.snr_db is not None and self.noise_floor_dbfs is not None:
            raise ValueError("choose either calibrated-SNR or fixed-noise-floor mode")
        if self.delay_samples < 0:
            raise ValueError("delay must be non-negative")
        if self.clip_level is not None and self.clip_level <= 0:
            raise ValueError("clip level must be positive")


class Channel:
    """Stateful sample-stream transform for one direction of a link."""

    def __init__(self, model: ChannelModel, sample_rate: float, seed: int | None = None):
        self.model = model
        self.sample_rate = sample_rate
        self._rng = np.random.default_rng(model.seed if seed is None else seed)
        self._delay_line = np.zeros(model.delay_samples, dtype=np.complex128)
        self._sample_index = 0  # carries oscillator phase across frames

    def process(self, samples: np.ndarray) -> np.ndarray:
        """Apply delay, attenuation, frequency offset, noise, and clipping."""
        x = np.asarray(samples, dtype=np.complex128)
        m = self.model
        if m.delay_samples:
            joined = np.concatenate([self._delay_line, x])
            x = joined[:x.size]
            self._delay_line = joined[x.size:]
        x = x * 10.0 ** (-m.attenuation_db / 20.0)
        if m.cfo_hz:
            n = np.arange(self._sample_index, self._sample_index + x.size)
            x = x * np.exp(2j * np.pi * m.cfo_hz * n / self.sample_rate)
        self._sample_index += x.size
        if m.snr_db is not None:
            power = np.mean(np.abs(x) ** 2)
            if power > 0:
                x = x + self._noise(x.size, power * 10.0 ** (-m.snr_db / 10.0))
        elif m.noise_floor_dbfs is not None:
            x = x + self._noise(x.size, 10.0 ** (m.noise_floor_dbfs / 10.0))
        if m.clip_level is not None:
            c = m.clip_level
            x = np.clip(x.real, -c, c) + 1j * np.clip(x.imag, -c, c)
        return x

    def _noise(self, n: int, power: float) -> np.ndarray:
        scale = np.sqrt(power / 2.0)
        return scale * (self._rng.standard_normal(n) + 1j * self._rng.standard_normal(n))


def direction_seeds(model: ChannelModel) -> tuple[int, int]:
    """Independent per-direction noise seeds derived from the model seed."""
    children = np.random.SeedSequence(model.seed).spawn(2)
    return (int(children[0].generate_state(1)[0]), int(children[1].generate_state(1)[0]))


def pack_frame(samples: np.ndarray, timestamp: int) -> bytes:
    """Wire-encode one block: 16-byte header plus float32 I/Q pairs."""
    samples = np.asarray(samples, dtype=np.complex128)
    payload = np.empty(2 * samples.size, dtype="<f4")
    payload[0::2] = samples.real
    payload[1::2] = samples.imag
    return _HEADER.pack(FRAME_MAGIC, samples.size, timestamp) + payload.tobytes()


def unpack_frame(data: bytes) -> tuple[np.ndarray, int]:
    magic, count, timestamp = _HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise LinkError(f"bad frame magic 0x{magic:08X}")
    raw = np.frombuffer(data, dtype="<f4", offset=_HEADER.size, count=2 * count)
    return (raw[0::2] + 1j * raw[1::2]).astype(np.complex128), timestamp


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    got = 0
    while got < n:
        piece = sock.recv(n - got)
        if not piece:
            return None
        chunks.append(piece)
        got += len(piece)
    return b"".join(chunks)


def _read_frame(sock: socket.socket) -> tuple[np.ndarray, int] | None:
    header = _read_exact(sock, _HEADER.size)
    if header is None:
        return None
    magic, count, timestamp = _HEADER.unpack(header)
    if magic != FRAME_MAGIC:
        raise LinkError(f"bad frame magic 0x{magic:08X}")
    payload = _read_exact(sock, 8 * count)
    if payload is None:
        return None
    raw = np.frombuffer(payload, dtype="<f4")
    return (raw[0::2] + 1j * raw[1::2]).astype(np.complex128), timestamp


class RfSimServer:
    """TCP relay applying the channel model between exactly two endpoints."""

    def __init__(self, model: ChannelModel, sample_rate: float,
                 host: str = "127.0.0.1", port: int = 0):
        self.model = model
        self.sample_rate = sample_rate
        self._listener = socket.create_server((host, port))
        self._threads: list[threading.Thread] = []
        self._clients: list[socket.socket] = []
        self._accept_thread: threading.Thread | None = None
        self._closed = threading.Event()

    @property
    def endpoint(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def start(self) -> "RfSimServer":
        self._accept_thread = threading.Thread(target=self._accept_two, daemon=True)
        self._accept_thread.start()
        return self

    def _accept_two(self) -> None:
        try:
            while len(self._clients) < 2 and not self._closed.is_set():
                client, _ = self._listener.accept()
                client.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self._clients.append(client)
        except OSError:
            return
        if self._closed.is_set():
            return
        seeds = direction_seeds(self.model)
        a, b = self._clients
        for src, dst, seed in ((a, b, seeds[0]), (b, a, seeds[1])):
            t = threading.Thread(target=self._relay, args=(src, dst, seed), daemon=True)
            t.start()
            self._threads.append(t)
        # any further connection attempt is refused
        refuser = threading.Thread(target=self._refuse_extras, daemon=True)
        refuser.start()

    def _refuse_extras(self) -> None:
        while not self._closed.is_set():
            try:
                extra, _ = self._listener.accept()
            except OSError:
                return
            extra.close()

    def _relay(self, src: socket.socket, dst: socket.socket, seed: int) -> None:
        channel = Channel(self.model, self.sample_rate, seed=seed)
        try:
            while True:
                frame = _read_frame(src)
                if frame is None:
                    break
                samples, timestamp = frame
                out = channel.process(samples)
                dst.sendall(pack_frame(out, timestamp))
        except (LinkError, OSError):
            pass
        finally:
            try:
                dst.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    def close(self) -> None:
        self._closed.set()
        self._listener.close()
        for c in self._clients:
            try:
                c.close()
            except OSError:
                pass


class SocketEndpoint:
    """Client side of a relayed link."""

    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port))
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def send(self, samples: np.ndarray, timestamp: int) -> None:
        self._sock.sendall(pack_frame(samples, timestamp))

    def recv(self) -> tuple[np.ndarray, int] | None:
        """Next frame, or None once the peer is gone."""
        return _read_frame(self._sock)

    def close_send(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass

    def close(self) -> None:
        self._sock.close()


class _InprocEndpoint:
    def __init__(self, tx_channel: Channel, tx_queue: queue.SimpleQueue,
                 rx_queue: queue.SimpleQueue):
        self._channel = tx_channel
        self._tx = tx_queue
        self._rx = rx_queue

    def send(self, samples: np.ndarray, timestamp: int) -> None:
        # wire round trips before and after the channel replicate the float32
        # quantization of the socket path, keeping transports bit-identical
        quantized, _ = unpack_frame(pack_frame(samples, timestamp))
        out = self._channel.process(quantized)
        self._tx.put(unpack_frame(pack_frame(out, timestamp)))

    def recv(self) -> tuple[np.ndarray, int] | None:
        return self._rx.get()

    def close_send(self) -> None:
        self._tx.put(None)

    def close(self) -> None:
        pass


def inproc_link(model: ChannelModel, sample_rate: float
                ) -> tuple[_InprocEndpoint, _InprocEndpoint]:
    """Socket-free link with identical channel semantics to the TCP relay.

    Returns endpoints (a, b); the a->b direction uses the first derived
    seed, matching the first-connected client of the socket server.
    """
    seeds = direction_seeds(model)
    q_ab: queue.SimpleQueue = queue.SimpleQueue()
    q_ba: queue.SimpleQueue = queue.SimpleQueue()
    a = _InprocEndpoint(Channel(model, sample_rate, seed=seeds[0]), q_ab, q_ba)
    b = _InprocEndpoint(Channel(model, sample_rate, seed=seeds[1]), q_ba, q_ab)
    return a, b
