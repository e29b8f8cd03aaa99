"""Connections, the blocking request/reply client, and throughput probes.

Two interchangeable substrates carry frames between the orchestrator and an
engine server:

  * a TCP loopback socket (used by subprocess engines), and
  * an in-process queue pair (used by engines running in worker threads).

Both move fully encoded wire frames, so codec cost is paid on either path
and throughput numbers are comparable. Every connection serves exactly one
requester with at most one outstanding request.
"""

from __future__ import annotations

import socket
import threading
import time
from collections import deque
from dataclasses import dataclass
from queue import Empty, Queue
from typing import Callable, Optional

from .datapacks import CameraFrame, DataPack
from .errors import ConnectionClosed, RemoteError, RequestTimeout
from .wire import (
    Codec,
    ErrorReply,
    FrameSplitter,
    Message,
    SetDataPacks,
    SetDataPacksAck,
    Shutdown,
    ShutdownAck,
    decode_message,
    encode_message,
)

__all__ = [
    "Connection",
    "EngineClient",
    "QueueConnection",
    "SocketConnection",
    "ThroughputResult",
    "dial",
    "free_port",
    "measure_throughput",
    "queue_pair",
]

# Bytes moved per codec are reported to a callable (codec, nbytes).
ByteCounter = Callable[[Codec, int], None]


class Connection:
    """Frame pipe interface; implementations are not thread-safe."""

    def send_frame(self, frame: bytes) -> None:
        raise NotImplementedError

    def recv_frame(self, timeout: Optional[float] = None) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


_CLOSE = None  # queue sentinel


class QueueConnection(Connection):
    def __init__(self, inbox: Queue, outbox: Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False
        self._peer_closed = False

    def send_frame(self, frame: bytes) -> None:
        if self._closed or self._peer_closed:
            raise ConnectionClosed("connection is closed")
        self._outbox.put(frame)

    def recv_frame(self, timeout: Optional[float] = None) -> bytes:
        if self._closed:
            raise ConnectionClosed("connection is closed")
        if self._peer_closed:
            raise ConnectionClosed("peer closed the connection")
        try:
            item = self._inbox.get(timeout=timeout)
        except Empty:
            raise RequestTimeout(f"no frame within {timeout} s") from None
        if item is _CLOSE:
            self._peer_closed = True
            raise ConnectionClosed("peer closed the connection")
        return item

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(_CLOSE)


def queue_pair() -> tuple[QueueConnection, QueueConnection]:
    """Two connected in-process endpoints (left, right)."""
    a: Queue = Queue()
    b: Queue = Queue()
    return QueueConnection(a, b), QueueConnection(b, a)


class SocketConnection(Connection):
    def __init__(self, sock: socket.socket):
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock
        self._splitter = FrameSplitter()
        self._frames: deque[bytes] = deque()
        self._closed = False

    def send_frame(self, frame: bytes) -> None:
        if self._closed:
            raise ConnectionClosed("connection is closed")
        try:
            self._sock.sendall(frame)
        except (BrokenPipeError, ConnectionResetError, OSError) as exc:
            raise ConnectionClosed(str(exc)) from None

    def recv_frame(self, timeout: Optional[float] = None) -> bytes:
        if self._closed:
            raise ConnectionClosed("connection is closed")
        deadline = None if timeout is None else time.monotonic() + timeout
        while not self._frames:
            if deadline is None:
                self._sock.settimeout(None)
            else:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise RequestTimeout(f"no frame within {timeout} s")
                self._sock.settimeout(remaining)
            try:
                data = self._sock.recv(1 << 20)
            except socket.timeout:
                raise RequestTimeout(f"no frame within {timeout} s") from None
            except (ConnectionResetError, OSError) as exc:
                raise ConnectionClosed(str(exc)) from None
            if not data:
                raise ConnectionClosed("peer closed the connection")
            self._frames.extend(self._splitter.feed(data))
        return self._frames.popleft()

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()


def dial(host: str, port: int, timeout: float = 5.0) -> SocketConnection:
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    return SocketConnection(sock)


def free_port(host: str = "127.0.0.1") -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind((host, 0))
        return sock.getsockname()[1]


class EngineClient:
    """Strict request/reply client over one connection.

    `timeout` follows the engine command timeout convention: 0 means wait
    forever. An ErrorReply from the peer raises RemoteError.
    """

    def __init__(self, conn: Connection, codec: Codec, timeout: float = 0.0,
                 byte_counter: Optional[ByteCounter] = None):
        self._conn = conn
        self.codec = codec
        self.timeout = timeout
        self._count = byte_counter

    def request(self, msg: Message, timeout: Optional[float] = None) -> Message:
        frame = encode_message(msg, self.codec)
        if self._count is not None:
            self._count(self.codec, len(frame))
        self._conn.send_frame(frame)
        effective = self.timeout if timeout is None else timeout
        reply_frame = self._conn.recv_frame(None if effective == 0 else effective)
        if self._count is not None:
            self._count(self.codec, len(reply_frame))
        reply = decode_message(reply_frame, self.codec)
        if isinstance(reply, ErrorReply):
            raise RemoteError(reply.code, reply.message)
        return reply

    def close(self) -> None:
        self._conn.close()


# --- throughput probe ----------------------------------------------------------

@dataclass(frozen=True)
class ThroughputResult:
    codec: Codec
    payload_bytes: int
    frame_bytes: int
    iterations: int
    elapsed_s: float
    bytes_per_sec: float
    round_trips_per_sec: float


def _echo_server(sock: socket.socket, codec: Codec) -> None:
    conn_sock, _ = sock.accept()
    conn = SocketConnection(conn_sock)
    try:
        while True:
            try:
                frame = conn.recv_frame(None)
            except ConnectionClosed:
                return
            msg = decode_message(frame, codec)
            if isinstance(msg, Shutdown):
                conn.send_frame(encode_message(ShutdownAck(), codec))
                return
            if isinstance(msg, SetDataPacks):
                conn.send_frame(encode_message(SetDataPacksAck(), codec))
            else:
                conn.send_frame(encode_message(
                    ErrorReply("BAD_REQUEST", "echo server only accepts SetDataPacks"),
                    codec,
                ))
    finally:
        conn.close()
        sock.close()


def synthetic_frame(payload_bytes: int) -> CameraFrame:
    """A camera frame whose pixel buffer has exactly the requested size."""
    if payload_bytes < 0:
        raise ValueError("payload_bytes must be >= 0")
    depth = 3 if payload_bytes % 3 == 0 else 1
    width = payload_bytes // depth
    data = bytes(i & 0xFF for i in range(payload_bytes))
    return CameraFrame(1, width, depth, data)


def measure_throughput(codec: Codec, payload_bytes: int,
                       iterations: int) -> ThroughputResult:
    """Time SetDataPacks echo round trips through a TCP loopback server.

    bytes_per_sec counts the pixel payload carried per second, so the two
    codecs are compared on useful data moved, not on their own framing
    overhead; frame_bytes reports what actually crossed the wire per
    request. round_trips_per_sec counts completed request/ack pairs.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    server_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server_sock.bind(("127.0.0.1", 0))
    server_sock.listen(1)
    port = server_sock.getsockname()[1]
    server = threading.Thread(target=_echo_server, args=(server_sock, codec),
                              daemon=True)
    server.start()

    pack = DataPack.of("frame", "echo", synthetic_frame(payload_bytes))
    msg = SetDataPacks((pack,))
    frame_bytes = len(encode_message(msg, codec))

    client = EngineClient(dial("127.0.0.1", port), codec, timeout=30.0)
    try:
        client.request(msg)  # warm-up round trip, not timed
        start = time.perf_counter()
        for _ in range(iterations):
            reply = client.request(msg)
            if not isinstance(reply, SetDataPacksAck):
                raise RemoteError("BAD_REPLY", f"unexpected echo reply {reply!r}")
        elapsed = time.perf_counter() - start
        client.request(Shutdown())
    finally:
        client.close()
    server.join(timeout=5.0)

    elapsed = max(elapsed, 1e-9)
    return ThroughputResult(
        codec=codec,
        payload_bytes=payload_bytes,
        frame_bytes=frame_bytes,
        iterations=iterations,
        elapsed_s=elapsed,
        bytes_per_sec=iterations * payload_bytes / elapsed,
        round_trips_per_sec=iterations / elapsed,
    )
