"""Framed duplex transports.

Every message travels as a frame: a 4-byte big-endian unsigned length
followed by that many bytes of canonical-form JSON.  Two interchangeable
implementations share the contract:

* TCP sockets, for real distributed runs.
* An in-process network simulator, for deterministic tests.  It keeps a
  registry of who-connected-to-whom so the star-topology property (clients
  talk only to the server) can be asserted structurally, and it can tap the
  raw frames each endpoint receives.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
from dataclasses import dataclass, field

from .errors import ProtocolError

FRAME_HEADER = struct.Struct(">I")
MAX_FRAME_BYTES = 16 * 1024 * 1024


def encode_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds maximum", code="frame_too_large")
    return FRAME_HEADER.pack(len(payload)) + payload


class ConnectionClosed(ProtocolError):
    def __init__(self, message: str = "connection closed"):
        super().__init__(message, code="closed")


class TcpConnection:
    """One framed duplex stream over a TCP socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._send_lock = threading.Lock()
        self._recv_buffer = b""

    def send_frame(self, payload: bytes) -> None:
        data = encode_frame(payload)
        with self._send_lock:
            try:
                self._sock.sendall(data)
            except OSError as exc:
                raise ConnectionClosed(f"send failed: {exc}") from exc

    def _recv_exact(self, n: int, timeout: float | None) -> bytes:
        self._sock.settimeout(timeout)
        chunks = []
        remaining = n
        while remaining > 0:
            try:
                chunk = self._sock.recv(remaining)
            except socket.timeout as exc:
                raise ProtocolError("receive timed out", code="timeout") from exc
            except OSError as exc:
                raise ConnectionClosed(f"recv failed: {exc}") from exc
            if not chunk:
                raise ConnectionClosed()
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def recv_frame(self, timeout: float | None = None) -> bytes:
        header = self._recv_exact(FRAME_HEADER.size, timeout)
        (length,) = FRAME_HEADER.unpack(header)
        if length > MAX_FRAME_BYTES:
            raise ProtocolError(f"frame length {length} exceeds maximum", code="frame_too_large")
        return self._recv_exact(length, timeout)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class TcpListener:
    def __init__(self, host: str, port: int):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(16)
        self.address = self._sock.getsockname()

    def accept(self, timeout: float | None = None) -> TcpConnection:
        self._sock.settimeout(timeout)
        try:
            sock, _ = self._sock.accept()
        except socket.timeout as exc:
            raise ProtocolError("accept timed out", code="timeout") from exc
        except OSError as exc:
            raise ConnectionClosed(f"listener closed: {exc}") from exc
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return TcpConnection(sock)

    def close(self) -> None:
        self._sock.close()


def tcp_connect(host: str, port: int, timeout: float = 5.0) -> TcpConnection:
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise ConnectionClosed(f"connection to {host}:{port} refused: {exc}") from exc
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    sock.settimeout(None)
    return TcpConnection(sock)


# --- In-process network simulator --------------------------------------------


class _QueueEndpoint:
    """One side of an in-process duplex pipe carrying encoded frames."""

    def __init__(self, inbox: "queue.Queue[bytes | None]", outbox: "queue.Queue[bytes | None]",
                 node: str, peer: str, network: "LocalNetwork"):
        self._inbox = inbox
        self._outbox = outbox
        self.node = node
        self.peer = peer
        self._network = network
        self._closed = False

    def send_frame(self, payload: bytes) -> None:
        if self._closed:
            raise ConnectionClosed()
        # Frames are really encoded/decoded so byte-level behavior matches TCP.
        self._outbox.put(encode_frame(payload))

    def recv_frame(self, timeout: float | None = None) -> bytes:
        try:
            data = self._inbox.get(timeout=timeout)
        except queue.Empty as exc:
            raise ProtocolError("receive timed out", code="timeout") from exc
        if data is None:
            raise ConnectionClosed()
        (length,) = FRAME_HEADER.unpack(data[: FRAME_HEADER.size])
        payload = data[FRAME_HEADER.size:]
        if length != len(payload):
            raise ProtocolError("corrupt frame", code="corrupt_frame")
        self._network.record_frame(self.node, payload)
        return payload

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(None)


class LocalListener:
    def __init__(self, network: "LocalNetwork", address: str):
        self._network = network
        self.address = address
        self._pending: "queue.Queue[_QueueEndpoint]" = queue.Queue()
        self._closed = False

    def accept(self, timeout: float | None = None) -> _QueueEndpoint:
        try:
            conn = self._pending.get(timeout=timeout)
        except queue.Empty as exc:
            raise ProtocolError("accept timed out", code="timeout") from exc
        return conn

    def close(self) -> None:
        self._closed = True
        self._network.unbind(self.address)


@dataclass
class LocalNetwork:
    """Registry of in-process listeners plus connection-graph bookkeeping."""

    _listeners: dict[str, LocalListener] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    edges: list[tuple[str, str]] = field(default_factory=list)
    _taps: dict[str, list[bytes]] = field(default_factory=dict)
    _node_counter: int = 0

    def listen(self, address: str) -> LocalListener:
        with self._lock:
            if address in self._listeners:
                raise ProtocolError(f"address {address!r} already bound", code="address_in_use")
            listener = LocalListener(self, address)
            self._listeners[address] = listener
            return listener

    def unbind(self, address: str) -> None:
        with self._lock:
            self._listeners.pop(address, None)

    def connect(self, address: str, node: str | None = None) -> _QueueEndpoint:
        with self._lock:
            listener = self._listeners.get(address)
            if listener is None or listener._closed:
                raise ConnectionClosed(f"connection to {address!r} refused")
            if node is None:
                self._node_counter += 1
                node = f"client-{self._node_counter}"
            self.edges.append((node, address))
        a_to_b: "queue.Queue[bytes | None]" = queue.Queue()
        b_to_a: "queue.Queue[bytes | None]" = queue.Queue()
        client_end = _QueueEndpoint(b_to_a, a_to_b, node=node, peer=address, network=self)
        server_end = _QueueEndpoint(a_to_b, b_to_a, node=address, peer=node, network=self)
        listener._pending.put(server_end)
        return client_end

    def record_frame(self, node: str, payload: bytes) -> None:
        with self._lock:
            if node in self._taps:
                self._taps[node].append(payload)

    def tap(self, node: str) -> list[bytes]:
        """Start capturing every frame delivered to ``node``; returns the live list."""
        with self._lock:
            return self._taps.setdefault(node, [])

    def connection_graph(self) -> list[tuple[str, str]]:
        with self._lock:
            return list(self.edges)
