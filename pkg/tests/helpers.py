"""Shared test plumbing: a server-in-a-thread and tiny blocking clients."""

from __future__ import annotations

import asyncio
import base64
import hashlib
import os
import socket
import struct
import threading
import time

from aimcast.protocol import Hello, Role, WireMessage, decode, encode
from aimcast.server import PointerServer, ServerConfig

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class ServerThread:
    """Run a PointerServer on its own event loop in a daemon thread."""

    def __init__(self, config: ServerConfig | None = None, static_dir=None):
        self._config = config or ServerConfig()
        self._static_dir = static_dir
        self.tcp_port: int | None = None
        self.http_port: int | None = None
        self.server: PointerServer | None = None
        self.loop: asyncio.AbstractEventLoop | None = None

    def __enter__(self) -> "ServerThread":
        self._ready = threading.Event()
        self._thread = threading.Thread(target=self._main, daemon=True)
        self._thread.start()
        if not self._ready.wait(10):
            raise RuntimeError("server thread failed to start")
        return self

    def _main(self) -> None:
        asyncio.run(self._amain())

    async def _amain(self) -> None:
        self.server = PointerServer(config=self._config, static_dir=self._static_dir)
        await self.server.start()
        self.tcp_port = self.server.tcp_port
        self.http_port = self.server.http_port
        self.loop = asyncio.get_running_loop()
        self._stop = asyncio.Event()
        self._ready.set()
        await self._stop.wait()
        await self.server.stop()

    def __exit__(self, *exc) -> None:
        self.loop.call_soon_threadsafe(self._stop.set)
        self._thread.join(10)


def _recvall(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


class TcpClient:
    """Blocking native client speaking the length-prefixed TCP framing."""

    def __init__(self, port: int, role: Role | None = None, timeout: float = 5.0):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=timeout)
        self.config = None
        if role is not None:
            self.send(Hello(role))
            self.config = self.read()

    def send(self, message: WireMessage) -> None:
        self.send_payload(encode(message))

    def send_payload(self, payload: bytes) -> None:
        self.sock.sendall(struct.pack(">H", len(payload)) + payload)

    def read(self) -> WireMessage | None:
        """One decoded message, or None once the server closes."""
        header = _recvall(self.sock, 2)
        if header is None:
            return None
        (length,) = struct.unpack(">H", header)
        payload = _recvall(self.sock, length)
        if payload is None:
            return None
        return decode(payload)

    def read_until(self, pred, timeout: float = 5.0) -> WireMessage:
        """Read messages until pred matches one; raises on close/timeout."""
        deadline = time.monotonic() + timeout
        while True:
            self.sock.settimeout(max(0.05, deadline - time.monotonic()))
            msg = self.read()
            if msg is None:
                raise AssertionError("connection closed while waiting")
            if pred(msg):
                return msg
            if time.monotonic() > deadline:
                raise AssertionError("timed out waiting for message")

    def closed_by_server(self, timeout: float = 5.0) -> bool:
        self.sock.settimeout(timeout)
        try:
            return self.read() is None
        except (TimeoutError, socket.timeout):
            return False

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class WsClient:
    """Minimal RFC 6455 client: masked binary frames, one message each."""

    def __init__(self, port: int, role: Role | None = None, path: str = "/ws",
                 timeout: float = 5.0):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=timeout)
        key = base64.b64encode(os.urandom(16)).decode()
        self.sock.sendall(
            (f"GET {path} HTTP/1.1\r\nHost: 127.0.0.1\r\nUpgrade: websocket\r\n"
             f"Connection: Upgrade\r\nSec-WebSocket-Key: {key}\r\n"
             f"Sec-WebSocket-Version: 13\r\n\r\n").encode())
        head = self._read_head()
        if b" 101 " not in head.splitlines()[0] + b" ":
            raise AssertionError(f"upgrade refused: {head!r}")
        want = base64.b64encode(hashlib.sha1((key + WS_GUID).encode()).digest())
        if want not in head:
            raise AssertionError("bad Sec-WebSocket-Accept")
        self.config = None
        if role is not None:
            self.send(Hello(role))
            self.config = self.read()

    def _read_head(self) -> bytes:
        head = b""
        while b"\r\n\r\n" not in head:
            chunk = self.sock.recv(1024)
            if not chunk:
                raise AssertionError("closed during upgrade")
            head += chunk
        return head

    def send_frame(self, payload: bytes, opcode: int = 0x2, masked: bool = True) -> None:
        first = 0x80 | opcode
        length = len(payload)
        if length < 126:
            header = bytes([first, (0x80 if masked else 0) | length])
        else:
            header = bytes([first, (0x80 if masked else 0) | 126]) + struct.pack(">H", length)
        if masked:
            key = os.urandom(4)
            body = key + bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        else:
            body = payload
        self.sock.sendall(header + body)

    def send(self, message: WireMessage) -> None:
        self.send_frame(encode(message))

    def read_frame(self) -> tuple[int, bytes] | None:
        header = _recvall(self.sock, 2)
        if header is None:
            return None
        opcode = header[0] & 0x0F
        length = header[1] & 0x7F
        if length == 126:
            (length,) = struct.unpack(">H", _recvall(self.sock, 2))
        elif length == 127:
            (length,) = struct.unpack(">Q", _recvall(self.sock, 8))
        payload = _recvall(self.sock, length) if length else b""
        return opcode, payload

    def read(self) -> WireMessage | None:
        """Next binary message; control frames are skipped."""
        while True:
            frame = self.read_frame()
            if frame is None:
                return None
            opcode, payload = frame
            if opcode == 0x2:
                return decode(payload)
            if opcode == 0x8:
                return None

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def http_get(port: int, path: str, timeout: float = 5.0) -> tuple[int, bytes]:
    with socket.create_connection(("127.0.0.1", port), timeout=timeout) as sock:
        sock.sendall(f"GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n".encode())
        data = b""
        while True:
            chunk = sock.recv(65536)
            if not chunk:
                break
            data += chunk
    head, _, body = data.partition(b"\r\n\r\n")
    status = int(head.split(b" ", 2)[1])
    return status, body


def metrics_dict(port: int) -> dict[str, str]:
    status, body = http_get(port, "/metrics")
    assert status == 200, body
    out = {}
    for line in body.decode().splitlines():
        if line.strip():
            key, _, value = line.partition(" ")
            out[key] = value
    return out


def wait_until(pred, timeout: float = 5.0, interval: float = 0.02):
    """Poll pred until truthy; returns its value or raises."""
    deadline = time.monotonic() + timeout
    while True:
        value = pred()
        if value:
            return value
        if time.monotonic() > deadline:
            raise AssertionError("condition not reached in time")
        time.sleep(interval)
