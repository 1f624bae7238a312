"""Multi-client pointer server: TCP and WebSocket ingress, display fan-out.

One process hosts one room.  All room mutations happen on the single
asyncio event loop, so connection handlers never race; per-connection
writes go through a bounded queue drained by a dedicated writer task, and
a consumer that lets its queue fill is disconnected rather than allowed
to stall the room.

Transports share the message layer: raw TCP frames each message behind a
2-byte big-endian length prefix; the HTTP port serves static UI files and
``GET /metrics``, and upgrades ``/ws`` to RFC 6455 WebSocket carrying one
message per binary frame.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import heapq
import logging
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import psutil

from .config import ConfigError, load_kv, parse_rgb, reject_unknown, single
from .protocol import (
    BATCH_LIMIT,
    PROTOCOL_VERSION,
    AimUpdate,
    BandwidthCounter,
    ConfigPush,
    FireEvent,
    Hello,
    Ping,
    PointerBatch,
    PointerEntry,
    Pong,
    ProtocolError,
    Role,
    WireMessage,
    decode,
    encode,
    q8_encode,
)

log = logging.getLogger("aimcast.server")

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

#: Upper bound on a single WebSocket frame we are willing to buffer.
WS_MAX_PAYLOAD = 1 << 20

MAX_CLIENT_ID = 65535


class HandshakeTimeout(Exception):
    """No Hello arrived within the handshake window."""


class VersionMismatch(Exception):
    """Hello carried an unsupported protocol version."""


class RoomFull(Exception):
    """All 65536 client ids are in use."""


class RoleViolation(Exception):
    """A client sent a message its role does not permit."""


class IdAllocator:
    """Hands out the lowest free id; freed ids are reused first."""

    def __init__(self, limit: int = MAX_CLIENT_ID + 1):
        self._free: list[int] = []
        self._next = 0
        self._limit = limit

    def alloc(self) -> int:
        if self._free:
            return heapq.heappop(self._free)
        if self._next >= self._limit:
            raise RoomFull(f"all {self._limit} client ids in use")
        value = self._next
        self._next += 1
        return value

    def release(self, client_id: int) -> None:
        heapq.heappush(self._free, client_id)


@dataclass(frozen=True)
class ServerConfig:
    """Room-wide settings; everything here is config-file exposed."""

    screen_w_px: int = 1920
    screen_h_px: int = 1080
    border_frac: float = 0.02
    color_a: tuple[int, int, int] = (255, 0, 255)
    color_b: tuple[int, int, int] = (0, 255, 255)
    broadcast_hz: float = 60.0
    pointer_hz: float = 30.0
    send_queue_limit: int = 64
    handshake_timeout_s: float = 5.0

    def __post_init__(self) -> None:
        if not 1 <= self.broadcast_hz <= 240:
            raise ValueError(f"broadcast_hz must be in [1, 240], got {self.broadcast_hz}")
        if self.pointer_hz <= 0:
            raise ValueError("pointer_hz must be positive")
        if self.send_queue_limit < 1:
            raise ValueError("send_queue_limit must be >= 1")
        if self.handshake_timeout_s <= 0:
            raise ValueError("handshake_timeout_s must be positive")
        if not 0 < self.border_frac < 0.5:
            raise ValueError("border_frac must be in (0, 0.5)")
        if not (0 < self.screen_w_px <= 65535 and 0 < self.screen_h_px <= 65535):
            raise ValueError("screen resolution must fit u16")

    @classmethod
    def from_file(cls, path: str | Path) -> ServerConfig:
        kv = load_kv(path)
        src = str(path)
        known = {
            "screen_w", "screen_h", "border_frac", "color_a", "color_b",
            "broadcast_hz", "pointer_hz", "send_queue_limit", "handshake_timeout",
        }
        reject_unknown(kv, known, src)

        def opt(key: str, default: str) -> str:
            return single(kv, key, src) if key in kv else default

        try:
            return cls(
                screen_w_px=int(opt("screen_w", "1920")),
                screen_h_px=int(opt("screen_h", "1080")),
                border_frac=float(opt("border_frac", "0.02")),
                color_a=parse_rgb(opt("color_a", "255,0,255"), src),
                color_b=parse_rgb(opt("color_b", "0,255,255"), src),
                broadcast_hz=float(opt("broadcast_hz", "60")),
                pointer_hz=float(opt("pointer_hz", "30")),
                send_queue_limit=int(opt("send_queue_limit", "64")),
                handshake_timeout_s=float(opt("handshake_timeout", "5.0")),
            )
        except ValueError as exc:
            raise ConfigError(f"{src}: {exc}") from exc

    def config_push(self) -> ConfigPush:
        return ConfigPush(
            screen_w_px=self.screen_w_px,
            screen_h_px=self.screen_h_px,
            border_frac_q8=q8_encode(self.border_frac),
            color_a=self.color_a,
            color_b=self.color_b,
        )


class Connection:
    """One transport connection with framed sends through a bounded queue."""

    def __init__(
        self,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        framing: str,
        queue_limit: int,
    ):
        assert framing in ("tcp", "ws")
        self._reader = reader
        self._writer = writer
        self.framing = framing
        self._queue: asyncio.Queue[bytes | None] = asyncio.Queue(maxsize=queue_limit)
        self._closed = False
        self._writer_task = asyncio.create_task(self._drain_queue())

    @property
    def peer(self) -> str:
        try:
            info = self._writer.get_extra_info("peername")
            return f"{info[0]}:{info[1]}" if info else "?"
        except Exception:
            return "?"

    # -- receiving ---------------------------------------------------------

    async def recv(self) -> bytes | None:
        """Next message payload, or None once the connection is done."""
        try:
            if self.framing == "tcp":
                return await self._recv_tcp()
            return await self._recv_ws()
        except (asyncio.IncompleteReadError, ConnectionError, OSError):
            return None

    async def _recv_tcp(self) -> bytes:
        header = await self._reader.readexactly(2)
        (length,) = struct.unpack(">H", header)
        return await self._reader.readexactly(length)

    async def _recv_ws(self) -> bytes | None:
        # control frames are handled inline; loop until a data frame arrives
        while True:
            b1, b2 = await self._reader.readexactly(2)
            fin = b1 & 0x80
            opcode = b1 & 0x0F
            masked = b2 & 0x80
            length = b2 & 0x7F
            if length == 126:
                (length,) = struct.unpack(">H", await self._reader.readexactly(2))
            elif length == 127:
                (length,) = struct.unpack(">Q", await self._reader.readexactly(8))
            if length > WS_MAX_PAYLOAD:
                return None
            mask = await self._reader.readexactly(4) if masked else b""
            payload = await self._reader.readexactly(length)
            if masked:
                payload = bytes(c ^ mask[i % 4] for i, c in enumerate(payload))
            if opcode == 0x2:
                # one protocol message per frame; no fragmentation support
                if not fin or not masked:
                    return None
                return payload
            if opcode == 0x8:
                self._enqueue_or_drop(b"", opcode=0x8)
                return None
            if opcode == 0x9:
                self._enqueue_or_drop(payload, opcode=0xA)
                continue
            if opcode == 0xA:
                continue
            return None  # text or unknown opcode: not part of this protocol

    # -- sending -----------------------------------------------------------

    def send(self, payload: bytes) -> bool:
        """Queue one message; False means the consumer is too slow."""
        return self._enqueue_or_drop(payload, opcode=0x2)

    def _enqueue_or_drop(self, payload: bytes, opcode: int) -> bool:
        if self._closed:
            return False
        try:
            self._queue.put_nowait(self._frame(payload, opcode))
            return True
        except asyncio.QueueFull:
            return False

    def _frame(self, payload: bytes, opcode: int) -> bytes:
        if self.framing == "tcp":
            return struct.pack(">H", len(payload)) + payload
        n = len(payload)
        if n < 126:
            header = struct.pack(">BB", 0x80 | opcode, n)
        elif n < 1 << 16:
            header = struct.pack(">BBH", 0x80 | opcode, 126, n)
        else:
            header = struct.pack(">BBQ", 0x80 | opcode, 127, n)
        return header + payload

    async def _drain_queue(self) -> None:
        try:
            while True:
                frame = await self._queue.get()
                if frame is None:
                    break
                self._writer.write(frame)
                await self._writer.drain()
        except (ConnectionError, OSError, asyncio.CancelledError):
            pass

    async def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._writer_task.cancel()
        try:
            await self._writer_task
        except asyncio.CancelledError:
            pass
        try:
            self._writer.close()
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass


@dataclass
class ClientState:
    """Server-side record for one connected client."""

    id: int
    role: Role
    conn: Connection
    bandwidth: BandwidthCounter
    connected_at: float
    last_aim: AimUpdate | None = None
    fire_count: int = 0


@dataclass
class RoomState:
    """The single room: its config and every live client."""

    config: ServerConfig
    clients: dict[int, ClientState] = field(default_factory=dict)
    ids: IdAllocator = field(default_factory=IdAllocator)
    started_at: float = field(default_factory=time.monotonic)
    decode_errors: int = 0
    fires_total: int = 0
    bytes_in_total: int = 0
    bytes_out_total: int = 0

    def displays(self) -> list[ClientState]:
        return [c for c in self.clients.values() if c.role is Role.DISPLAY]


def _chunked(entries: list[PointerEntry], size: int) -> list[list[PointerEntry]]:
    return [entries[i : i + size] for i in range(0, len(entries), size)]


class PointerServer:
    """The long-running service; start() binds, stop() tears down."""

    def __init__(
        self,
        config: ServerConfig | None = None,
        tcp_port: int = 0,
        http_port: int = 0,
        host: str = "127.0.0.1",
        static_dir: str | Path | None = None,
    ):
        self.config = config or ServerConfig()
        self.room = RoomState(self.config)
        self._want_tcp_port = tcp_port
        self._want_http_port = http_port
        self._host = host
        self.static_dir = Path(static_dir) if static_dir else None
        self.tcp_port: int | None = None
        self.http_port: int | None = None
        self._tcp_server: asyncio.AbstractServer | None = None
        self._http_server: asyncio.AbstractServer | None = None
        self._broadcast_task: asyncio.Task | None = None
        self._conn_tasks: set[asyncio.Task] = set()

    # -- lifecycle ----------------------------------------------------------

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(
            self._handle_tcp, self._host, self._want_tcp_port
        )
        self._http_server = await asyncio.start_server(
            self._handle_http, self._host, self._want_http_port
        )
        self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        self.http_port = self._http_server.sockets[0].getsockname()[1]
        self._broadcast_task = asyncio.create_task(self._broadcast_loop())
        log.info("listening: tcp %s:%s http %s:%s", self._host, self.tcp_port, self._host, self.http_port)

    async def stop(self) -> None:
        if self._broadcast_task:
            self._broadcast_task.cancel()
        for server in (self._tcp_server, self._http_server):
            if server:
                server.close()
                await server.wait_closed()
        for client in list(self.room.clients.values()):
            await client.conn.close()
        for task in list(self._conn_tasks):
            task.cancel()
        await asyncio.gather(*self._conn_tasks, return_exceptions=True)

    def _track(self, coro) -> None:
        task = asyncio.create_task(coro)
        self._conn_tasks.add(task)
        task.add_done_callback(self._conn_tasks.discard)

    # -- connection servicing ------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        conn = Connection(reader, writer, "tcp", self.config.send_queue_limit)
        await self._serve_connection(conn)

    async def _serve_connection(self, conn: Connection) -> None:
        client: ClientState | None = None
        try:
            client = await self._handshake(conn)
        except (HandshakeTimeout, VersionMismatch, RoomFull, RoleViolation, ProtocolError) as exc:
            log.warning("handshake failed from %s: %s: %s", conn.peer, type(exc).__name__, exc)
            await conn.close()
            return
        try:
            while True:
                payload = await conn.recv()
                if payload is None:
                    break
                self._count_in(client, len(payload))
                try:
                    message = decode(payload)
                except ProtocolError as exc:
                    self.room.decode_errors += 1
                    log.warning("client %d: undecodable message: %s", client.id, exc)
                    break
                if not self._ingest(client, message):
                    break
        finally:
            self._unregister(client)
            await conn.close()

    async def _handshake(self, conn: Connection) -> ClientState:
        try:
            payload = await asyncio.wait_for(conn.recv(), self.config.handshake_timeout_s)
        except asyncio.TimeoutError:
            raise HandshakeTimeout(
                f"no Hello within {self.config.handshake_timeout_s}s"
            ) from None
        if payload is None:
            raise HandshakeTimeout("connection closed before Hello")
        message = decode(payload)  # ProtocolError propagates to caller
        if not isinstance(message, Hello):
            raise RoleViolation(f"first message must be Hello, got {type(message).__name__}")
        if message.version != PROTOCOL_VERSION:
            raise VersionMismatch(f"version {message.version}, server speaks {PROTOCOL_VERSION}")
        client_id = self.room.ids.alloc()
        client = ClientState(
            id=client_id,
            role=message.role,
            conn=conn,
            bandwidth=BandwidthCounter(),
            connected_at=time.monotonic(),
        )
        self.room.clients[client_id] = client
        self._count_in(client, len(payload))  # the Hello itself
        self._send(client, encode(self.config.config_push()))
        log.info("client %d connected (%s, %s)", client_id, message.role.name.lower(), conn.peer)
        return client

    def _unregister(self, client: ClientState | None) -> None:
        if client is None or client.id not in self.room.clients:
            return
        del self.room.clients[client.id]
        self.room.ids.release(client.id)
        log.info("client %d disconnected", client.id)

    def _count_in(self, client: ClientState, n: int) -> None:
        client.bandwidth.add_in(n)
        self.room.bytes_in_total += n

    def _send(self, client: ClientState, payload: bytes) -> bool:
        """Queue payload to a client; on overflow, disconnect it."""
        if client.conn.send(payload):
            client.bandwidth.add_out(len(payload))
            self.room.bytes_out_total += len(payload)
            return True
        log.warning("client %d: send queue full, disconnecting slow consumer", client.id)
        self._track(client.conn.close())
        return False

    def _ingest(self, client: ClientState, message: WireMessage) -> bool:
        """Apply one message; False closes the connection (role violation)."""
        if isinstance(message, AimUpdate) and client.role is Role.POINTER:
            client.last_aim = message
            return True
        if isinstance(message, FireEvent) and client.role is Role.POINTER:
            client.fire_count += 1
            self.room.fires_total += 1
            payload = encode(message)
            for display in self.room.displays():
                self._send(display, payload)
            return True
        if isinstance(message, Ping):
            self._send(client, encode(Pong(message.t_ms)))
            return True
        log.warning(
            "client %d: RoleViolation: %s not allowed for %s",
            client.id, type(message).__name__, client.role.name.lower(),
        )
        return False

    # -- broadcast ------------------------------------------------------------

    def _batch_payloads(self) -> list[bytes]:
        """Encode this tick's pointer positions, chunked at the batch cap."""
        entries = [
            PointerEntry(c.id, c.last_aim.x_q16, c.last_aim.y_q16, c.last_aim.flags)
            for _, c in sorted(self.room.clients.items())
            if c.role is Role.POINTER and c.last_aim is not None and c.last_aim.on_screen
        ]
        return [encode(PointerBatch(tuple(chunk))) for chunk in _chunked(entries, BATCH_LIMIT)]

    async def _broadcast_loop(self) -> None:
        period = 1.0 / self.config.broadcast_hz
        while True:
            await asyncio.sleep(period)
            displays = self.room.displays()
            if not displays:
                continue
            for payload in self._batch_payloads():
                for display in displays:
                    self._send(display, payload)

    # -- metrics ---------------------------------------------------------------

    def metrics_snapshot(self) -> str:
        """Line-oriented ``key value`` report; schema is stable and tested."""
        room = self.room
        now = time.monotonic()
        lines = [
            f"clients {len(room.clients)}",
            f"uptime_ms {int((now - room.started_at) * 1000)}",
            f"rss_bytes {psutil.Process().memory_info().rss}",
            f"decode_errors {room.decode_errors}",
            f"fires {room.fires_total}",
            f"bytes_in {room.bytes_in_total}",
            f"bytes_out {room.bytes_out_total}",
            f"bps_in {sum(c.bandwidth.bps_in() for c in room.clients.values()):.1f}",
            f"bps_out {sum(c.bandwidth.bps_out() for c in room.clients.values()):.1f}",
            f"broadcast_hz {room.config.broadcast_hz:g}",
            f"pointer_hz {room.config.pointer_hz:g}",
        ]
        for client_id in sorted(room.clients):
            c = room.clients[client_id]
            prefix = f"client.{client_id}"
            lines += [
                f"{prefix}.role {c.role.name.lower()}",
                f"{prefix}.bytes_in {c.bandwidth.bytes_in}",
                f"{prefix}.bytes_out {c.bandwidth.bytes_out}",
                f"{prefix}.bps_in {c.bandwidth.bps_in():.1f}",
                f"{prefix}.bps_out {c.bandwidth.bps_out():.1f}",
                f"{prefix}.fires {c.fire_count}",
                f"{prefix}.uptime_ms {int((now - c.connected_at) * 1000)}",
            ]
            if c.last_aim is not None:
                lines.append(f"{prefix}.last_aim {c.last_aim.x_sr:.6f} {c.last_aim.y_sr:.6f}")
        return "\n".join(lines) + "\n"

    # -- http -------------------------------------------------------------------

    async def _handle_http(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            head = await asyncio.wait_for(reader.readuntil(b"\r\n\r\n"), 10.0)
        except (asyncio.TimeoutError, asyncio.IncompleteReadError, asyncio.LimitOverrunError, ConnectionError, OSError):
            writer.close()
            return
        request_line, _, header_block = head.partition(b"\r\n")
        parts = request_line.decode("latin-1").split()
        if len(parts) != 3:
            await self._http_simple(writer, 400, "bad request")
            return
        method, raw_path, _version = parts
        path = raw_path.split("?", 1)[0]
        headers = {}
        for line in header_block.decode("latin-1").split("\r\n"):
            if ":" in line:
                k, _, v = line.partition(":")
                headers[k.strip().lower()] = v.strip()

        if path == "/ws":
            await self._upgrade_ws(reader, writer, method, headers)
            return
        if method != "GET":
            await self._http_simple(writer, 405, "method not allowed")
            return
        if path == "/metrics":
            await self._http_simple(writer, 200, self.metrics_snapshot(), "text/plain; charset=utf-8")
            return
        await self._serve_static(writer, path)

    async def _http_simple(
        self, writer: asyncio.StreamWriter, status: int, body: str, ctype: str = "text/plain; charset=utf-8"
    ) -> None:
        reason = {200: "OK", 400: "Bad Request", 404: "Not Found", 405: "Method Not Allowed"}.get(status, "?")
        data = body.encode()
        writer.write(
            f"HTTP/1.1 {status} {reason}\r\nContent-Type: {ctype}\r\n"
            f"Content-Length: {len(data)}\r\nConnection: close\r\n\r\n".encode() + data
        )
        try:
            await writer.drain()
            writer.close()
            await writer.wait_closed()
        except (ConnectionError, OSError):
            pass

    _PAGE_ALIASES = {"/": "index.html", "/controller": "controller.html", "/display": "display.html"}

    _CONTENT_TYPES = {
        ".html": "text/html; charset=utf-8",
        ".js": "text/javascript; charset=utf-8",
        ".css": "text/css; charset=utf-8",
        ".png": "image/png",
        ".svg": "image/svg+xml",
    }

    async def _serve_static(self, writer: asyncio.StreamWriter, path: str) -> None:
        rel = self._PAGE_ALIASES.get(path, path.lstrip("/"))
        if self.static_dir is not None:
            root = self.static_dir.resolve()
            candidate = (root / rel).resolve()
            if candidate.is_file() and root in candidate.parents:
                ctype = self._CONTENT_TYPES.get(candidate.suffix, "application/octet-stream")
                data = candidate.read_bytes()
                writer.write(
                    f"HTTP/1.1 200 OK\r\nContent-Type: {ctype}\r\n"
                    f"Content-Length: {len(data)}\r\nConnection: close\r\n\r\n".encode() + data
                )
                try:
                    await writer.drain()
                    writer.close()
                    await writer.wait_closed()
                except (ConnectionError, OSError):
                    pass
                return
        if path in self._PAGE_ALIASES:
            body = (
                "<!-- placeholder -->\n<h1>aimcast server</h1>\n"
                "<p>The web UI is not built. Build the frontend and pass its "
                "dist directory via --static-dir (see README), or use /metrics.</p>\n"
            )
            await self._http_simple(writer, 200, body, "text/html; charset=utf-8")
            return
        await self._http_simple(writer, 404, f"not found: {path}\n")

    async def _upgrade_ws(
        self,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        method: str,
        headers: dict[str, str],
    ) -> None:
        key = headers.get("sec-websocket-key")
        if (
            method != "GET"
            or key is None
            or "websocket" not in headers.get("upgrade", "").lower()
        ):
            await self._http_simple(writer, 400, "expected websocket upgrade")
            return
        accept = base64.b64encode(hashlib.sha1((key + WS_GUID).encode()).digest()).decode()
        writer.write(
            "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n"
            f"Connection: Upgrade\r\nSec-WebSocket-Accept: {accept}\r\n\r\n".encode()
        )
        try:
            await writer.drain()
        except (ConnectionError, OSError):
            writer.close()
            return
        conn = Connection(reader, writer, "ws", self.config.send_queue_limit)
        await self._serve_connection(conn)
