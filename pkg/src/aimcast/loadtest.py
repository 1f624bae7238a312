"""Synthetic load harness: N scripted pointer clients plus one verifying display.

Every pointer streams a constant, client-unique aim (so the server's
final per-client state is checkable) and fires tagged shots whose
coordinates encode (client index, shot sequence).  The display client
collects relayed fires, which makes exactly-once delivery measurable:
a missing (index, seq) pair is a relay loss, a repeated one a duplicate.

Clients connect sequentially so a fresh server assigns ids
deterministically, but verification never assumes ids: final aims are
matched by value against the server's metrics.
"""

from __future__ import annotations

import asyncio
import struct
from dataclasses import dataclass, field

from .protocol import (
    FLAG_ON_SCREEN,
    AimUpdate,
    ConfigPush,
    FireEvent,
    Hello,
    PointerBatch,
    ProtocolError,
    Role,
    WireMessage,
    decode,
    encode,
)

#: Offsets making each client's scripted aim unique and nonzero.
AIM_X_BASE = 1000
AIM_Y_BASE = 3000


class HarnessClient:
    """A minimal native client over length-prefixed TCP framing."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self._reader = reader
        self._writer = writer
        self.payload_bytes_sent = 0

    @classmethod
    async def connect(cls, host: str, port: int, role: Role) -> tuple["HarnessClient", ConfigPush]:
        reader, writer = await asyncio.open_connection(host, port)
        client = cls(reader, writer)
        client.send(Hello(role))
        await client.drain()
        reply = await client.read_message()
        if not isinstance(reply, ConfigPush):
            raise RuntimeError(f"expected ConfigPush after Hello, got {reply!r}")
        return client, reply

    def send(self, message: WireMessage) -> None:
        payload = encode(message)
        self._writer.write(struct.pack(">H", len(payload)) + payload)
        self.payload_bytes_sent += len(payload)

    async def drain(self) -> None:
        await self._writer.drain()

    async def read_message(self) -> WireMessage | None:
        """Next decoded message, or None once the server hangs up."""
        try:
            header = await self._reader.readexactly(2)
            (length,) = struct.unpack(">H", header)
            payload = await self._reader.readexactly(length)
        except (asyncio.IncompleteReadError, ConnectionError, OSError):
            return None
        return decode(payload)  # ProtocolError intentionally propagates

    async def close(self) -> None:
        try:
            self._writer.close()
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass


async def fetch_metrics(host: str, port: int) -> str:
    """GET /metrics from the server's HTTP port, returning the body text."""
    reader, writer = await asyncio.open_connection(host, port)
    writer.write(f"GET /metrics HTTP/1.1\r\nHost: {host}\r\nConnection: close\r\n\r\n".encode())
    await writer.drain()
    raw = await reader.read(-1)
    writer.close()
    try:
        await writer.wait_closed()
    except (ConnectionError, OSError):
        pass
    head, _, body = raw.partition(b"\r\n\r\n")
    if not head.startswith(b"HTTP/1.1 200"):
        raise RuntimeError(f"metrics endpoint replied: {head.splitlines()[0]!r}")
    return body.decode()


def parse_metrics(text: str) -> dict[str, str]:
    """Metrics text -> {key: value-string}; multi-token values stay joined."""
    out: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" ")
        out[key] = value
    return out


@dataclass
class LoadReport:
    """Everything the harness measured or verified in one run."""

    clients: int
    duration_s: float
    hz: float
    fire_hz: float
    aims_sent: int
    fires_sent: int
    fires_received: int
    relay_losses: int
    relay_dupes: int
    harness_decode_errors: int
    batches_received: int
    max_batch_entries: int
    max_client_ingress_bps: float
    # metrics-derived; -1 when no metrics port was given
    server_decode_errors: int = -1
    last_aim_mismatches: int = -1
    server_max_pointer_bps_in: float = -1.0
    rss_bytes: int = -1

    def ok(self) -> bool:
        return (
            self.relay_losses == 0
            and self.relay_dupes == 0
            and self.harness_decode_errors == 0
            and self.server_decode_errors <= 0
            and self.last_aim_mismatches <= 0
        )

    def to_text(self) -> str:
        lines = [
            f"clients {self.clients}",
            f"duration_s {self.duration_s:g}",
            f"hz {self.hz:g}",
            f"fire_hz {self.fire_hz:g}",
            f"aims_sent {self.aims_sent}",
            f"fires_sent {self.fires_sent}",
            f"fires_received {self.fires_received}",
            f"relay_losses {self.relay_losses}",
            f"relay_dupes {self.relay_dupes}",
            f"harness_decode_errors {self.harness_decode_errors}",
            f"batches_received {self.batches_received}",
            f"max_batch_entries {self.max_batch_entries}",
            f"max_client_ingress_bps {self.max_client_ingress_bps:.1f}",
            f"server_decode_errors {self.server_decode_errors}",
            f"last_aim_mismatches {self.last_aim_mismatches}",
            f"server_max_pointer_bps_in {self.server_max_pointer_bps_in:.1f}",
            f"rss_bytes {self.rss_bytes}",
            f"ok {1 if self.ok() else 0}",
        ]
        return "\n".join(lines) + "\n"


@dataclass
class _DisplayStats:
    fires: dict[tuple[int, int], int] = field(default_factory=dict)
    batches: int = 0
    max_batch_entries: int = 0
    decode_errors: int = 0


async def _display_reader(client: HarnessClient, stats: _DisplayStats) -> None:
    while True:
        try:
            message = await client.read_message()
        except ProtocolError:
            stats.decode_errors += 1
            return
        if message is None:
            return
        if isinstance(message, FireEvent):
            key = (message.x_q16, message.y_q16)
            stats.fires[key] = stats.fires.get(key, 0) + 1
        elif isinstance(message, PointerBatch):
            stats.batches += 1
            stats.max_batch_entries = max(stats.max_batch_entries, message.count)


async def _pointer_script(
    client: HarnessClient, index: int, hz: float, fire_hz: float, seconds: float
) -> tuple[int, int]:
    """Send paced aims and tagged fires; returns (aims, fires) sent."""
    loop = asyncio.get_running_loop()
    start = loop.time()
    events: list[tuple[float, str, int]] = []
    n_aims = round(hz * seconds) if hz > 0 else 0
    n_fires = round(fire_hz * seconds) if fire_hz > 0 else 0
    events += [(start + (k + 1) / hz, "aim", k) for k in range(n_aims)]
    events += [(start + (j + 1) / fire_hz, "fire", j) for j in range(n_fires)]
    events.sort()
    aim = AimUpdate(AIM_X_BASE + index, AIM_Y_BASE + index, FLAG_ON_SCREEN)
    for sent, (when, kind, seq) in enumerate(events, start=1):
        delay = when - loop.time()
        if delay > 0:
            await asyncio.sleep(delay)
        client.send(aim if kind == "aim" else FireEvent(index, seq, 0))
        if sent % 32 == 0:
            await client.drain()
    await client.drain()
    return n_aims, n_fires


async def _run(
    host: str,
    tcp_port: int,
    clients: int,
    hz: float,
    seconds: float,
    fire_hz: float,
    metrics_port: int | None,
    metrics_host: str | None,
) -> LoadReport:
    stats = _DisplayStats()
    display, _config = await HarnessClient.connect(host, tcp_port, Role.DISPLAY)
    reader_task = asyncio.create_task(_display_reader(display, stats))

    pointers: list[HarnessClient] = []
    for _ in range(clients):
        pointer, _config = await HarnessClient.connect(host, tcp_port, Role.POINTER)
        pointers.append(pointer)

    scripts = [
        asyncio.create_task(_pointer_script(p, i, hz, fire_hz, seconds))
        for i, p in enumerate(pointers)
    ]
    totals = await asyncio.gather(*scripts)
    await asyncio.sleep(1.0)  # let the last relays land

    aims_sent = sum(t[0] for t in totals)
    fires_sent = sum(t[1] for t in totals)

    server_decode_errors = -1
    mismatches = -1
    server_max_bps = -1.0
    rss = -1
    if metrics_port is not None:
        metrics = parse_metrics(await fetch_metrics(metrics_host or host, metrics_port))
        server_decode_errors = int(metrics.get("decode_errors", "-1"))
        rss = int(metrics.get("rss_bytes", "-1"))
        last_aims = []
        for key, value in metrics.items():
            if key.endswith(".last_aim"):
                x_text, _, y_text = value.partition(" ")
                last_aims.append((float(x_text), float(y_text)))
            if key.endswith(".bps_in"):
                client_key = key.rsplit(".", 1)[0]
                if metrics.get(f"{client_key}.role") == "pointer":
                    server_max_bps = max(server_max_bps, float(value))
        if hz > 0:  # no aims are streamed at hz=0, so there is nothing to match
            mismatches = 0
            for i in range(clients):
                want = ((AIM_X_BASE + i) / 65535.0, (AIM_Y_BASE + i) / 65535.0)
                hit = any(
                    abs(got_x - want[0]) <= 1e-5 and abs(got_y - want[1]) <= 1e-5
                    for got_x, got_y in last_aims
                )
                if not hit:
                    mismatches += 1

    for pointer in pointers:
        await pointer.close()
    await display.close()
    await asyncio.wait_for(reader_task, timeout=5.0)

    expected = {(i, j) for i in range(clients) for j in range(round(fire_hz * seconds))}
    losses = sum(1 for key in expected if stats.fires.get(key, 0) == 0)
    dupes = sum(max(0, n - 1) for n in stats.fires.values())

    max_ingress = 0.0
    if seconds > 0:
        max_ingress = max(p.payload_bytes_sent * 8.0 / seconds for p in pointers)

    return LoadReport(
        clients=clients,
        duration_s=seconds,
        hz=hz,
        fire_hz=fire_hz,
        aims_sent=aims_sent,
        fires_sent=fires_sent,
        fires_received=sum(stats.fires.values()),
        relay_losses=losses,
        relay_dupes=dupes,
        harness_decode_errors=stats.decode_errors,
        batches_received=stats.batches,
        max_batch_entries=stats.max_batch_entries,
        max_client_ingress_bps=max_ingress,
        server_decode_errors=server_decode_errors,
        last_aim_mismatches=mismatches,
        server_max_pointer_bps_in=server_max_bps,
        rss_bytes=rss,
    )


def run_loadtest(
    host: str,
    tcp_port: int,
    clients: int,
    hz: float,
    seconds: float,
    fire_hz: float = 1.0,
    metrics_port: int | None = None,
    metrics_host: str | None = None,
) -> LoadReport:
    """Run the harness against a (fresh, otherwise idle) server."""
    if clients < 1:
        raise ValueError("clients must be >= 1")
    if seconds <= 0:
        raise ValueError("seconds must be positive")
    return asyncio.run(
        _run(host, tcp_port, clients, hz, seconds, fire_hz, metrics_port, metrics_host)
    )
