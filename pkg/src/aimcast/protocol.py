"""Binary wire protocol: message types, codec, and bandwidth accounting.

Layout per message: a 1-byte type tag, then the fields in declaration
order, big-endian, no padding.  Coordinates travel as q16 fixed point
(c in [0,1] scaled by 65535, round half up), which keeps an AimUpdate at
6 bytes: 30 Hz of those is 1440 bps, inside a 2 kbps per-client budget.

The codec is total: any byte string either decodes or raises exactly one
of UnknownTag, TruncatedMessage, TrailingBytes, each carrying the
offending offset.

Transport framing is not part of this module: TCP carries each message
behind a 2-byte big-endian length prefix, WebSocket carries one message
per binary frame (see server).
"""

from __future__ import annotations

import math
import struct
import time
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Union

PROTOCOL_VERSION = 1

TAG_HELLO = 0x01
TAG_CONFIG_PUSH = 0x02
TAG_AIM_UPDATE = 0x03
TAG_FIRE_EVENT = 0x04
TAG_POINTER_BATCH = 0x05
TAG_PING = 0x06
TAG_PONG = 0x07

FLAG_ON_SCREEN = 0x01

#: Hard cap on entries per PointerBatch; larger broadcasts are chunked.
BATCH_LIMIT = 255


class ProtocolError(Exception):
    """Base for decode failures; ``offset`` is the offending byte index."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownTag(ProtocolError):
    """An unrecognized discriminator byte (message tag or role)."""

    def __init__(self, value: int, offset: int = 0):
        super().__init__(f"unknown tag 0x{value:02X}", offset)
        self.value = value


class TruncatedMessage(ProtocolError):
    """The buffer ended before the message did."""

    def __init__(self, offset: int):
        super().__init__("message truncated", offset)


class TrailingBytes(ProtocolError):
    """The buffer continues past the end of the message."""

    def __init__(self, offset: int):
        super().__init__("trailing bytes after message", offset)


def q16_encode(c: float) -> int:
    """Clamp to [0,1] and scale to u16, round half up (0.5 -> 0x8000)."""
    clamped = min(1.0, max(0.0, c))
    return math.floor(clamped * 65535.0 + 0.5)


def q16_decode(q: int) -> float:
    return q / 65535.0


def q8_encode(fraction: float) -> int:
    clamped = min(1.0, max(0.0, fraction))
    return math.floor(clamped * 255.0 + 0.5)


def _check_u(value: int, bits: int, what: str) -> None:
    if not 0 <= value < (1 << bits):
        raise ValueError(f"{what} out of u{bits} range: {value}")


def _check_rgb(rgb: tuple[int, int, int], what: str) -> None:
    if len(rgb) != 3 or any(not 0 <= c <= 255 for c in rgb):
        raise ValueError(f"{what} must be three 0-255 channels: {rgb}")


class Role(IntEnum):
    POINTER = 0
    DISPLAY = 1


@dataclass(frozen=True)
class Hello:
    """Client's opening message: declares role and protocol version."""

    role: Role
    version: int = PROTOCOL_VERSION

    def __post_init__(self) -> None:
        _check_u(self.version, 8, "version")


@dataclass(frozen=True)
class ConfigPush:
    """Server -> client: screen geometry and the border color pair."""

    screen_w_px: int
    screen_h_px: int
    border_frac_q8: int
    color_a: tuple[int, int, int]
    color_b: tuple[int, int, int]

    def __post_init__(self) -> None:
        _check_u(self.screen_w_px, 16, "screen_w_px")
        _check_u(self.screen_h_px, 16, "screen_h_px")
        _check_u(self.border_frac_q8, 8, "border_frac_q8")
        _check_rgb(self.color_a, "color_a")
        _check_rgb(self.color_b, "color_b")

    @property
    def border_frac(self) -> float:
        return self.border_frac_q8 / 255.0


@dataclass(frozen=True)
class AimUpdate:
    """Pointer -> server: latest aim point, streamed continuously."""

    x_q16: int
    y_q16: int
    flags: int = FLAG_ON_SCREEN

    def __post_init__(self) -> None:
        _check_u(self.x_q16, 16, "x_q16")
        _check_u(self.y_q16, 16, "y_q16")
        _check_u(self.flags, 8, "flags")

    @classmethod
    def from_sr(cls, x_sr: float, y_sr: float, on_screen: bool) -> AimUpdate:
        return cls(q16_encode(x_sr), q16_encode(y_sr), FLAG_ON_SCREEN if on_screen else 0)

    @property
    def x_sr(self) -> float:
        return q16_decode(self.x_q16)

    @property
    def y_sr(self) -> float:
        return q16_decode(self.y_q16)

    @property
    def on_screen(self) -> bool:
        return bool(self.flags & FLAG_ON_SCREEN)


@dataclass(frozen=True)
class FireEvent:
    """Pointer -> server -> displays: trigger pressed at these coordinates."""

    x_q16: int
    y_q16: int
    button: int = 0

    def __post_init__(self) -> None:
        _check_u(self.x_q16, 16, "x_q16")
        _check_u(self.y_q16, 16, "y_q16")
        _check_u(self.button, 8, "button")

    @classmethod
    def from_sr(cls, x_sr: float, y_sr: float, button: int = 0) -> FireEvent:
        return cls(q16_encode(x_sr), q16_encode(y_sr), button)

    @property
    def x_sr(self) -> float:
        return q16_decode(self.x_q16)

    @property
    def y_sr(self) -> float:
        return q16_decode(self.y_q16)


@dataclass(frozen=True)
class PointerEntry:
    """One pointer's state inside a PointerBatch."""

    client_id: int
    x_q16: int
    y_q16: int
    flags: int = FLAG_ON_SCREEN

    def __post_init__(self) -> None:
        _check_u(self.client_id, 16, "client_id")
        _check_u(self.x_q16, 16, "x_q16")
        _check_u(self.y_q16, 16, "y_q16")
        _check_u(self.flags, 8, "flags")


@dataclass(frozen=True)
class PointerBatch:
    """Server -> displays: all live pointer positions for one tick."""

    entries: tuple[PointerEntry, ...] = ()

    def __post_init__(self) -> None:
        if len(self.entries) > BATCH_LIMIT:
            raise ValueError(f"batch of {len(self.entries)} exceeds {BATCH_LIMIT}")

    @property
    def count(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Ping:
    t_ms: int

    def __post_init__(self) -> None:
        _check_u(self.t_ms, 32, "t_ms")


@dataclass(frozen=True)
class Pong:
    t_ms: int

    def __post_init__(self) -> None:
        _check_u(self.t_ms, 32, "t_ms")


WireMessage = Union[Hello, ConfigPush, AimUpdate, FireEvent, PointerBatch, Ping, Pong]

#: Payload sizes in bytes for the fixed-size message types.
FIXED_SIZES = {
    TAG_HELLO: 3,
    TAG_CONFIG_PUSH: 12,
    TAG_AIM_UPDATE: 6,
    TAG_FIRE_EVENT: 6,
    TAG_PING: 5,
    TAG_PONG: 5,
}


def encode(m: WireMessage) -> bytes:
    if isinstance(m, Hello):
        return struct.pack(">BBB", TAG_HELLO, int(m.role), m.version)
    if isinstance(m, ConfigPush):
        return struct.pack(
            ">BHHB3B3B",
            TAG_CONFIG_PUSH,
            m.screen_w_px,
            m.screen_h_px,
            m.border_frac_q8,
            *m.color_a,
            *m.color_b,
        )
    if isinstance(m, AimUpdate):
        return struct.pack(">BHHB", TAG_AIM_UPDATE, m.x_q16, m.y_q16, m.flags)
    if isinstance(m, FireEvent):
        return struct.pack(">BHHB", TAG_FIRE_EVENT, m.x_q16, m.y_q16, m.button)
    if isinstance(m, PointerBatch):
        parts = [struct.pack(">BB", TAG_POINTER_BATCH, m.count)]
        parts += [
            struct.pack(">HHHB", e.client_id, e.x_q16, e.y_q16, e.flags) for e in m.entries
        ]
        return b"".join(parts)
    if isinstance(m, Ping):
        return struct.pack(">BI", TAG_PING, m.t_ms)
    if isinstance(m, Pong):
        return struct.pack(">BI", TAG_PONG, m.t_ms)
    raise TypeError(f"not a wire message: {m!r}")


def decode(b: bytes) -> WireMessage:
    """Parse one complete message; see module docstring for the error set."""
    if len(b) < 1:
        raise TruncatedMessage(0)
    tag = b[0]
    if tag == TAG_POINTER_BATCH:
        if len(b) < 2:
            raise TruncatedMessage(len(b))
        count = b[1]
        expected = 2 + 7 * count
    elif tag in FIXED_SIZES:
        expected = FIXED_SIZES[tag]
    else:
        raise UnknownTag(tag, 0)
    if len(b) < expected:
        raise TruncatedMessage(len(b))
    if len(b) > expected:
        raise TrailingBytes(expected)

    if tag == TAG_HELLO:
        role_byte, version = b[1], b[2]
        if role_byte not in (0, 1):
            raise UnknownTag(role_byte, 1)
        return Hello(Role(role_byte), version)
    if tag == TAG_CONFIG_PUSH:
        w, h, q8, ar, ag, ab, br, bg, bb = struct.unpack(">HHB3B3B", b[1:])
        return ConfigPush(w, h, q8, (ar, ag, ab), (br, bg, bb))
    if tag == TAG_AIM_UPDATE:
        x, y, flags = struct.unpack(">HHB", b[1:])
        return AimUpdate(x, y, flags)
    if tag == TAG_FIRE_EVENT:
        x, y, button = struct.unpack(">HHB", b[1:])
        return FireEvent(x, y, button)
    if tag == TAG_POINTER_BATCH:
        entries = [
            PointerEntry(*struct.unpack_from(">HHHB", b, 2 + 7 * i)) for i in range(b[1])
        ]
        return PointerBatch(tuple(entries))
    if tag == TAG_PING:
        return Ping(struct.unpack(">I", b[1:])[0])
    return Pong(struct.unpack(">I", b[1:])[0])


def budget_check(mode: str, rate_hz: float) -> float:
    """Payload bandwidth in bits/second for a send mode at a given rate."""
    if rate_hz <= 0:
        raise ValueError("rate_hz must be positive")
    if mode == "pointer":
        size = FIXED_SIZES[TAG_AIM_UPDATE]
    elif mode == "fire":
        size = FIXED_SIZES[TAG_FIRE_EVENT]
    else:
        raise ValueError(f"mode must be 'pointer' or 'fire', got {mode!r}")
    return size * 8 * rate_hz


class BandwidthCounter:
    """Per-second byte buckets over a sliding window, per direction.

    Single writer per connection; readers may see a rate up to one
    bucket (one second) stale, which is fine for metrics.
    """

    def __init__(self, window_s: float = 10.0, clock: Callable[[], float] = time.monotonic):
        if window_s <= 0:
            raise ValueError("window_s must be positive")
        self.window_s = window_s
        self._clock = clock
        self.bytes_in = 0
        self.bytes_out = 0
        self._in: deque[list] = deque()
        self._out: deque[list] = deque()

    def _add(self, buckets: deque, n: int) -> None:
        sec = int(self._clock())
        if buckets and buckets[-1][0] == sec:
            buckets[-1][1] += n
        else:
            buckets.append([sec, n])

    def add_in(self, n: int) -> None:
        self.bytes_in += n
        self._add(self._in, n)

    def add_out(self, n: int) -> None:
        self.bytes_out += n
        self._add(self._out, n)

    def _rate(self, buckets: deque) -> float:
        cutoff = self._clock() - self.window_s
        while buckets and buckets[0][0] <= cutoff:
            buckets.popleft()
        return sum(n for _, n in buckets) * 8.0 / self.window_s

    def bps_in(self) -> float:
        return self._rate(self._in)

    def bps_out(self) -> float:
        return self._rate(self._out)
