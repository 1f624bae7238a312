"""Raw RGB frames and binary PPM (P6) import/export."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Frame:
    """An 8-bit RGB image, stored row-major as an (h, w, 3) uint8 array."""

    array: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.array)
        if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8:
            raise ValueError(f"frame must be (h, w, 3) uint8, got {a.shape} {a.dtype}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        object.__setattr__(self, "array", a)

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @property
    def pixels(self) -> bytes:
        """Row-major RGB triples, length exactly 3 * width * height."""
        return self.array.tobytes()

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes) -> Frame:
        if len(data) != 3 * width * height:
            raise ValueError(
                f"pixel buffer is {len(data)} bytes, need {3 * width * height}"
            )
        a = np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3).copy()
        return cls(a)

    @classmethod
    def filled(cls, width: int, height: int, rgb: tuple[int, int, int]) -> Frame:
        a = np.empty((height, width, 3), dtype=np.uint8)
        a[:] = rgb
        return cls(a)


_PPM_HEADER = re.compile(rb"^(P6)\s")


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments, then read one token
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated PPM header")
    return data[start:pos], pos


def ppm_decode(data: bytes) -> Frame:
    """Decode a binary PPM (P6, maxval 255) byte string."""
    if not _PPM_HEADER.match(data):
        raise ValueError("not a binary PPM (P6) file")
    pos = 2
    width_tok, pos = _read_token(data, pos)
    height_tok, pos = _read_token(data, pos)
    maxval_tok, pos = _read_token(data, pos)
    width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    if maxval != 255:
        raise ValueError(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise ValueError(f"bad PPM dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    raster = data[pos : pos + 3 * width * height]
    return Frame.from_bytes(width, height, raster)


def ppm_encode(frame: Frame) -> bytes:
    return b"P6\n%d %d\n255\n" % (frame.width, frame.height) + frame.pixels


def read_ppm(path: str | Path) -> Frame:
    return ppm_decode(Path(path).read_bytes())


def write_ppm(path: str | Path, frame: Frame) -> None:
    Path(path).write_bytes(ppm_encode(frame))
