"""Frame analysis: color classification, blob labeling, extents, and aim.

The pipeline turns a raw frame into per-color connected components
("blobs"), reduces each color's blobs to extreme coordinates, reconciles
the two colors' extents, and interpolates the frame center into screen
coordinates.  Everything in here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .config import ConfigError, load_kv, parse_rgb, reject_unknown, single
from .geometry import (
    AimResult,
    Confidence,
    ExtentBox,
    ReconcileConflict,
    aim_from_extents,
    reconcile_extents,
    validate_aspect,
)
from .image import Frame

#: Largest possible Euclidean distance in RGB-8 space (255 * sqrt(3)).
MAX_RGB_DISTANCE = 442

MAGENTA = (255, 0, 255)
CYAN = (0, 255, 255)

#: 4-neighbor connectivity structure for component labeling.
_STRUCTURE_4 = ndimage.generate_binary_structure(2, 1)


class NoScreenDetected(Exception):
    """No usable screen extents could be recovered from the frame."""


@dataclass(frozen=True)
class ColorTarget:
    """A reference RGB color with a Euclidean match tolerance."""

    reference: tuple[int, int, int]
    tolerance: float = 60.0

    def __post_init__(self) -> None:
        if not all(0 <= c <= 255 for c in self.reference):
            raise ValueError(f"reference channels out of range: {self.reference}")
        if not (0 <= self.tolerance < MAX_RGB_DISTANCE):
            raise ValueError(f"tolerance out of range: {self.tolerance}")


@dataclass(frozen=True)
class Blob:
    """A connected component of pixels matching one color target.

    Bounding box coordinates are pixel indices, right/bottom inclusive.
    """

    color_index: int
    left: int
    top: int
    right: int
    bottom: int
    area: int

    def __post_init__(self) -> None:
        if self.area < 1:
            raise ValueError("blob must contain at least one pixel")
        box_pixels = (self.right - self.left + 1) * (self.bottom - self.top + 1)
        if self.area > box_pixels:
            raise ValueError(f"area {self.area} exceeds bbox pixel count {box_pixels}")


@dataclass(frozen=True)
class DetectionConfig:
    """Color targets plus the minimum blob size worth keeping.

    ``min_area`` of ``None`` resolves per frame to ceil(w*h/4096), so the
    stray-pixel filter scales with resolution.  Connectivity is fixed at
    4 neighbors.
    """

    targets: tuple[ColorTarget, ...] = (ColorTarget(MAGENTA), ColorTarget(CYAN))
    min_area: int | None = None

    def __post_init__(self) -> None:
        if not self.targets:
            raise ValueError("need at least one color target")
        if self.min_area is not None and self.min_area < 1:
            raise ValueError("min_area must be >= 1")

    def resolve_min_area(self, width: int, height: int) -> int:
        if self.min_area is not None:
            return self.min_area
        return math.ceil(width * height / 4096)

    @classmethod
    def from_file(cls, path: str | Path) -> DetectionConfig:
        """Load from key=value text: color.N.rgb, color.N.tol, min_area."""
        kv = load_kv(path)
        src = str(path)
        known = {"min_area"}
        indices = set()
        for key in kv:
            if key.startswith("color."):
                parts = key.split(".")
                if len(parts) == 3 and parts[1].isdigit() and parts[2] in ("rgb", "tol"):
                    indices.add(int(parts[1]))
                    known.add(key)
        reject_unknown(kv, known, src)
        if not indices:
            raise ConfigError(f"{src}: no color.N.rgb keys")
        if sorted(indices) != list(range(len(indices))):
            raise ConfigError(f"{src}: color indices must be 0..{len(indices) - 1}")
        targets = []
        for i in sorted(indices):
            rgb = parse_rgb(single(kv, f"color.{i}.rgb", src), src)
            tol = 60.0
            if f"color.{i}.tol" in kv:
                tol = float(single(kv, f"color.{i}.tol", src))
            targets.append(ColorTarget(rgb, tol))
        min_area = None
        if "min_area" in kv:
            min_area = int(single(kv, "min_area", src))
        return cls(tuple(targets), min_area)

    def to_text(self) -> str:
        lines = []
        for i, t in enumerate(self.targets):
            lines.append(f"color.{i}.rgb = {t.reference[0]},{t.reference[1]},{t.reference[2]}")
            lines.append(f"color.{i}.tol = {t.tolerance}")
        if self.min_area is not None:
            lines.append(f"min_area = {self.min_area}")
        return "\n".join(lines) + "\n"


def classify_pixel(p: tuple[int, int, int], t: ColorTarget) -> bool:
    """True iff the pixel is within the target's Euclidean RGB tolerance."""
    return math.dist(p, t.reference) <= t.tolerance


def classify_masks(frame: Frame, cfg: DetectionConfig) -> list[np.ndarray]:
    """Per-target boolean masks; a pixel goes to the first matching target."""
    px = frame.array.astype(np.int32)
    taken = np.zeros((frame.height, frame.width), dtype=bool)
    masks = []
    for t in cfg.targets:
        ref = np.array(t.reference, dtype=np.int32)
        d2 = ((px - ref) ** 2).sum(axis=2)
        m = (d2 <= t.tolerance * t.tolerance) & ~taken
        taken |= m
        masks.append(m)
    return masks


def detect_blobs(frame: Frame, cfg: DetectionConfig) -> list[Blob]:
    """Label 4-connected components per color, dropping ones below min_area.

    Output is sorted by (color_index, top, left) so identical inputs give
    identical ordered output.
    """
    min_area = cfg.resolve_min_area(frame.width, frame.height)
    blobs: list[Blob] = []
    for color_index, mask in enumerate(classify_masks(frame, cfg)):
        labels, count = ndimage.label(mask, structure=_STRUCTURE_4)
        if count == 0:
            continue
        areas = np.bincount(labels.ravel())[1:]
        for label_id, slices in enumerate(ndimage.find_objects(labels), start=1):
            area = int(areas[label_id - 1])
            if area < min_area:
                continue
            rows, cols = slices
            blobs.append(
                Blob(
                    color_index=color_index,
                    left=int(cols.start),
                    top=int(rows.start),
                    right=int(cols.stop) - 1,
                    bottom=int(rows.stop) - 1,
                    area=area,
                )
            )
    blobs.sort(key=lambda b: (b.color_index, b.top, b.left))
    return blobs


def extents_of(
    blobs: list[Blob], color_index: int, frame_dims: tuple[int, int]
) -> ExtentBox | None:
    """Extreme coordinates over all blobs of one color, or None if absent.

    Normalization is half-open, (right + 1) / width, so a blob covering
    the full frame yields exactly [0, 1] and quantization error is
    symmetric at half a pixel.
    """
    width, height = frame_dims
    mine = [b for b in blobs if b.color_index == color_index]
    if not mine:
        return None
    return ExtentBox(
        x_min=min(b.left for b in mine) / width,
        x_max=(max(b.right for b in mine) + 1) / width,
        y_min=min(b.top for b in mine) / height,
        y_max=(max(b.bottom for b in mine) + 1) / height,
    )


def detect_aim(
    frame: Frame,
    cfg: DetectionConfig | None = None,
    expected_ratio: float | None = None,
    aspect_tol: float = 0.05,
) -> AimResult:
    """Full pipeline: blobs -> per-color extents -> reconcile -> aim.

    With two colors present the extents are reconciled bound-by-bound and
    the result carries TWO_COLOR confidence; with exactly one color the
    raw extents are used at SINGLE_COLOR_FALLBACK.  When expected_ratio
    (screen width / height) is given, the extent box is rescaled to pixel
    units and its aspect checked; a mismatch demotes confidence.
    """
    if cfg is None:
        cfg = DetectionConfig()
    blobs = detect_blobs(frame, cfg)
    dims = (frame.width, frame.height)
    first = extents_of(blobs, 0, dims)
    second = extents_of(blobs, 1, dims) if len(cfg.targets) >= 2 else None

    if first is not None and second is not None:
        try:
            box = reconcile_extents(first, second)
        except ReconcileConflict as exc:
            raise NoScreenDetected(str(exc)) from exc
        confidence = Confidence.TWO_COLOR
    elif first is not None or second is not None:
        box = first if first is not None else second
        confidence = Confidence.SINGLE_COLOR_FALLBACK
    else:
        raise NoScreenDetected("no color features found")

    if box.is_degenerate():
        raise NoScreenDetected(f"degenerate extents: {box}")

    if expected_ratio is not None:
        # rescale to pixels so frame aspect does not skew the ratio check
        pixel_box = ExtentBox(
            box.x_min * frame.width,
            box.x_max * frame.width,
            box.y_min * frame.height,
            box.y_max * frame.height,
        )
        if not validate_aspect(pixel_box, expected_ratio, aspect_tol):
            confidence = Confidence.SINGLE_COLOR_FALLBACK

    return aim_from_extents(box, confidence)
