"""Coordinate math for mapping the camera's center point onto a screen.

Two normalized coordinate spaces appear throughout:

* CR (camera-relative): positions in the camera frame, (0, 0) top-left
  to (1, 1) bottom-right, y down.
* SR (screen-relative): positions on the server's screen, same
  convention.  Multiplying by the screen resolution gives pixels.

The aim point is always the camera frame center, CR (0.5, 0.5).  Given
the extreme coordinates of the detected screen in CR space, the aim
point in SR space follows by linear interpolation per axis; given the
four projected screen corners, a homography recovers it exactly even
under keystone distortion.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

#: Degeneracy / singularity threshold in normalized units.  Far below any
#: pixel quantization (>= 1/4096) yet well above double-precision noise.
EPS_GEOM = 1e-9


class DegenerateExtent(Exception):
    """Extent box has (near-)zero width or height; no aim can be computed."""


class ReconcileConflict(Exception):
    """Two colors produced disjoint extents; both saw false features."""


class SingularConfiguration(Exception):
    """Corner configuration does not determine an invertible homography."""


class PerspectiveDivideByZero(Exception):
    """Mapped homogeneous point has a vanishing w component."""


class Confidence(Enum):
    TWO_COLOR = "two_color"
    SINGLE_COLOR_FALLBACK = "single_color_fallback"


@dataclass(frozen=True)
class NormPoint:
    """A point in a normalized [0,1]x[0,1] space (CR or SR), y down.

    Any finite values are constructible; points outside the unit square
    arise routinely when mapping through a homography.
    """

    x: float
    y: float

    def in_frame(self) -> bool:
        return 0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0


#: The camera's aim point in CR coordinates.
AIM_CENTER = NormPoint(0.5, 0.5)


@dataclass(frozen=True)
class ExtentBox:
    """Per-color extreme coordinates of detected screen features, in CR units."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(
                f"extent bounds out of order: x=[{self.x_min}, {self.x_max}] "
                f"y=[{self.y_min}, {self.y_max}]"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def is_degenerate(self, eps: float = EPS_GEOM) -> bool:
        return self.width < eps or self.height < eps


@dataclass(frozen=True)
class AimResult:
    """Computed aim point in SR coordinates.

    ``on_screen`` is derived: true iff both coordinates lie in [0, 1].
    """

    x_sr: float
    y_sr: float
    confidence: Confidence = Confidence.TWO_COLOR

    @property
    def on_screen(self) -> bool:
        return 0.0 <= self.x_sr <= 1.0 and 0.0 <= self.y_sr <= 1.0


def aim_from_extents(
    box: ExtentBox, confidence: Confidence = Confidence.TWO_COLOR
) -> AimResult:
    """Map the camera center to SR coordinates via the extent box.

    Uses the signed form ``(0.5 - min) / (max - min)`` per axis.  Inside
    the detected screen this equals the absolute-value interpolation of
    the center between the two bounds; outside, it extends the same
    linear map continuously, so off-screen aiming yields coordinates
    beyond [0, 1] instead of ambiguous ratios.
    """
    if box.is_degenerate():
        raise DegenerateExtent(f"degenerate extents: {box}")
    x_sr = (AIM_CENTER.x - box.x_min) / box.width
    y_sr = (AIM_CENTER.y - box.y_min) / box.height
    return AimResult(x_sr, y_sr, confidence)


def reconcile_extents(a: ExtentBox, b: ExtentBox) -> ExtentBox:
    """Combine two colors' extents, keeping the less extreme bound of each.

    A false feature outside the screen can only push a bound further out,
    never further in, so per bound the value closer to the screen interior
    wins: the larger of the two minima and the smaller of the two maxima.
    If that leaves min above max on some axis, the two colors saw disjoint
    false features and the conflict is reported rather than clamped.
    """
    x_min = max(a.x_min, b.x_min)
    x_max = min(a.x_max, b.x_max)
    y_min = max(a.y_min, b.y_min)
    y_max = min(a.y_max, b.y_max)
    if x_min > x_max or y_min > y_max:
        raise ReconcileConflict(
            f"reconciled extents empty: x=[{x_min}, {x_max}] y=[{y_min}, {y_max}]"
        )
    return ExtentBox(x_min, x_max, y_min, y_max)


def validate_aspect(box: ExtentBox, expected_ratio: float, tol: float) -> bool:
    """Check the box's width/height ratio against an expected ratio.

    Pure ratio test in whatever units the box carries; callers must put
    the box into units where the comparison is meaningful.  Only valid
    for near-perpendicular views; a false result means low confidence,
    not a hard failure.
    """
    if box.is_degenerate():
        raise DegenerateExtent(f"degenerate extents: {box}")
    # EPS_GEOM slack keeps exact-by-construction ratios true at tol=0
    # despite binary representation rounding
    return abs(box.width / box.height - expected_ratio) <= tol * expected_ratio + EPS_GEOM


def _cross_z(o: NormPoint, a: NormPoint, b: NormPoint) -> float:
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)


@dataclass(frozen=True)
class Quad:
    """Four corners ordered top-left, top-right, bottom-right, bottom-left.

    Must be strictly convex in the given order.
    """

    corners: tuple[NormPoint, NormPoint, NormPoint, NormPoint]

    def __post_init__(self) -> None:
        c = self.corners
        if len(c) != 4:
            raise ValueError("quad needs exactly four corners")
        crosses = [_cross_z(c[i], c[(i + 1) % 4], c[(i + 2) % 4]) for i in range(4)]
        if not (all(z > EPS_GEOM for z in crosses) or all(z < -EPS_GEOM for z in crosses)):
            raise ValueError(f"corners do not form a strictly convex quad: {c}")


#: The unit square as a Quad: corners TL, TR, BR, BL in SR space (y down).
UNIT_SQUARE = Quad(
    (
        NormPoint(0.0, 0.0),
        NormPoint(1.0, 0.0),
        NormPoint(1.0, 1.0),
        NormPoint(0.0, 1.0),
    )
)


@dataclass(frozen=True)
class Homography:
    """A 3x3 projective map, normalized so m[2][2] == 1."""

    m: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {m.shape}")
        if abs(m[2, 2]) < EPS_GEOM:
            raise SingularConfiguration("cannot normalize: m[2][2] is ~0")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) < EPS_GEOM:
            raise SingularConfiguration("homography not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def apply(self, p: NormPoint) -> NormPoint:
        """Map a point through the homography with perspective division."""
        v = self.m @ np.array([p.x, p.y, 1.0])
        if abs(v[2]) < EPS_GEOM:
            raise PerspectiveDivideByZero(f"w component ~0 mapping {p}")
        return NormPoint(float(v[0] / v[2]), float(v[1] / v[2]))

    def inverse(self) -> Homography:
        return Homography(np.linalg.inv(self.m))


def estimate_homography(q: Quad) -> Homography:
    """Solve for the homography taking unit-square corners to q's corners.

    Direct linear solve of the 8 unknowns; no normalization
    preconditioning is needed since all inputs live in [0, 1]-scale
    coordinates.
    """
    rows = []
    rhs = []
    for (s, c) in zip(UNIT_SQUARE.corners, q.corners):
        rows.append([s.x, s.y, 1, 0, 0, 0, -c.x * s.x, -c.x * s.y])
        rhs.append(c.x)
        rows.append([0, 0, 0, s.x, s.y, 1, -c.y * s.x, -c.y * s.y])
        rhs.append(c.y)
    try:
        h = np.linalg.solve(np.array(rows, dtype=np.float64), np.array(rhs))
    except np.linalg.LinAlgError as exc:
        raise SingularConfiguration(f"corner system is rank-deficient: {exc}") from exc
    hm = Homography(np.array([h[0:3], h[3:6], [h[6], h[7], 1.0]]))
    for (s, c) in zip(UNIT_SQUARE.corners, q.corners):
        mapped = hm.apply(s)
        if abs(mapped.x - c.x) > 1e-9 or abs(mapped.y - c.y) > 1e-9:
            raise SingularConfiguration("solution fails to reproduce corners")
    return hm


def aim_from_quad(q: Quad) -> AimResult:
    """Map the camera center to SR coordinates via the projected corners.

    Exact under perspective: inverts the unit-square-to-quad homography
    at the aim center, so keystone distortion cancels completely when
    the corners are true.
    """
    h = estimate_homography(q)
    p = h.inverse().apply(AIM_CENTER)
    return AimResult(p.x, p.y, Confidence.TWO_COLOR)
