"""Synthetic pinhole camera over a bordered virtual screen.

World frame: the screen lives on the plane z = 0 and spans x in
[0, aspect], y in [0, 1], with y pointing down so raster order and world
order agree.  All lengths are in screen-height units.  The camera sits
at negative z and looks toward +z; yaw rotates about the y axis, pitch
about x, roll about z (applied in that order).

The renderer ray-casts pixel centers with a z-buffer over the screen and
any distractor planes; there is no anti-aliasing, so color edges are
exact.  Ground truth (true aim point and true projected corners) comes
from pose algebra alone, never from rendered pixels, which is what makes
it usable as an accuracy oracle for the detection pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .config import ConfigError, parse_kv, parse_rgb, reject_unknown, single
from .detect import DetectionConfig, NoScreenDetected, detect_aim
from .geometry import (
    EPS_GEOM,
    AimResult,
    NormPoint,
    PerspectiveDivideByZero,
    Quad,
    SingularConfiguration,
    aim_from_quad,
)
from .image import Frame, read_ppm

DEFAULT_COLOR_A = (255, 0, 255)
DEFAULT_COLOR_B = (0, 255, 255)

SWEEP_CSV_HEADER = "scene,dist_diag,angle_deg,err_naive,err_homog"


class CameraBehindScreen(Exception):
    """The optical axis does not meet the screen plane from the front."""


@dataclass(frozen=True)
class InteriorFill:
    """What to draw inside the border band: solid color, noise, or an image.

    Interior content is irrelevant to detection (its features can only lie
    inside the border extremes), so scenes vary it to prove exactly that.
    """

    mode: str = "solid"
    color: tuple[int, int, int] = (32, 32, 32)
    image: Frame | None = None
    image_path: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("solid", "random", "image"):
            raise ValueError(f"unknown interior mode: {self.mode!r}")
        if self.mode == "image" and self.image is None:
            raise ValueError("image mode needs an image")

    @classmethod
    def solid(cls, rgb: tuple[int, int, int]) -> InteriorFill:
        return cls("solid", color=rgb)

    @classmethod
    def random(cls) -> InteriorFill:
        return cls("random")

    @classmethod
    def from_image(cls, frame: Frame, path: str | None = None) -> InteriorFill:
        return cls("image", image=frame, image_path=path)


@dataclass(frozen=True)
class ScreenModel:
    """The bordered screen: geometry plus the two-color edge pattern.

    ``border_frac`` is the band thickness as a fraction of screen height;
    ``segment_frac`` is the length of each alternating color segment as a
    fraction of its edge.  Corner squares take color A.
    """

    aspect: float = 16 / 9
    border_frac: float = 0.02
    segment_frac: float = 0.125
    color_a: tuple[int, int, int] = DEFAULT_COLOR_A
    color_b: tuple[int, int, int] = DEFAULT_COLOR_B
    interior: InteriorFill = field(default_factory=InteriorFill)

    def __post_init__(self) -> None:
        if self.aspect <= 0:
            raise ValueError("aspect must be positive")
        if not 0 < self.border_frac < 0.5:
            raise ValueError("border_frac must be in (0, 0.5)")
        if 2 * self.border_frac >= self.aspect:
            raise ValueError("border thicker than half the screen width")
        if not 0 < self.segment_frac <= 1:
            raise ValueError("segment_frac must be in (0, 1]")


@dataclass(frozen=True)
class CameraPose:
    """Camera placement, orientation (radians), optics, and sensor size."""

    position: tuple[float, float, float]
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    fov_h: float = math.radians(50.0)
    res_w: int = 640
    res_h: int = 480

    def __post_init__(self) -> None:
        if not 0 < self.fov_h < math.pi:
            raise ValueError("fov_h must be in (0, pi)")
        if self.res_w < 16 or self.res_h < 16:
            raise ValueError("resolution must be at least 16x16")


@dataclass(frozen=True)
class Distractor:
    """A colored rectangle on a plane parallel to the screen (z constant)."""

    z: float
    x0: float
    x1: float
    y0: float
    y1: float
    color: tuple[int, int, int]

    def __post_init__(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("distractor rectangle is empty")
        if not all(0 <= c <= 255 for c in self.color):
            raise ValueError(f"color channels out of range: {self.color}")


@dataclass(frozen=True)
class SceneSpec:
    """Everything needed to render one frame deterministically."""

    camera: CameraPose
    screen: ScreenModel = field(default_factory=ScreenModel)
    distractors: tuple[Distractor, ...] = ()
    background: tuple[int, int, int] = (0, 0, 0)
    name: str = "scene"
    seed: int = 0
    blur_radius: int = 0
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        if "," in self.name or "\n" in self.name or not self.name:
            raise ValueError(f"scene name unusable in CSV: {self.name!r}")
        if self.blur_radius < 0:
            raise ValueError("blur_radius must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        a = self.screen.aspect
        for d in self.distractors:
            if d.z == 0.0 and d.x1 > 0 and d.x0 < a and d.y1 > 0 and d.y0 < 1:
                raise ValueError(f"distractor intersects the screen rectangle: {d}")


@dataclass(frozen=True)
class GroundTruth:
    """Analytic truth for a scene: aim point, projected corners, visibility.

    ``corners_cr`` are the four screen corners projected to CR in
    top-left, top-right, bottom-right, bottom-left order; ``visible`` is
    true iff all four land inside the frame (which, by convexity, puts
    the whole border in view).
    """

    aim_sr: tuple[float, float]
    corners_cr: Quad
    visible: bool


def rotation_matrix(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Camera-to-world rotation: Ry(yaw) @ Rx(pitch) @ Rz(roll)."""
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return ry @ rx @ rz


def _axis_hit(scene: SceneSpec) -> tuple[np.ndarray, float]:
    """Intersection of the optical axis with the screen plane, plus range."""
    cam = scene.camera
    pos = np.array(cam.position, dtype=np.float64)
    axis = rotation_matrix(cam.yaw, cam.pitch, cam.roll) @ np.array([0.0, 0.0, 1.0])
    if pos[2] >= 0.0:
        raise CameraBehindScreen(f"camera must be at z < 0, got z = {pos[2]}")
    if axis[2] <= EPS_GEOM:
        raise CameraBehindScreen("optical axis points away from the screen plane")
    t_hit = -pos[2] / axis[2]
    return pos + t_hit * axis, t_hit


def ground_truth(scene: SceneSpec) -> GroundTruth:
    """True aim point and corner projections from pose algebra alone."""
    cam = scene.camera
    a = scene.screen.aspect
    hit, _ = _axis_hit(scene)
    aim_sr = (float(hit[0] / a), float(hit[1]))

    rot = rotation_matrix(cam.yaw, cam.pitch, cam.roll)
    pos = np.array(cam.position, dtype=np.float64)
    span = 2.0 * math.tan(cam.fov_h / 2.0)
    pixel_aspect_fix = cam.res_w / cam.res_h
    points = []
    visible = True
    for cx, cy in ((0.0, 0.0), (a, 0.0), (a, 1.0), (0.0, 1.0)):
        q = rot.T @ (np.array([cx, cy, 0.0]) - pos)
        if q[2] <= EPS_GEOM:
            raise CameraBehindScreen("a screen corner lies behind the camera")
        x_cr = 0.5 + (q[0] / q[2]) / span
        y_cr = 0.5 + (q[1] / q[2]) * pixel_aspect_fix / span
        points.append(NormPoint(float(x_cr), float(y_cr)))
        if not (0.0 <= x_cr <= 1.0 and 0.0 <= y_cr <= 1.0):
            visible = False
    return GroundTruth(aim_sr=aim_sr, corners_cr=Quad(tuple(points)), visible=visible)


def view_angle_deg(scene: SceneSpec) -> float:
    """Angle between the optical axis and the screen normal, degrees."""
    cam = scene.camera
    axis = rotation_matrix(cam.yaw, cam.pitch, cam.roll) @ np.array([0.0, 0.0, 1.0])
    return math.degrees(math.acos(max(-1.0, min(1.0, axis[2]))))


def distance_diagonals(scene: SceneSpec) -> float:
    """Camera-to-aim-point range in screen diagonals."""
    _, t_hit = _axis_hit(scene)
    return float(t_hit) / math.hypot(scene.screen.aspect, 1.0)


def _screen_colors(
    scene: SceneSpec, sx: np.ndarray, sy: np.ndarray, ii: np.ndarray, jj: np.ndarray
) -> np.ndarray:
    """Colors for screen-plane hit points (sx, sy), one RGB row per hit."""
    screen = scene.screen
    a = screen.aspect
    bf = screen.border_frac
    out = np.empty((sx.size, 3), dtype=np.uint8)

    fill = screen.interior
    if fill.mode == "solid":
        out[:] = fill.color
    elif fill.mode == "random":
        rng = np.random.default_rng((scene.seed, 0))
        cam = scene.camera
        noise = rng.integers(0, 256, size=(cam.res_h, cam.res_w, 3), dtype=np.uint8)
        out[:] = noise[ii, jj]
    else:
        img = fill.image
        ui = np.clip((sx / a) * img.width, 0, img.width - 1).astype(np.int64)
        vi = np.clip(sy * img.height, 0, img.height - 1).astype(np.int64)
        out[:] = img.array[vi, ui]

    left = sx < bf
    right = sx > a - bf
    top = sy < bf
    bottom = sy > 1.0 - bf
    corner = (left | right) & (top | bottom)
    col_a = np.array(screen.color_a, dtype=np.uint8)
    col_b = np.array(screen.color_b, dtype=np.uint8)
    nseg = max(1, math.ceil(1.0 / screen.segment_frac - 1e-9))

    def paint(mask: np.ndarray, frac: np.ndarray) -> None:
        seg = np.clip((frac / screen.segment_frac).astype(np.int64), 0, nseg - 1)
        colors = np.where((seg % 2 == 0)[:, None], col_a[None, :], col_b[None, :])
        out[mask] = colors[mask]

    horizontal = (top | bottom) & ~corner
    if horizontal.any():
        paint(horizontal, (sx - bf) / (a - 2 * bf))
    vertical = (left | right) & ~corner & ~(top | bottom)
    if vertical.any():
        paint(vertical, (sy - bf) / (1.0 - 2 * bf))
    out[corner] = col_a
    return out


def render(scene: SceneSpec) -> tuple[Frame, GroundTruth]:
    """Ray-cast the scene to a frame; ground truth comes along for free."""
    gt = ground_truth(scene)
    cam, screen = scene.camera, scene.screen
    w, h = cam.res_w, cam.res_h
    rot = rotation_matrix(cam.yaw, cam.pitch, cam.roll)
    pos = np.array(cam.position, dtype=np.float64)
    span = 2.0 * math.tan(cam.fov_h / 2.0)

    # per-pixel ray directions in world space (camera rays have z=1)
    dcx = ((np.arange(w) + 0.5) / w - 0.5) * span
    dcy = ((np.arange(h) + 0.5) / h - 0.5) * (span * h / w)
    dwx = rot[0, 0] * dcx[None, :] + rot[0, 1] * dcy[:, None] + rot[0, 2]
    dwy = rot[1, 0] * dcx[None, :] + rot[1, 1] * dcy[:, None] + rot[1, 2]
    dwz = rot[2, 0] * dcx[None, :] + rot[2, 1] * dcy[:, None] + rot[2, 2]

    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = scene.background
    depth = np.full((h, w), np.inf)

    def cast(z_plane: float, x0: float, x1: float, y0: float, y1: float):
        with np.errstate(divide="ignore", invalid="ignore"):
            t_hit = (z_plane - pos[2]) / dwz
        px = pos[0] + t_hit * dwx
        py = pos[1] + t_hit * dwy
        hit = np.isfinite(t_hit) & (t_hit > EPS_GEOM) & (t_hit < depth)
        hit &= (px >= x0) & (px <= x1) & (py >= y0) & (py <= y1)
        return hit, px, py, t_hit

    hit, px, py, t_hit = cast(0.0, 0.0, screen.aspect, 0.0, 1.0)
    if hit.any():
        ii, jj = np.nonzero(hit)
        img[ii, jj] = _screen_colors(scene, px[hit], py[hit], ii, jj)
        depth[hit] = t_hit[hit]
    for d in scene.distractors:
        hit, px, py, t_hit = cast(d.z, d.x0, d.x1, d.y0, d.y1)
        if hit.any():
            img[hit] = d.color
            depth[hit] = t_hit[hit]

    if scene.blur_radius > 0:
        size = 2 * scene.blur_radius + 1
        blurred = ndimage.uniform_filter(img.astype(np.float32), size=(size, size, 1), mode="nearest")
        img = np.clip(np.rint(blurred), 0, 255).astype(np.uint8)
    if scene.noise_sigma > 0:
        rng = np.random.default_rng((scene.seed, 1))
        noisy = img.astype(np.float64) + rng.normal(0.0, scene.noise_sigma, img.shape)
        img = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)

    return Frame(img), gt


def aimed_scene(
    aim: tuple[float, float] = (0.5, 0.5),
    dist_diag: float = 2.0,
    yaw_deg: float = 0.0,
    pitch_deg: float = 0.0,
    roll_deg: float = 0.0,
    screen_frac: float = 0.5,
    res: tuple[int, int] = (640, 480),
    aspect: float = 16 / 9,
    name: str = "scene",
    border_frac: float = 0.02,
    segment_frac: float = 0.125,
    interior: InteriorFill | None = None,
    distractors: tuple[Distractor, ...] = (),
    seed: int = 0,
    blur_radius: int = 0,
    noise_sigma: float = 0.0,
) -> SceneSpec:
    """Scene whose optical axis hits the given SR aim point exactly.

    The camera is placed ``dist_diag`` screen diagonals back along its own
    view axis (so yaw/pitch/roll change position, not the aim), and the
    field of view is chosen so a perpendicular view of the screen spans
    ``screen_frac`` of the frame width.
    """
    diag = math.hypot(aspect, 1.0)
    length = dist_diag * diag
    rot = rotation_matrix(math.radians(yaw_deg), math.radians(pitch_deg), math.radians(roll_deg))
    axis = rot @ np.array([0.0, 0.0, 1.0])
    target = np.array([aim[0] * aspect, aim[1], 0.0])
    pos = target - length * axis
    if pos[2] >= 0.0:
        raise ValueError("angles put the camera at or behind the screen plane")
    if not 0 < screen_frac:
        raise ValueError("screen_frac must be positive")
    fov_h = 2.0 * math.atan(aspect / (2.0 * length * screen_frac))
    camera = CameraPose(
        position=(float(pos[0]), float(pos[1]), float(pos[2])),
        yaw=math.radians(yaw_deg),
        pitch=math.radians(pitch_deg),
        roll=math.radians(roll_deg),
        fov_h=fov_h,
        res_w=res[0],
        res_h=res[1],
    )
    screen = ScreenModel(
        aspect=aspect,
        border_frac=border_frac,
        segment_frac=segment_frac,
        interior=interior if interior is not None else InteriorFill(),
    )
    return SceneSpec(
        camera=camera,
        screen=screen,
        distractors=distractors,
        name=name,
        seed=seed,
        blur_radius=blur_radius,
        noise_sigma=noise_sigma,
    )


def _aim_error(aim: AimResult, gt: GroundTruth) -> float:
    """Worst per-axis absolute SR error (infinity norm)."""
    return max(abs(aim.x_sr - gt.aim_sr[0]), abs(aim.y_sr - gt.aim_sr[1]))


def sweep_report(scenes: list[SceneSpec], cfg: DetectionConfig | None = None) -> str:
    """Accuracy CSV over scenes: naive (pixel extents) vs corrected (true corners).

    A scene whose pipeline fails contributes a row with the error class
    name in the affected column; the sweep always runs to completion.
    """
    lines = [SWEEP_CSV_HEADER]
    for scene in scenes:
        try:
            frame, gt = render(scene)
        except CameraBehindScreen as exc:
            lines.append(f"{scene.name},,,{type(exc).__name__},{type(exc).__name__}")
            continue
        dist = f"{distance_diagonals(scene):.4f}"
        angle = f"{view_angle_deg(scene):.2f}"
        try:
            err_naive = f"{_aim_error(detect_aim(frame, cfg), gt):.9f}"
        except NoScreenDetected:
            err_naive = "NoScreenDetected"
        try:
            err_homog = f"{_aim_error(aim_from_quad(gt.corners_cr), gt):.9f}"
        except (SingularConfiguration, PerspectiveDivideByZero, ValueError) as exc:
            err_homog = type(exc).__name__
        lines.append(f"{scene.name},{dist},{angle},{err_naive},{err_homog}")
    return "\n".join(lines) + "\n"


_SCENE_KEYS = {
    "name", "aspect", "border_frac", "segment_frac", "color_a", "color_b",
    "interior", "interior_rgb", "interior_image", "background",
    "pos", "yaw_deg", "pitch_deg", "roll_deg", "fov_deg", "res",
    "seed", "blur_radius", "noise_sigma", "distractor",
}


def _parse_floats(text: str, count: int, source: str) -> list[float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise ConfigError(f"{source}: expected {count} comma-separated numbers, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"{source}: non-numeric value in {text!r}") from exc


def parse_scene(text: str, source: str = "<string>", base_dir: str | Path = ".") -> SceneSpec:
    """Parse a key=value scene file (angles in degrees, res as WxH)."""
    kv = parse_kv(text, source)
    reject_unknown(kv, _SCENE_KEYS, source)

    def opt(key: str, default: str) -> str:
        return single(kv, key, source) if key in kv else default

    interior_mode = opt("interior", "solid")
    if interior_mode == "solid":
        interior = InteriorFill.solid(parse_rgb(opt("interior_rgb", "32,32,32"), source))
    elif interior_mode == "random":
        interior = InteriorFill.random()
    elif interior_mode == "image":
        if "interior_image" not in kv:
            raise ConfigError(f"{source}: interior = image needs interior_image")
        rel = single(kv, "interior_image", source)
        frame = read_ppm(Path(base_dir) / rel)
        interior = InteriorFill.from_image(frame, path=rel)
    else:
        raise ConfigError(f"{source}: unknown interior mode {interior_mode!r}")

    res_text = opt("res", "640x480")
    try:
        res_w, res_h = (int(p) for p in res_text.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"{source}: res must be WxH, got {res_text!r}") from exc

    pos = _parse_floats(opt("pos", "0.888888888888889,0.5,-2.0"), 3, source)
    distractors = []
    for text_d in kv.get("distractor", []):
        vals = _parse_floats(text_d, 8, source)
        if any(v != int(v) or not 0 <= v <= 255 for v in vals[5:8]):
            raise ConfigError(f"{source}: distractor color must be integers 0-255 in {text_d!r}")
        rgb = (int(vals[5]), int(vals[6]), int(vals[7]))
        distractors.append(Distractor(vals[0], vals[1], vals[2], vals[3], vals[4], rgb))

    try:
        camera = CameraPose(
            position=(pos[0], pos[1], pos[2]),
            yaw=math.radians(float(opt("yaw_deg", "0"))),
            pitch=math.radians(float(opt("pitch_deg", "0"))),
            roll=math.radians(float(opt("roll_deg", "0"))),
            fov_h=math.radians(float(opt("fov_deg", "50"))),
            res_w=res_w,
            res_h=res_h,
        )
        screen = ScreenModel(
            aspect=float(opt("aspect", repr(16 / 9))),
            border_frac=float(opt("border_frac", "0.02")),
            segment_frac=float(opt("segment_frac", "0.125")),
            color_a=parse_rgb(opt("color_a", "255,0,255"), source),
            color_b=parse_rgb(opt("color_b", "0,255,255"), source),
            interior=interior,
        )
        return SceneSpec(
            camera=camera,
            screen=screen,
            distractors=tuple(distractors),
            background=parse_rgb(opt("background", "0,0,0"), source),
            name=opt("name", "scene"),
            seed=int(opt("seed", "0")),
            blur_radius=int(opt("blur_radius", "0")),
            noise_sigma=float(opt("noise_sigma", "0")),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_scene(path: str | Path) -> SceneSpec:
    p = Path(path)
    return parse_scene(p.read_text(encoding="utf-8"), source=str(p), base_dir=p.parent)


def scene_to_text(scene: SceneSpec) -> str:
    """Serialize a scene; parse_scene(scene_to_text(s)) reproduces s exactly."""
    cam, screen = scene.camera, scene.screen
    lines = [
        f"name = {scene.name}",
        f"aspect = {screen.aspect!r}",
        f"border_frac = {screen.border_frac!r}",
        f"segment_frac = {screen.segment_frac!r}",
        f"color_a = {screen.color_a[0]},{screen.color_a[1]},{screen.color_a[2]}",
        f"color_b = {screen.color_b[0]},{screen.color_b[1]},{screen.color_b[2]}",
        f"interior = {screen.interior.mode}",
    ]
    if screen.interior.mode == "solid":
        c = screen.interior.color
        lines.append(f"interior_rgb = {c[0]},{c[1]},{c[2]}")
    elif screen.interior.mode == "image":
        if screen.interior.image_path is None:
            raise ValueError("cannot serialize an in-memory interior image")
        lines.append(f"interior_image = {screen.interior.image_path}")
    b = scene.background
    lines += [
        f"background = {b[0]},{b[1]},{b[2]}",
        f"pos = {cam.position[0]!r},{cam.position[1]!r},{cam.position[2]!r}",
        f"yaw_deg = {math.degrees(cam.yaw)!r}",
        f"pitch_deg = {math.degrees(cam.pitch)!r}",
        f"roll_deg = {math.degrees(cam.roll)!r}",
        f"fov_deg = {math.degrees(cam.fov_h)!r}",
        f"res = {cam.res_w}x{cam.res_h}",
        f"seed = {scene.seed}",
        f"blur_radius = {scene.blur_radius}",
        f"noise_sigma = {scene.noise_sigma!r}",
    ]
    for d in scene.distractors:
        lines.append(
            f"distractor = {d.z!r},{d.x0!r},{d.x1!r},{d.y0!r},{d.y1!r},"
            f"{d.color[0]},{d.color[1]},{d.color[2]}"
        )
    return "\n".join(lines) + "\n"


def save_scene(path: str | Path, scene: SceneSpec) -> None:
    Path(path).write_text(scene_to_text(scene), encoding="utf-8")
