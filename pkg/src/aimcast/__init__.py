"""Point a phone camera at a screen, get a cursor position back.

The pipeline: a bordered screen is detected in the camera frame by
color, the border's extents (or the full corner quad) are mapped to a
normalized screen position, and that position is relayed to displays
over a compact binary protocol.
"""

from .config import ConfigError
from .detect import (
    CYAN,
    MAGENTA,
    Blob,
    ColorTarget,
    DetectionConfig,
    NoScreenDetected,
    classify_pixel,
    detect_aim,
    detect_blobs,
    extents_of,
)
from .geometry import (
    AIM_CENTER,
    UNIT_SQUARE,
    AimResult,
    Confidence,
    DegenerateExtent,
    ExtentBox,
    Homography,
    NormPoint,
    PerspectiveDivideByZero,
    Quad,
    ReconcileConflict,
    SingularConfiguration,
    aim_from_extents,
    aim_from_quad,
    estimate_homography,
    reconcile_extents,
    validate_aspect,
)
from .image import Frame, ppm_decode, ppm_encode, read_ppm, write_ppm
from .loadtest import LoadReport, run_loadtest
from .protocol import (
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
    TrailingBytes,
    TruncatedMessage,
    UnknownTag,
    budget_check,
    decode,
    encode,
    q16_decode,
    q16_encode,
)
from .server import PointerServer, ServerConfig
from .simcam import (
    CameraBehindScreen,
    CameraPose,
    Distractor,
    GroundTruth,
    InteriorFill,
    SceneSpec,
    ScreenModel,
    aimed_scene,
    distance_diagonals,
    ground_truth,
    load_scene,
    render,
    save_scene,
    sweep_report,
    view_angle_deg,
)

__version__ = "0.1.0"

__all__ = [
    "AIM_CENTER",
    "CYAN",
    "MAGENTA",
    "UNIT_SQUARE",
    "AimResult",
    "AimUpdate",
    "BandwidthCounter",
    "Blob",
    "CameraBehindScreen",
    "CameraPose",
    "ColorTarget",
    "Confidence",
    "ConfigError",
    "ConfigPush",
    "DegenerateExtent",
    "DetectionConfig",
    "Distractor",
    "ExtentBox",
    "FireEvent",
    "Frame",
    "GroundTruth",
    "Hello",
    "Homography",
    "InteriorFill",
    "LoadReport",
    "NoScreenDetected",
    "NormPoint",
    "PerspectiveDivideByZero",
    "Ping",
    "PointerBatch",
    "PointerEntry",
    "PointerServer",
    "Pong",
    "ProtocolError",
    "Quad",
    "ReconcileConflict",
    "Role",
    "SceneSpec",
    "ScreenModel",
    "ServerConfig",
    "SingularConfiguration",
    "TrailingBytes",
    "TruncatedMessage",
    "UnknownTag",
    "aim_from_extents",
    "aim_from_quad",
    "aimed_scene",
    "budget_check",
    "classify_pixel",
    "decode",
    "detect_aim",
    "detect_blobs",
    "distance_diagonals",
    "encode",
    "estimate_homography",
    "extents_of",
    "ground_truth",
    "load_scene",
    "ppm_decode",
    "ppm_encode",
    "q16_decode",
    "q16_encode",
    "read_ppm",
    "reconcile_extents",
    "render",
    "run_loadtest",
    "save_scene",
    "sweep_report",
    "validate_aspect",
    "view_angle_deg",
    "write_ppm",
]
