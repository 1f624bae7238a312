"""Command line front end.

Exit codes: 0 on success, 1 on usage errors (bad flags or argument
values), 2 on runtime failures (missing files, bad config contents,
ports in use, detection failures, load runs that fail verification).
"""

from __future__ import annotations

import argparse
import asyncio
import signal
import sys
import time
from pathlib import Path

from .detect import DetectionConfig, NoScreenDetected, classify_masks, detect_aim, detect_blobs
from .config import ConfigError
from .geometry import (
    PerspectiveDivideByZero,
    SingularConfiguration,
    aim_from_quad,
)
from .image import read_ppm, write_ppm
from .loadtest import run_loadtest
from .protocol import ProtocolError
from .server import PointerServer, ServerConfig
from .simcam import (
    CameraBehindScreen,
    aimed_scene,
    distance_diagonals,
    load_scene,
    render,
    sweep_report,
    view_angle_deg,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage by default; the contract wants 1."""

    def error(self, message: str):  # noqa: ANN201 - argparse signature
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _dim_int(text: str) -> int:
    value = int(text)
    if value < 16:
        raise argparse.ArgumentTypeError("must be >= 16")
    return value


def _count_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _addr(text: str) -> tuple[str, int]:
    host, sep, port_text = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError("expected HOST:PORT")
    try:
        port = int(port_text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected HOST:PORT") from None
    if not 0 < port < 65536:
        raise argparse.ArgumentTypeError("port out of range")
    return host, port


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aimcast", description="Phone-as-pointer toolkit")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("serve", help="run the relay server")
    p.add_argument("--tcp-port", type=int, default=0, help="native client port (0 picks free)")
    p.add_argument("--http-port", type=int, default=0, help="HTTP/WebSocket port (0 picks free)")
    p.add_argument("--config", help="server config file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static-dir", help="directory of built web assets to serve")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("simulate", help="render one scene and report detection error")
    p.add_argument("--scene", required=True, help="scene description file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="render a scene list and write the error CSV")
    p.add_argument("--scenes", required=True, help="file listing scene paths, one per line")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--config", help="detection config file")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("bench", help="measure detection throughput on a synthetic frame")
    p.add_argument("--width", type=_dim_int, default=640)
    p.add_argument("--height", type=_dim_int, default=480)
    p.add_argument("--seconds", type=_positive_float, default=3.0)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("loadtest", help="drive a server with synthetic pointer clients")
    p.add_argument("--clients", type=_count_int, required=True)
    p.add_argument("--hz", type=_nonneg_float, required=True, help="aim updates per second")
    p.add_argument("--seconds", type=_positive_float, required=True)
    p.add_argument("--addr", type=_addr, required=True, help="server native port, HOST:PORT")
    p.add_argument("--fire-hz", type=_nonneg_float, default=1.0)
    p.add_argument("--metrics-addr", type=_addr, help="server HTTP port for verification")
    p.set_defaults(func=_cmd_loadtest)

    p = sub.add_parser("replay", help="run detection over a directory of frames")
    p.add_argument("--dir", required=True, help="directory of .ppm frames")
    p.add_argument("--config", help="detection config file")
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.set_defaults(func=_cmd_replay)

    return parser


async def _serve(args) -> int:
    config = ServerConfig.from_file(args.config) if args.config else ServerConfig()
    server = PointerServer(
        config=config,
        tcp_port=args.tcp_port,
        http_port=args.http_port,
        host=args.host,
        static_dir=args.static_dir,
    )
    await server.start()
    print(f"tcp_port {server.tcp_port}", flush=True)
    print(f"http_port {server.http_port}", flush=True)
    stop = asyncio.Event()
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        loop.add_signal_handler(sig, stop.set)
    try:
        await stop.wait()
    finally:
        await server.stop()
    return 0


def _cmd_serve(args) -> int:
    return asyncio.run(_serve(args))


def _format_err(value: float | None, failure: str | None) -> str:
    return failure if failure is not None else f"{value:.9f}"


def _cmd_simulate(args) -> int:
    scene = load_scene(args.scene)
    frame, gt = render(scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    ppm_path = out / f"{scene.name}.ppm"
    write_ppm(ppm_path, frame)

    tl, tr, br, bl = gt.corners_cr.corners
    truth_lines = [
        f"aim_sr = {gt.aim_sr[0]!r} {gt.aim_sr[1]!r}",
        f"corner_tl = {tl.x!r} {tl.y!r}",
        f"corner_tr = {tr.x!r} {tr.y!r}",
        f"corner_br = {br.x!r} {br.y!r}",
        f"corner_bl = {bl.x!r} {bl.y!r}",
        f"visible = {1 if gt.visible else 0}",
        f"dist_diag = {distance_diagonals(scene)!r}",
        f"angle_deg = {view_angle_deg(scene)!r}",
    ]
    truth_path = out / f"{scene.name}.truth.txt"
    truth_path.write_text("\n".join(truth_lines) + "\n")

    err_naive: str
    try:
        aim = detect_aim(frame)
        err_naive = _format_err(
            max(abs(aim.x_sr - gt.aim_sr[0]), abs(aim.y_sr - gt.aim_sr[1])), None
        )
    except NoScreenDetected:
        err_naive = "NoScreenDetected"
    try:
        corrected = aim_from_quad(gt.corners_cr)
        err_homog = _format_err(
            max(abs(corrected.x_sr - gt.aim_sr[0]), abs(corrected.y_sr - gt.aim_sr[1])), None
        )
    except (SingularConfiguration, PerspectiveDivideByZero, ValueError) as exc:
        err_homog = type(exc).__name__

    print(f"frame {ppm_path}")
    print(f"truth {truth_path}")
    print(f"err_naive {err_naive}")
    print(f"err_homog {err_homog}")
    return 0


def _read_scene_list(path: str) -> list:
    list_path = Path(path)
    base = list_path.parent
    scenes = []
    for line in list_path.read_text().splitlines():
        entry = line.strip()
        if not entry or entry.startswith("#"):
            continue
        scene_path = Path(entry)
        if not scene_path.is_absolute():
            scene_path = base / scene_path
        scenes.append(load_scene(scene_path))
    return scenes


def _cmd_sweep(args) -> int:
    scenes = _read_scene_list(args.scenes)
    cfg = DetectionConfig.from_file(args.config) if args.config else None
    Path(args.out).write_text(sweep_report(scenes, cfg))
    print(f"wrote {args.out} ({len(scenes)} scenes)")
    return 0


def _cmd_bench(args) -> int:
    scene = aimed_scene(res=(args.width, args.height), screen_frac=0.55, name="bench")
    frame, _ = render(scene)
    cfg = DetectionConfig()
    detect_aim(frame, cfg)  # warm numpy/scipy paths before timing

    frames = 0
    t0 = time.perf_counter()
    while True:
        detect_aim(frame, cfg)
        frames += 1
        elapsed = time.perf_counter() - t0
        if elapsed >= args.seconds:
            break
    fps = frames / elapsed

    reps = max(3, min(frames, 20))

    def avg_ms(fn) -> float:
        start = time.perf_counter()
        for _ in range(reps):
            fn()
        return (time.perf_counter() - start) * 1000.0 / reps

    ms_classify = avg_ms(lambda: classify_masks(frame, cfg))
    ms_blobs = avg_ms(lambda: detect_blobs(frame, cfg))

    print(f"resolution {args.width}x{args.height}")
    print(f"seconds {elapsed:.3f}")
    print(f"frames {frames}")
    print(f"fps {fps:.2f}")
    print(f"ms_per_frame {1000.0 * elapsed / frames:.3f}")
    print(f"ms_classify {ms_classify:.3f}")
    print(f"ms_blobs {ms_blobs:.3f}")
    return 0


def _cmd_loadtest(args) -> int:
    host, port = args.addr
    metrics_host = metrics_port = None
    if args.metrics_addr:
        metrics_host, metrics_port = args.metrics_addr
    report = run_loadtest(
        host,
        port,
        clients=args.clients,
        hz=args.hz,
        seconds=args.seconds,
        fire_hz=args.fire_hz,
        metrics_port=metrics_port,
        metrics_host=metrics_host,
    )
    print(report.to_text(), end="")
    return 0 if report.ok() else 2


def _cmd_replay(args) -> int:
    frames_dir = Path(args.dir)
    if not frames_dir.is_dir():
        raise FileNotFoundError(f"not a directory: {frames_dir}")
    cfg = DetectionConfig.from_file(args.config) if args.config else DetectionConfig()
    rows = ["frame,x_sr,y_sr,confidence"]
    for path in sorted(frames_dir.glob("*.ppm")):
        frame = read_ppm(path)
        try:
            aim = detect_aim(frame, cfg)
            rows.append(f"{path.name},{aim.x_sr:.9f},{aim.y_sr:.9f},{aim.confidence.value}")
        except NoScreenDetected:
            rows.append(f"{path.name},,,NoScreenDetected")
    text = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({len(rows) - 1} frames)")
    else:
        print(text, end="")
    return 0


_RUNTIME_ERRORS = (
    ConfigError,
    ProtocolError,
    CameraBehindScreen,
    NoScreenDetected,
    ValueError,
    OSError,
    ConnectionError,
    RuntimeError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 0
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
