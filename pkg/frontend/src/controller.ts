// Phone controller page: camera in, aim out.
//
// Every animation frame grabs the rear camera image, downscales it to
// at most DETECT_MAX_W wide, runs the border detection pipeline on the
// pixels locally (frames never leave the device), and streams the
// resulting aim point to the server, throttled and coalesced to
// AIM_SEND_HZ. The fire button stamps the last known aim.
//
// All DOM work happens inside initController so the module stays
// importable from tests; the pure helpers above it are what the tests
// exercise.

import {
  Aim,
  ColorTarget,
  DEFAULT_TOLERANCE,
  PipelineResult,
  defaultTargets,
  onScreen,
  runPipeline,
} from "./detect.js";
import { ROLE_POINTER, aimFromSr, fireFromSr } from "./protocol.js";
import { ServerLink, wsUrl } from "./net.js";
import { AimThrottle } from "./throttle.js";

export const DETECT_MAX_W = 640; // detection input cap, px
export const AIM_SEND_HZ = 30;

export interface OverlayRect {
  x: number;
  y: number;
  w: number;
  h: number;
  colorIndex: number;
}

/**
 * One debug rectangle per detected blob, scaled from detection
 * resolution to overlay resolution. The overlay draws exactly these,
 * so rect count always equals blob count.
 */
export function overlayRects(
  result: PipelineResult,
  scaleX: number,
  scaleY: number,
): OverlayRect[] {
  return result.blobs.map((b) => ({
    x: b.left * scaleX,
    y: b.top * scaleY,
    w: (b.right - b.left + 1) * scaleX,
    h: (b.bottom - b.top + 1) * scaleY,
    colorIndex: b.colorIndex,
  }));
}

export function detectSize(videoW: number, videoH: number): [number, number] {
  const scale = Math.min(1, DETECT_MAX_W / videoW);
  return [Math.max(1, Math.round(videoW * scale)), Math.max(1, Math.round(videoH * scale))];
}

export function initController(): void {
  const video = document.getElementById("cam") as HTMLVideoElement;
  const overlay = document.getElementById("overlay") as HTMLCanvasElement;
  const statusEl = document.getElementById("status")!;
  const aimEl = document.getElementById("aim")!;
  const confEl = document.getElementById("conf")!;
  const fireBtn = document.getElementById("fire") as HTMLButtonElement;
  const debugToggle = document.getElementById("debug") as HTMLInputElement;

  const work = document.createElement("canvas");
  const workCtx = work.getContext("2d", { willReadFrequently: true })!;
  const overlayCtx = overlay.getContext("2d")!;

  let targets: ColorTarget[] = defaultTargets();
  let lastAim: Aim | null = null;
  const throttle = new AimThrottle<Uint8Array>(AIM_SEND_HZ);

  const link = new ServerLink(wsUrl(location), ROLE_POINTER, {
    onConfig: (cfg) => {
      targets = [
        { rgb: cfg.colorA, tolerance: DEFAULT_TOLERANCE },
        { rgb: cfg.colorB, tolerance: DEFAULT_TOLERANCE },
      ];
    },
    onStatus: (s) => {
      statusEl.textContent = s;
    },
  });
  link.connect();

  fireBtn.addEventListener("click", () => {
    if (!lastAim) return;
    link.send(fireFromSr(lastAim.xSr, lastAim.ySr));
    fireBtn.classList.add("hit");
    setTimeout(() => fireBtn.classList.remove("hit"), 150);
  });

  const drawOverlay = (result: PipelineResult, dw: number, dh: number) => {
    overlay.width = video.clientWidth;
    overlay.height = video.clientHeight;
    overlayCtx.clearRect(0, 0, overlay.width, overlay.height);
    if (!debugToggle.checked) return;
    const rects = overlayRects(result, overlay.width / dw, overlay.height / dh);
    overlayCtx.lineWidth = 2;
    for (const r of rects) {
      overlayCtx.strokeStyle = r.colorIndex === 0 ? "#f0f" : "#0ff";
      overlayCtx.strokeRect(r.x, r.y, r.w, r.h);
    }
    // crosshair at the frame center, where the aim is read from
    overlayCtx.strokeStyle = "#fff";
    overlayCtx.beginPath();
    overlayCtx.moveTo(overlay.width / 2 - 12, overlay.height / 2);
    overlayCtx.lineTo(overlay.width / 2 + 12, overlay.height / 2);
    overlayCtx.moveTo(overlay.width / 2, overlay.height / 2 - 12);
    overlayCtx.lineTo(overlay.width / 2, overlay.height / 2 + 12);
    overlayCtx.stroke();
  };

  const tick = () => {
    requestAnimationFrame(tick);
    if (video.readyState < 2 || video.videoWidth === 0) return;
    const [dw, dh] = detectSize(video.videoWidth, video.videoHeight);
    if (work.width !== dw || work.height !== dh) {
      work.width = dw;
      work.height = dh;
    }
    workCtx.drawImage(video, 0, 0, dw, dh);
    const rgba = workCtx.getImageData(0, 0, dw, dh).data;
    const result = runPipeline(rgba, dw, dh, { targets });

    confEl.textContent = result.confidence;
    confEl.className = `conf-${result.confidence}`;
    if (result.aim) {
      lastAim = result.aim;
      aimEl.textContent = `${result.aim.xSr.toFixed(3)}, ${result.aim.ySr.toFixed(3)}`;
      const flagsOn = onScreen(result.aim);
      const pending = throttle.offer(
        aimFromSr(result.aim.xSr, result.aim.ySr, flagsOn),
        performance.now(),
      );
      if (pending) link.send(pending);
    } else {
      aimEl.textContent = "no screen";
    }
    drawOverlay(result, dw, dh);
  };

  // coalesced sends must still go out when frames slow down
  setInterval(() => {
    const pending = throttle.flush(performance.now());
    if (pending) link.send(pending);
  }, 1000 / AIM_SEND_HZ);

  navigator.mediaDevices
    .getUserMedia({ video: { facingMode: "environment" }, audio: false })
    .then((stream) => {
      video.srcObject = stream;
      return video.play();
    })
    .then(() => requestAnimationFrame(tick))
    .catch((err) => {
      statusEl.textContent = `camera error: ${err instanceof Error ? err.message : err}`;
    });
}
