// Shared-screen display page: paints the detectable two-color border
// around the whole viewport and renders live pointer dots plus fading
// fire markers from the server's broadcasts.
//
// Border geometry comes from the server's config push (band thickness,
// colors); dots land at the normalized coordinates times the canvas
// size, so (0.75, 0.5) sits at 75% across and 50% down. ?dots=0 hides
// pointer dots for setups that only want fire markers.

import { BorderSpec, DEFAULT_SEGMENT_FRAC, borderLayout } from "./border.js";
import {
  ConfigPush,
  FLAG_ON_SCREEN,
  PointerBatch,
  ROLE_DISPLAY,
  q16Decode,
} from "./protocol.js";
import { ServerLink, wsUrl } from "./net.js";

export const FIRE_FADE_MS = 600;
export const DOT_RADIUS_FRAC = 0.012; // of canvas height

export interface Dot {
  id: number;
  x: number;
  y: number;
}

/** Batch entries to canvas positions; off-screen entries are skipped. */
export function dotPositions(batch: PointerBatch, w: number, h: number): Dot[] {
  const dots: Dot[] = [];
  for (const e of batch.entries) {
    if (!(e.flags & FLAG_ON_SCREEN)) continue;
    dots.push({ id: e.clientId, x: q16Decode(e.xQ16) * w, y: q16Decode(e.yQ16) * h });
  }
  return dots;
}

/** Fire marker opacity over its lifetime, 1 at impact fading to 0. */
export function fireAlpha(ageMs: number): number {
  if (ageMs < 0) return 1;
  return Math.max(0, 1 - ageMs / FIRE_FADE_MS);
}

// stable palette: same client id always gets the same hue
export function dotColor(id: number): string {
  return `hsl(${(id * 137.508) % 360} 90% 60%)`;
}

export function borderSpecFromConfig(cfg: ConfigPush): BorderSpec {
  return {
    borderFrac: cfg.borderFracQ8 / 255,
    segmentFrac: DEFAULT_SEGMENT_FRAC,
    colorA: cfg.colorA,
    colorB: cfg.colorB,
  };
}

interface FireMark {
  x: number;
  y: number;
  tMs: number;
}

export function initDisplay(): void {
  const canvas = document.getElementById("stage") as HTMLCanvasElement;
  const statusEl = document.getElementById("status")!;
  const ctx = canvas.getContext("2d")!;
  const showDots = new URLSearchParams(location.search).get("dots") !== "0";

  let spec: BorderSpec | null = null;
  let dots: Dot[] = [];
  let fires: FireMark[] = [];

  const resize = () => {
    canvas.width = window.innerWidth;
    canvas.height = window.innerHeight;
  };
  window.addEventListener("resize", resize);
  resize();

  const link = new ServerLink(wsUrl(location), ROLE_DISPLAY, {
    onConfig: (cfg) => {
      spec = borderSpecFromConfig(cfg);
    },
    onBatch: (batch) => {
      dots = dotPositions(batch, canvas.width, canvas.height);
    },
    onFire: (fire) => {
      fires.push({
        x: q16Decode(fire.xQ16) * canvas.width,
        y: q16Decode(fire.yQ16) * canvas.height,
        tMs: performance.now(),
      });
    },
    onStatus: (s) => {
      statusEl.textContent = s === "open" ? "" : s;
    },
  });
  link.connect();

  const draw = () => {
    requestAnimationFrame(draw);
    const { width: w, height: h } = canvas;
    ctx.fillStyle = "#202020";
    ctx.fillRect(0, 0, w, h);
    if (spec) {
      for (const r of borderLayout(spec, w, h)) {
        ctx.fillStyle = `rgb(${r.color[0]} ${r.color[1]} ${r.color[2]})`;
        ctx.fillRect(r.x, r.y, r.w, r.h);
      }
    }

    const now = performance.now();
    fires = fires.filter((f) => now - f.tMs < FIRE_FADE_MS);
    for (const f of fires) {
      const age = now - f.tMs;
      ctx.strokeStyle = `rgba(255, 220, 80, ${fireAlpha(age).toFixed(3)})`;
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.arc(f.x, f.y, 10 + (age / FIRE_FADE_MS) * 30, 0, 2 * Math.PI);
      ctx.stroke();
    }

    if (showDots) {
      const radius = Math.max(4, DOT_RADIUS_FRAC * h);
      for (const d of dots) {
        ctx.fillStyle = dotColor(d.id);
        ctx.beginPath();
        ctx.arc(d.x, d.y, radius, 0, 2 * Math.PI);
        ctx.fill();
      }
    }
  };
  requestAnimationFrame(draw);
}
