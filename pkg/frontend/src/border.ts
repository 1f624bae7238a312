// Two-color border layout shared by the display page (canvas drawing)
// and the offline rasterizer used in tests.
//
// Layout rules, in pixels with y down: a band of thickness
// round-ish borderFrac * screenH hugs all four edges. The four corner
// squares take color A. Each edge run between corners splits into
// ceil(1/segmentFrac) segments that alternate A, B, A, ... so both
// colors always appear on every edge regardless of aspect.

import type { Rgb } from "./protocol.js";

export interface BorderSpec {
  borderFrac: number; // band thickness as a fraction of screen height
  segmentFrac: number; // segment length as a fraction of the edge run
  colorA: Rgb;
  colorB: Rgb;
}

// the wire config does not carry a segment fraction; both ends assume this
export const DEFAULT_SEGMENT_FRAC = 0.125;

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
  color: Rgb;
}

export function segmentCount(segmentFrac: number): number {
  return Math.max(1, Math.ceil(1 / segmentFrac - 1e-9));
}

/**
 * Decompose the border band of a w*h pixel screen into colored
 * rectangles. Rects tile the band exactly (shared edges, no overlap)
 * so painting them in order reproduces the band; coordinates are
 * floats, callers quantize.
 */
export function borderLayout(spec: BorderSpec, w: number, h: number): Rect[] {
  const bp = spec.borderFrac * h; // band thickness in px
  const nseg = segmentCount(spec.segmentFrac);
  const { colorA, colorB } = spec;
  const rects: Rect[] = [
    { x: 0, y: 0, w: bp, h: bp, color: colorA },
    { x: w - bp, y: 0, w: bp, h: bp, color: colorA },
    { x: 0, y: h - bp, w: bp, h: bp, color: colorA },
    { x: w - bp, y: h - bp, w: bp, h: bp, color: colorA },
  ];

  const segs = (run: number, k: number): [number, number] => {
    const start = k * spec.segmentFrac * run;
    const end = k === nseg - 1 ? run : (k + 1) * spec.segmentFrac * run;
    return [start, end];
  };

  const runX = w - 2 * bp; // horizontal edge run between the corners
  const runY = h - 2 * bp;
  for (let k = 0; k < nseg; k++) {
    const color = k % 2 === 0 ? colorA : colorB;
    const [hx0, hx1] = segs(runX, k);
    rects.push({ x: bp + hx0, y: 0, w: hx1 - hx0, h: bp, color });
    rects.push({ x: bp + hx0, y: h - bp, w: hx1 - hx0, h: bp, color });
    const [vy0, vy1] = segs(runY, k);
    rects.push({ x: 0, y: bp + vy0, w: bp, h: vy1 - vy0, color });
    rects.push({ x: w - bp, y: bp + vy0, w: bp, h: vy1 - vy0, color });
  }
  return rects;
}

/**
 * Render the border onto an interior-colored frame. A pixel belongs to
 * a rect when its center falls inside [x, x+w) x [y, y+h), so adjacent
 * rects never double-paint. Returns packed RGB rows, 3 bytes per pixel.
 */
export function rasterizeBorder(
  spec: BorderSpec,
  w: number,
  h: number,
  interior: Rgb,
): Uint8Array {
  const pixels = new Uint8Array(w * h * 3);
  for (let i = 0; i < w * h; i++) pixels.set(interior, i * 3);
  for (const r of rects3x(borderLayout(spec, w, h), w, h)) {
    const [x0, x1, y0, y1, color] = r;
    for (let y = y0; y < y1; y++) {
      for (let x = x0; x < x1; x++) pixels.set(color, (y * w + x) * 3);
    }
  }
  return pixels;
}

// pixel i is covered when its center i+0.5 lies in [lo, hi)
function pixelSpan(lo: number, hi: number, limit: number): [number, number] {
  const first = Math.max(0, Math.ceil(lo - 0.5));
  const last = Math.min(limit, Math.ceil(hi - 0.5));
  return [first, last];
}

function rects3x(
  rects: Rect[],
  w: number,
  h: number,
): [number, number, number, number, Rgb][] {
  return rects.map((r) => {
    const [x0, x1] = pixelSpan(r.x, r.x + r.w, w);
    const [y0, y1] = pixelSpan(r.y, r.y + r.h, h);
    return [x0, x1, y0, y1, r.color];
  });
}

/** Binary PPM (P6, maxval 255); the server's tooling reads this format. */
export function encodePpm(w: number, h: number, pixels: Uint8Array): Uint8Array {
  if (pixels.length !== w * h * 3) {
    throw new RangeError(`pixel buffer is ${pixels.length} bytes, want ${w * h * 3}`);
  }
  const header = new TextEncoder().encode(`P6\n${w} ${h}\n255\n`);
  const out = new Uint8Array(header.length + pixels.length);
  out.set(header, 0);
  out.set(pixels, header.length);
  return out;
}
