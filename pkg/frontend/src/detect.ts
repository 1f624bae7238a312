// On-device screen detection: classify border colors in an RGBA frame,
// group them into connected blobs, and map the frame center to screen
// coordinates. Pure typed-array code, no DOM, so it runs in tests and
// could move to a worker unchanged.
//
// Coordinate convention matches the server: normalized [0,1] per axis,
// y down; the aim map extends linearly past [0,1] when the camera
// center is outside the detected screen.

export interface ColorTarget {
  rgb: [number, number, number];
  tolerance: number; // euclidean RGB distance
}

export const MAGENTA: [number, number, number] = [255, 0, 255];
export const CYAN: [number, number, number] = [0, 255, 255];
export const DEFAULT_TOLERANCE = 60;

export function defaultTargets(): ColorTarget[] {
  return [
    { rgb: MAGENTA, tolerance: DEFAULT_TOLERANCE },
    { rgb: CYAN, tolerance: DEFAULT_TOLERANCE },
  ];
}

// blobs below ceil(w*h/4096) px are treated as sensor noise
export function defaultMinArea(w: number, h: number): number {
  return Math.ceil((w * h) / 4096);
}

export interface Blob {
  colorIndex: number;
  left: number; // inclusive pixel bbox
  top: number;
  right: number;
  bottom: number;
  area: number;
}

export interface Extents {
  xMin: number; // normalized, half-open: left/w .. (right+1)/w
  xMax: number;
  yMin: number;
  yMax: number;
}

const EPS_GEOM = 1e-9;

/**
 * Label every pixel with the index of the first target within its
 * tolerance, or -1. RGBA input (canvas ImageData layout), alpha ignored.
 */
export function classifyPixels(
  rgba: Uint8ClampedArray | Uint8Array,
  w: number,
  h: number,
  targets: ColorTarget[],
): Int8Array {
  const labels = new Int8Array(w * h).fill(-1);
  const n = targets.length;
  for (let i = 0; i < w * h; i++) {
    const r = rgba[i * 4];
    const g = rgba[i * 4 + 1];
    const b = rgba[i * 4 + 2];
    for (let t = 0; t < n; t++) {
      const [tr, tg, tb] = targets[t].rgb;
      const dr = r - tr;
      const dg = g - tg;
      const db = b - tb;
      if (dr * dr + dg * dg + db * db <= targets[t].tolerance ** 2) {
        labels[i] = t;
        break;
      }
    }
  }
  return labels;
}

/** 4-connected components per color label, small ones dropped. */
export function findBlobs(
  labels: Int8Array,
  w: number,
  h: number,
  minArea: number,
): Blob[] {
  const seen = new Uint8Array(w * h);
  const stack = new Int32Array(w * h);
  const blobs: Blob[] = [];
  for (let start = 0; start < w * h; start++) {
    const color = labels[start];
    if (color < 0 || seen[start]) continue;
    let top = start / w | 0;
    let bottom = top;
    let left = start % w;
    let right = left;
    let area = 0;
    let sp = 0;
    stack[sp++] = start;
    seen[start] = 1;
    while (sp > 0) {
      const p = stack[--sp];
      const y = p / w | 0;
      const x = p - y * w;
      area++;
      if (x < left) left = x;
      if (x > right) right = x;
      if (y < top) top = y;
      if (y > bottom) bottom = y;
      if (x > 0 && !seen[p - 1] && labels[p - 1] === color) {
        seen[p - 1] = 1;
        stack[sp++] = p - 1;
      }
      if (x < w - 1 && !seen[p + 1] && labels[p + 1] === color) {
        seen[p + 1] = 1;
        stack[sp++] = p + 1;
      }
      if (y > 0 && !seen[p - w] && labels[p - w] === color) {
        seen[p - w] = 1;
        stack[sp++] = p - w;
      }
      if (y < h - 1 && !seen[p + w] && labels[p + w] === color) {
        seen[p + w] = 1;
        stack[sp++] = p + w;
      }
    }
    if (area >= minArea) {
      blobs.push({ colorIndex: color, left, top, right, bottom, area });
    }
  }
  return blobs;
}

/** Union of one color's blob boxes, normalized with half-open pixel edges. */
export function extentsOf(
  blobs: Blob[],
  colorIndex: number,
  w: number,
  h: number,
): Extents | null {
  let left = Infinity;
  let right = -Infinity;
  let top = Infinity;
  let bottom = -Infinity;
  let any = false;
  for (const blob of blobs) {
    if (blob.colorIndex !== colorIndex) continue;
    any = true;
    if (blob.left < left) left = blob.left;
    if (blob.right > right) right = blob.right;
    if (blob.top < top) top = blob.top;
    if (blob.bottom > bottom) bottom = blob.bottom;
  }
  if (!any) return null;
  return {
    xMin: left / w,
    xMax: (right + 1) / w,
    yMin: top / h,
    yMax: (bottom + 1) / h,
  };
}

/**
 * Per bound, keep the value closer to the screen interior: a false
 * feature outside the screen only pushes a bound outward, so the less
 * extreme bound is the trustworthy one. Disjoint results mean both
 * colors saw different false features; report null rather than guess.
 */
export function reconcileExtents(a: Extents, b: Extents): Extents | null {
  const out = {
    xMin: Math.max(a.xMin, b.xMin),
    xMax: Math.min(a.xMax, b.xMax),
    yMin: Math.max(a.yMin, b.yMin),
    yMax: Math.min(a.yMax, b.yMax),
  };
  if (out.xMin > out.xMax || out.yMin > out.yMax) return null;
  return out;
}

export interface Aim {
  xSr: number;
  ySr: number;
}

/** Signed linear map of the frame center through the extent box. */
export function aimFromExtents(box: Extents): Aim | null {
  const width = box.xMax - box.xMin;
  const height = box.yMax - box.yMin;
  if (width < EPS_GEOM || height < EPS_GEOM) return null;
  return {
    xSr: (0.5 - box.xMin) / width,
    ySr: (0.5 - box.yMin) / height,
  };
}

export function onScreen(aim: Aim): boolean {
  return aim.xSr >= 0 && aim.xSr <= 1 && aim.ySr >= 0 && aim.ySr <= 1;
}

export type Confidence = "two" | "single" | "none";

export interface PipelineResult {
  aim: Aim | null;
  confidence: Confidence;
  blobs: Blob[];
  extents: Extents | null;
}

export interface PipelineOptions {
  targets?: ColorTarget[];
  minArea?: number;
}

/** Full frame-to-aim pipeline; never throws, reports "none" instead. */
export function runPipeline(
  rgba: Uint8ClampedArray | Uint8Array,
  w: number,
  h: number,
  opts: PipelineOptions = {},
): PipelineResult {
  const targets = opts.targets ?? defaultTargets();
  const minArea = opts.minArea ?? defaultMinArea(w, h);
  const labels = classifyPixels(rgba, w, h, targets);
  const blobs = findBlobs(labels, w, h, minArea);

  const first = extentsOf(blobs, 0, w, h);
  const second = targets.length >= 2 ? extentsOf(blobs, 1, w, h) : null;

  let box: Extents | null;
  let confidence: Confidence;
  if (first && second) {
    box = reconcileExtents(first, second);
    confidence = box ? "two" : "none";
  } else if (first || second) {
    box = first ?? second;
    confidence = "single";
  } else {
    box = null;
    confidence = "none";
  }

  const aim = box ? aimFromExtents(box) : null;
  if (!aim) confidence = "none";
  return { aim, confidence, blobs, extents: box };
}
