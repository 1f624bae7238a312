// Binary wire codec, byte-for-byte compatible with the Python server.
//
// One message per buffer: a 1-byte type tag, then fields in order,
// big-endian, no padding. Coordinates travel as q16 fixed point
// (c in [0,1] scaled by 65535, round half up). decode() is total:
// every buffer either parses or throws exactly one of UnknownTagError,
// TruncatedError, TrailingError, each carrying the offending offset.
//
// Framing is the transport's job; over WebSocket each binary frame
// holds exactly one message.

export const PROTOCOL_VERSION = 1;

export const TAG_HELLO = 0x01;
export const TAG_CONFIG_PUSH = 0x02;
export const TAG_AIM_UPDATE = 0x03;
export const TAG_FIRE_EVENT = 0x04;
export const TAG_POINTER_BATCH = 0x05;
export const TAG_PING = 0x06;
export const TAG_PONG = 0x07;

export const FLAG_ON_SCREEN = 0x01;
export const BATCH_LIMIT = 255;

export const ROLE_POINTER = 0;
export const ROLE_DISPLAY = 1;

export class ProtocolError extends Error {
  readonly offset: number;
  constructor(message: string, offset: number) {
    super(`${message} (offset ${offset})`);
    this.offset = offset;
  }
}

export class UnknownTagError extends ProtocolError {
  readonly value: number;
  constructor(value: number, offset = 0) {
    super(`unknown tag 0x${value.toString(16).padStart(2, "0").toUpperCase()}`, offset);
    this.value = value;
  }
}

export class TruncatedError extends ProtocolError {
  constructor(offset: number) {
    super("message truncated", offset);
  }
}

export class TrailingError extends ProtocolError {
  constructor(offset: number) {
    super("trailing bytes after message", offset);
  }
}

// round half up so 0.5 -> 0x8000, matching the server exactly
export function q16Encode(c: number): number {
  const clamped = Math.min(1, Math.max(0, c));
  return Math.floor(clamped * 65535 + 0.5);
}

export function q16Decode(q: number): number {
  return q / 65535;
}

export function q8Encode(fraction: number): number {
  const clamped = Math.min(1, Math.max(0, fraction));
  return Math.floor(clamped * 255 + 0.5);
}

export type Rgb = [number, number, number];

export interface Hello {
  kind: "hello";
  role: number;
  version: number;
}

export interface ConfigPush {
  kind: "config";
  screenW: number;
  screenH: number;
  borderFracQ8: number;
  colorA: Rgb;
  colorB: Rgb;
}

export interface AimUpdate {
  kind: "aim";
  xQ16: number;
  yQ16: number;
  flags: number;
}

export interface FireEvent {
  kind: "fire";
  xQ16: number;
  yQ16: number;
  button: number;
}

export interface PointerEntry {
  clientId: number;
  xQ16: number;
  yQ16: number;
  flags: number;
}

export interface PointerBatch {
  kind: "batch";
  entries: PointerEntry[];
}

export interface Ping {
  kind: "ping";
  tMs: number;
}

export interface Pong {
  kind: "pong";
  tMs: number;
}

export type WireMessage =
  | Hello
  | ConfigPush
  | AimUpdate
  | FireEvent
  | PointerBatch
  | Ping
  | Pong;

const FIXED_SIZES: Record<number, number> = {
  [TAG_HELLO]: 3,
  [TAG_CONFIG_PUSH]: 12,
  [TAG_AIM_UPDATE]: 6,
  [TAG_FIRE_EVENT]: 6,
  [TAG_PING]: 5,
  [TAG_PONG]: 5,
};

function checkU(value: number, bits: number, what: string): void {
  if (!Number.isInteger(value) || value < 0 || value >= 2 ** bits) {
    throw new RangeError(`${what} out of u${bits} range: ${value}`);
  }
}

export function encode(m: WireMessage): Uint8Array {
  switch (m.kind) {
    case "hello": {
      checkU(m.role, 8, "role");
      checkU(m.version, 8, "version");
      return Uint8Array.of(TAG_HELLO, m.role, m.version);
    }
    case "config": {
      checkU(m.screenW, 16, "screenW");
      checkU(m.screenH, 16, "screenH");
      checkU(m.borderFracQ8, 8, "borderFracQ8");
      const out = new Uint8Array(12);
      const view = new DataView(out.buffer);
      view.setUint8(0, TAG_CONFIG_PUSH);
      view.setUint16(1, m.screenW);
      view.setUint16(3, m.screenH);
      view.setUint8(5, m.borderFracQ8);
      out.set(m.colorA, 6);
      out.set(m.colorB, 9);
      return out;
    }
    case "aim":
      return encodeXyByte(TAG_AIM_UPDATE, m.xQ16, m.yQ16, m.flags);
    case "fire":
      return encodeXyByte(TAG_FIRE_EVENT, m.xQ16, m.yQ16, m.button);
    case "batch": {
      if (m.entries.length > BATCH_LIMIT) {
        throw new RangeError(`batch of ${m.entries.length} exceeds ${BATCH_LIMIT}`);
      }
      const out = new Uint8Array(2 + 7 * m.entries.length);
      const view = new DataView(out.buffer);
      view.setUint8(0, TAG_POINTER_BATCH);
      view.setUint8(1, m.entries.length);
      m.entries.forEach((e, i) => {
        checkU(e.clientId, 16, "clientId");
        checkU(e.xQ16, 16, "xQ16");
        checkU(e.yQ16, 16, "yQ16");
        checkU(e.flags, 8, "flags");
        const off = 2 + 7 * i;
        view.setUint16(off, e.clientId);
        view.setUint16(off + 2, e.xQ16);
        view.setUint16(off + 4, e.yQ16);
        view.setUint8(off + 6, e.flags);
      });
      return out;
    }
    case "ping":
    case "pong": {
      checkU(m.tMs, 32, "tMs");
      const out = new Uint8Array(5);
      const view = new DataView(out.buffer);
      view.setUint8(0, m.kind === "ping" ? TAG_PING : TAG_PONG);
      view.setUint32(1, m.tMs);
      return out;
    }
  }
}

function encodeXyByte(tag: number, x: number, y: number, last: number): Uint8Array {
  checkU(x, 16, "x");
  checkU(y, 16, "y");
  checkU(last, 8, "trailing byte");
  const out = new Uint8Array(6);
  const view = new DataView(out.buffer);
  view.setUint8(0, tag);
  view.setUint16(1, x);
  view.setUint16(3, y);
  view.setUint8(5, last);
  return out;
}

export function decode(b: Uint8Array): WireMessage {
  if (b.length < 1) throw new TruncatedError(0);
  const tag = b[0];
  let expected: number;
  if (tag === TAG_POINTER_BATCH) {
    if (b.length < 2) throw new TruncatedError(b.length);
    expected = 2 + 7 * b[1];
  } else if (tag in FIXED_SIZES) {
    expected = FIXED_SIZES[tag];
  } else {
    throw new UnknownTagError(tag, 0);
  }
  if (b.length < expected) throw new TruncatedError(b.length);
  if (b.length > expected) throw new TrailingError(expected);

  const view = new DataView(b.buffer, b.byteOffset, b.byteLength);
  switch (tag) {
    case TAG_HELLO: {
      const role = b[1];
      if (role !== ROLE_POINTER && role !== ROLE_DISPLAY) {
        throw new UnknownTagError(role, 1);
      }
      return { kind: "hello", role, version: b[2] };
    }
    case TAG_CONFIG_PUSH:
      return {
        kind: "config",
        screenW: view.getUint16(1),
        screenH: view.getUint16(3),
        borderFracQ8: view.getUint8(5),
        colorA: [b[6], b[7], b[8]],
        colorB: [b[9], b[10], b[11]],
      };
    case TAG_AIM_UPDATE:
      return {
        kind: "aim",
        xQ16: view.getUint16(1),
        yQ16: view.getUint16(3),
        flags: view.getUint8(5),
      };
    case TAG_FIRE_EVENT:
      return {
        kind: "fire",
        xQ16: view.getUint16(1),
        yQ16: view.getUint16(3),
        button: view.getUint8(5),
      };
    case TAG_POINTER_BATCH: {
      const entries: PointerEntry[] = [];
      for (let i = 0; i < b[1]; i++) {
        const off = 2 + 7 * i;
        entries.push({
          clientId: view.getUint16(off),
          xQ16: view.getUint16(off + 2),
          yQ16: view.getUint16(off + 4),
          flags: view.getUint8(off + 6),
        });
      }
      return { kind: "batch", entries };
    }
    case TAG_PING:
      return { kind: "ping", tMs: view.getUint32(1) };
    default:
      return { kind: "pong", tMs: view.getUint32(1) };
  }
}

export function helloPointer(): Uint8Array {
  return encode({ kind: "hello", role: ROLE_POINTER, version: PROTOCOL_VERSION });
}

export function aimFromSr(xSr: number, ySr: number, onScreen: boolean): Uint8Array {
  return encode({
    kind: "aim",
    xQ16: q16Encode(xSr),
    yQ16: q16Encode(ySr),
    flags: onScreen ? FLAG_ON_SCREEN : 0,
  });
}

export function fireFromSr(xSr: number, ySr: number, button = 0): Uint8Array {
  return encode({
    kind: "fire",
    xQ16: q16Encode(xSr),
    yQ16: q16Encode(ySr),
    button,
  });
}
