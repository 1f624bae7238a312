// WebSocket link to the pointer server. Browser-only at runtime but
// import-safe under node: nothing touches globals until connect().
//
// The server speaks one binary message per frame and closes on any
// protocol violation, so the link's job is small: say hello, decode,
// dispatch, and reconnect with backoff when the socket drops.

import {
  ConfigPush,
  FireEvent,
  PointerBatch,
  ProtocolError,
  PROTOCOL_VERSION,
  WireMessage,
  decode,
  encode,
} from "./protocol.js";

export type ConnStatus = "connecting" | "open" | "closed";

export interface LinkCallbacks {
  onConfig?: (cfg: ConfigPush) => void;
  onBatch?: (batch: PointerBatch) => void;
  onFire?: (fire: FireEvent) => void;
  onStatus?: (status: ConnStatus) => void;
  onDecodeError?: (err: ProtocolError) => void;
}

const BACKOFF_MIN_MS = 500;
const BACKOFF_MAX_MS = 8000;

export function wsUrl(loc: { protocol: string; host: string }): string {
  const scheme = loc.protocol === "https:" ? "wss:" : "ws:";
  return `${scheme}//${loc.host}/ws`;
}

export class ServerLink {
  private ws: WebSocket | null = null;
  private backoffMs = BACKOFF_MIN_MS;
  private stopped = false;

  constructor(
    private readonly url: string,
    private readonly role: number,
    private readonly callbacks: LinkCallbacks,
  ) {}

  connect(): void {
    this.stopped = false;
    this.open();
  }

  close(): void {
    this.stopped = true;
    this.ws?.close();
    this.ws = null;
  }

  /** Send one encoded message; silently dropped while disconnected. */
  send(payload: Uint8Array): boolean {
    if (this.ws?.readyState !== WebSocket.OPEN) return false;
    this.ws.send(payload);
    return true;
  }

  sendMessage(m: WireMessage): boolean {
    return this.send(encode(m));
  }

  private open(): void {
    this.callbacks.onStatus?.("connecting");
    const ws = new WebSocket(this.url);
    ws.binaryType = "arraybuffer";
    this.ws = ws;

    ws.onopen = () => {
      this.backoffMs = BACKOFF_MIN_MS;
      ws.send(encode({ kind: "hello", role: this.role, version: PROTOCOL_VERSION }));
      this.callbacks.onStatus?.("open");
    };

    ws.onmessage = (ev: MessageEvent) => {
      if (!(ev.data instanceof ArrayBuffer)) return;
      let msg: WireMessage;
      try {
        msg = decode(new Uint8Array(ev.data));
      } catch (err) {
        if (err instanceof ProtocolError) {
          this.callbacks.onDecodeError?.(err);
          return;
        }
        throw err;
      }
      switch (msg.kind) {
        case "config":
          this.callbacks.onConfig?.(msg);
          break;
        case "batch":
          this.callbacks.onBatch?.(msg);
          break;
        case "fire":
          this.callbacks.onFire?.(msg);
          break;
        case "ping":
          ws.send(encode({ kind: "pong", tMs: msg.tMs }));
          break;
        default:
          break;
      }
    };

    ws.onclose = () => {
      if (this.ws === ws) this.ws = null;
      this.callbacks.onStatus?.("closed");
      if (!this.stopped) {
        const delay = this.backoffMs;
        this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_MAX_MS);
        setTimeout(() => {
          if (!this.stopped) this.open();
        }, delay);
      }
    };
  }
}
