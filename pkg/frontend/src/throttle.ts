// Rate limiter for aim updates: at most maxHz sends per second, and
// when offers come faster than that, only the newest pending value
// survives. Stale aim data is worse than dropped aim data, so this
// coalesces instead of queueing.

export class AimThrottle<T> {
  private readonly intervalMs: number;
  private lastSentMs = -Infinity;
  private pending: T | null = null;

  constructor(maxHz: number) {
    if (!(maxHz > 0)) throw new RangeError(`maxHz must be positive, got ${maxHz}`);
    this.intervalMs = 1000 / maxHz;
  }

  /** Offer a fresh value; returns it if it may be sent now, else null. */
  offer(value: T, nowMs: number): T | null {
    if (nowMs - this.lastSentMs >= this.intervalMs) {
      this.lastSentMs = nowMs;
      this.pending = null;
      return value;
    }
    this.pending = value;
    return null;
  }

  /** Release a coalesced value once the send interval has elapsed. */
  flush(nowMs: number): T | null {
    if (this.pending === null || nowMs - this.lastSentMs < this.intervalMs) {
      return null;
    }
    const value = this.pending;
    this.pending = null;
    this.lastSentMs = nowMs;
    return value;
  }

  get hasPending(): boolean {
    return this.pending !== null;
  }
}
