/** Repeating fetch with a single in-flight request and failure backoff.
 *
 * Chained setTimeout rather than setInterval: the next round is scheduled
 * only after the current one settles, so polls never overlap no matter how
 * slow the network gets.
 */

import { nextBackoff, POLL_INTERVAL_MS } from "./state.js";

export interface PollerOptions<T> {
  fetch: () => Promise<T>;
  onData: (value: T) => void;
  /** Fired on transitions only: false on first failure, true on recovery. */
  onConnectionChange?: (connected: boolean, error?: unknown) => void;
  intervalMs?: number;
}

export class Poller<T> {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private stopped = true;
  private connected = true;
  private backoff: number | null = null;
  private readonly intervalMs: number;

  constructor(private readonly options: PollerOptions<T>) {
    this.intervalMs = options.intervalMs ?? POLL_INTERVAL_MS;
  }

  start(): void {
    if (!this.stopped) return;
    this.stopped = false;
    void this.tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  get isConnected(): boolean {
    return this.connected;
  }

  /** Run one round now (no-op if one is already in flight). */
  async tick(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    let delay = this.intervalMs;
    try {
      const value = await this.options.fetch();
      if (!this.connected) {
        this.connected = true;
        this.options.onConnectionChange?.(true);
      }
      this.backoff = null;
      if (!this.stopped) this.options.onData(value);
    } catch (error) {
      if (this.connected) {
        this.connected = false;
        this.options.onConnectionChange?.(false, error);
      }
      this.backoff = nextBackoff(this.backoff, this.intervalMs);
      delay = this.backoff;
    } finally {
      this.inFlight = false;
    }
    if (!this.stopped) {
      this.timer = setTimeout(() => void this.tick(), delay);
    }
  }
}
