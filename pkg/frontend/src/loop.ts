import { ApiError, Prediction, classify } from "./api.js";
import { SessionState } from "./settings.js";
import { StabilityGate } from "./stability.js";

export interface LoopCallbacks {
  /** A classification arrived; predictions are sorted best first. */
  onResult(top: Prediction, all: Prediction[], latencyMs: number): void;
  /** The stability gate fired; announce this label once. */
  onAnnounce(label: string): void;
  /** The service stopped answering (network failure or timeout). */
  onOffline(): void;
  /** The service answered again after being offline. */
  onOnline(): void;
  /** The service answered with an error envelope; it is reachable. */
  onError(err: ApiError): void;
}

export interface LoopOptions {
  grabFrame(): Promise<Blob | null>;
  /** Per-request deadline; bounds how long a dead socket can look alive. */
  timeoutMs?: number;
}

/**
 * Fixed-cadence capture loop. A timer fires every intervalMs; if the
 * previous request is still in flight the frame is skipped, never queued,
 * so at most one classify request is outstanding at any time. Interval and
 * service URL are read from the session state on every tick, so settings
 * edits take effect without a restart.
 */
export class CaptureLoop {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private stopped = true;
  private wasOffline = false;

  constructor(
    private state: SessionState,
    private gate: StabilityGate,
    private opts: LoopOptions,
    private cbs: LoopCallbacks,
  ) {}

  get running(): boolean {
    return !this.stopped;
  }

  get offline(): boolean {
    return this.wasOffline;
  }

  start(): void {
    if (!this.stopped) return;
    this.stopped = false;
    this.arm();
    void this.tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  private arm(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      if (this.stopped) return;
      this.arm();
      void this.tick();
    }, this.state.intervalMs);
  }

  private async tick(): Promise<void> {
    if (this.stopped || this.inFlight) return;
    this.inFlight = true;
    try {
      const frame = await this.opts.grabFrame();
      if (frame === null || this.stopped) return;
      const result = await classify(
        this.state.serviceUrl,
        frame,
        this.opts.timeoutMs ?? 1500,
      );
      if (this.stopped) return;
      this.markOnline();
      if (result.predictions.length > 0) {
        const top = result.predictions[0];
        this.cbs.onResult(top, result.predictions, result.latencyMs);
        const announce = this.gate.push(top.label, top.probability);
        if (announce !== null) this.cbs.onAnnounce(announce);
      }
    } catch (err) {
      if (this.stopped) return;
      if (err instanceof ApiError) {
        this.markOnline();
        this.cbs.onError(err);
      } else {
        this.markOffline();
      }
    } finally {
      this.inFlight = false;
    }
  }

  private markOnline(): void {
    if (this.wasOffline) {
      this.wasOffline = false;
      this.cbs.onOnline();
    }
  }

  private markOffline(): void {
    this.gate.reset();
    if (!this.wasOffline) {
      this.wasOffline = true;
      this.cbs.onOffline();
    }
  }
}
