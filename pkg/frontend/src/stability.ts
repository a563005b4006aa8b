import { SessionState } from "./settings.js";

/**
 * Consecutive-agreement gate deciding when a prediction is stable enough
 * to speak. A label is announced after windowN consecutive predictions
 * agree on it, each at or above the confidence threshold, and is not
 * repeated until a different label gets announced in between.
 */
export class StabilityGate {
  private runLabel: string | null = null;
  private runCount = 0;

  constructor(private state: SessionState) {}

  /**
   * Feed one service response. Returns the label to announce, or null.
   * Reads windowN and threshold from the live session state so settings
   * edits apply to the next response.
   */
  push(label: string, probability: number): string | null {
    if (probability < this.state.threshold) {
      this.runLabel = null;
      this.runCount = 0;
      return null;
    }
    if (label === this.runLabel) {
      this.runCount += 1;
    } else {
      this.runLabel = label;
      this.runCount = 1;
    }
    if (this.runCount >= this.state.windowN && label !== this.state.lastSpoken) {
      this.state.lastSpoken = label;
      return label;
    }
    return null;
  }

  /** Clears the agreement run; the stability window never spans a gap. */
  reset(): void {
    this.runLabel = null;
    this.runCount = 0;
  }
}
