// Session state: the current drawing, the declared digit, and an
// append-only history of (input, proposal, metrics) attempts.

import type { ProposalResponse } from "./api.js";
import { PIXELS } from "./rasterize.js";

export interface Attempt {
  input: number[];
  proposal: number[];
  metrics: Omit<ProposalResponse, "proposal">;
}

export class DrawingState {
  rasterized: number[] = new Array(PIXELS).fill(0);
  intendedLabel: number | null = null;
  private history: Attempt[] = [];
  private requestCounter = 0;

  get attempts(): readonly Attempt[] {
    return this.history;
  }

  /** Submission needs a declared digit; an empty canvas is still valid. */
  canSubmit(): boolean {
    return this.intendedLabel !== null;
  }

  setLabel(label: number): void {
    if (!Number.isInteger(label) || label < 0 || label > 9) {
      throw new Error(`label must be 0..9, got ${label}`);
    }
    this.intendedLabel = label;
  }

  setDrawing(pixels: number[]): void {
    if (pixels.length !== PIXELS) {
      throw new Error(`expected ${PIXELS} pixels`);
    }
    this.rasterized = pixels;
  }

  /** Tag for an outgoing request; responses for older tags are stale. */
  nextRequestTag(): number {
    return ++this.requestCounter;
  }

  isCurrent(tag: number): boolean {
    return tag === this.requestCounter;
  }

  recordAttempt(input: number[], response: ProposalResponse): Attempt {
    const { proposal, ...metrics } = response;
    const attempt: Attempt = { input: [...input], proposal: [...proposal], metrics };
    this.history.push(attempt);
    return attempt;
  }
}
