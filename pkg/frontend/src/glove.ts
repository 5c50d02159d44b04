/**
 * Virtual glove: per-finger sliders in [0, 1] synthesize fingertip
 * positions on the calibrated stretch-to-contract segments. Emitted
 * fingertips always lie exactly on the segment, parameterized by the
 * slider value.
 */

import type { CalibrationData, Hand } from "./protocol.js";

export const GLOVE_RATE_HZ = 15;

export function clamp01(value: number): number {
  return Math.min(1, Math.max(0, value));
}

export function fingertipsFromSliders(sliders: number[], calibration: CalibrationData): number[][] {
  if (sliders.length !== calibration.fingers.length) {
    throw new Error(
      `expected ${calibration.fingers.length} slider values, got ${sliders.length}`,
    );
  }
  return sliders.map((raw, i) => {
    const s = clamp01(raw);
    const stretch = calibration.p_stretch[i];
    const contract = calibration.p_contract[i];
    return stretch.map((v, axis) => v + s * (contract[axis] - v));
  });
}

export function gloveFramePayload(
  hand: Hand,
  sliders: number[],
  calibration: CalibrationData,
  wrist: { position: number[]; rotvec: number[] },
  t: number,
): Record<string, unknown> {
  return {
    hand,
    fingertips: fingertipsFromSliders(sliders, calibration),
    wrist,
    t,
  };
}

/** Rate limiter for the glove stream: at most GLOVE_RATE_HZ sends. */
export class GloveThrottle {
  private lastSent = -Infinity;

  constructor(private readonly rateHz: number = GLOVE_RATE_HZ) {}

  ready(nowMs: number): boolean {
    if (nowMs - this.lastSent >= 1000 / this.rateHz) {
      this.lastSent = nowMs;
      return true;
    }
    return false;
  }
}
