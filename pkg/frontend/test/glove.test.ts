import { describe, expect, it } from "vitest";

import { GloveThrottle, fingertipsFromSliders, gloveFramePayload } from "../src/glove.js";
import { FIXTURE_CALIBRATION } from "./fake_server.js";

describe("virtual glove", () => {
  it("puts fingertips exactly on the calibration segment", () => {
    for (const s of [0, 0.25, 0.5, 0.75, 1]) {
      const tips = fingertipsFromSliders(new Array(5).fill(s), FIXTURE_CALIBRATION);
      tips.forEach((tip, i) => {
        tip.forEach((value, axis) => {
          const stretch = FIXTURE_CALIBRATION.p_stretch[i][axis];
          const contract = FIXTURE_CALIBRATION.p_contract[i][axis];
          expect(value).toBeCloseTo(stretch + s * (contract - stretch), 12);
        });
      });
    }
  });

  it("slider 0 gives p_stretch and 1 gives p_contract", () => {
    expect(fingertipsFromSliders(new Array(5).fill(0), FIXTURE_CALIBRATION)).toEqual(
      FIXTURE_CALIBRATION.p_stretch,
    );
    expect(fingertipsFromSliders(new Array(5).fill(1), FIXTURE_CALIBRATION)).toEqual(
      FIXTURE_CALIBRATION.p_contract,
    );
  });

  it("clamps slider values outside [0, 1]", () => {
    const tips = fingertipsFromSliders([2, -1, 0.5, 0.5, 0.5], FIXTURE_CALIBRATION);
    expect(tips[0]).toEqual(FIXTURE_CALIBRATION.p_contract[0]);
    expect(tips[1]).toEqual(FIXTURE_CALIBRATION.p_stretch[1]);
  });

  it("rejects a slider count mismatch", () => {
    expect(() => fingertipsFromSliders([0, 1], FIXTURE_CALIBRATION)).toThrow(/5 slider values/);
  });

  it("builds a glove_frame payload", () => {
    const payload = gloveFramePayload(
      "right",
      new Array(5).fill(0.5),
      FIXTURE_CALIBRATION,
      { position: [0, 0, 0], rotvec: [0, 0, 0] },
      1.25,
    );
    expect(payload.hand).toBe("right");
    expect(payload.t).toBe(1.25);
    expect((payload.fingertips as number[][]).length).toBe(5);
  });

  it("throttles the stream to at most 15 Hz", () => {
    const throttle = new GloveThrottle(15);
    let sent = 0;
    for (let ms = 0; ms < 1000; ms += 5) {
      if (throttle.ready(ms)) {
        sent += 1;
      }
    }
    expect(sent).toBeLessThanOrEqual(15);
    expect(sent).toBeGreaterThanOrEqual(14);
  });
});
