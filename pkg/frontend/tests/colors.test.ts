import { describe, expect, it } from "vitest";
import { HIGH_Z, LOW_Z, heightColor } from "../src/colors.js";

describe("heightColor", () => {
  it("pins the documented endpoints", () => {
    expect(heightColor(LOW_Z)).toEqual([0.84, 0.15, 0.16]);   // red floor
    expect(heightColor(HIGH_Z)).toEqual([0.56, 0.17, 0.78]);  // purple top
    const mid = heightColor((LOW_Z + HIGH_Z) / 2);
    expect(mid[1]).toBeGreaterThan(mid[0]);                   // green dominant
    expect(mid[1]).toBeGreaterThan(mid[2]);
  });

  it("clamps outside the range", () => {
    expect(heightColor(LOW_Z - 10)).toEqual(heightColor(LOW_Z));
    expect(heightColor(HIGH_Z + 10)).toEqual(heightColor(HIGH_Z));
  });

  it("is a pure function of height", () => {
    expect(heightColor(1.0)).toEqual(heightColor(1.0));
  });

  it("moves red to green to purple monotonically through the ramp", () => {
    const zs = [-0.4, 0.2, 1.0, 1.8, 2.4];
    const reds = zs.map((z) => heightColor(z)[0]);
    const blues = zs.map((z) => heightColor(z)[2]);
    for (let i = 1; i < zs.length; i++) {
      if (zs[i] <= 1.0) expect(reds[i]).toBeLessThanOrEqual(reds[i - 1]);
      if (zs[i - 1] >= 1.0) expect(blues[i]).toBeGreaterThanOrEqual(blues[i - 1]);
    }
  });

  it("stays inside [0, 1] everywhere", () => {
    for (let z = -1; z <= 3; z += 0.1) {
      for (const c of heightColor(z)) {
        expect(c).toBeGreaterThanOrEqual(0);
        expect(c).toBeLessThanOrEqual(1);
      }
    }
  });
});
