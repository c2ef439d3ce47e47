import { describe, expect, it } from "vitest";

import { clamp01, clipForFraction, fractionFromPointer } from "../src/compare.js";

describe("clamp01", () => {
  it.each([
    [0.5, 0.5],
    [-1, 0],
    [2, 1],
    [Number.NaN, 0],
  ])("clamps %s to %s", (x, want) => {
    expect(clamp01(x)).toBe(want);
  });
});

describe("fractionFromPointer", () => {
  const rect = { left: 100, width: 200 };

  it("maps the pointer across the box", () => {
    expect(fractionFromPointer(100, rect)).toBe(0);
    expect(fractionFromPointer(200, rect)).toBe(0.5);
    expect(fractionFromPointer(300, rect)).toBe(1);
  });

  it("clamps outside the box and tolerates zero width", () => {
    expect(fractionFromPointer(50, rect)).toBe(0);
    expect(fractionFromPointer(999, rect)).toBe(1);
    expect(fractionFromPointer(10, { left: 0, width: 0 })).toBe(0);
  });
});

describe("clipForFraction", () => {
  it("hides the complement of the shown fraction", () => {
    expect(clipForFraction(0)).toBe("inset(0 100.00% 0 0)");
    expect(clipForFraction(0.5)).toBe("inset(0 50.00% 0 0)");
    expect(clipForFraction(1)).toBe("inset(0 0.00% 0 0)");
    expect(clipForFraction(7)).toBe("inset(0 0.00% 0 0)"); // clamped
  });
});
