import { describe, expect, it } from "vitest";

import { clampToBounds, normalizeDrag, roiWithinBounds, toNaturalCoords } from "../src/roi.js";

describe("normalizeDrag", () => {
  it("handles drags from any corner", () => {
    expect(normalizeDrag(10, 20, 50, 60)).toEqual({ x: 10, y: 20, w: 40, h: 40 });
    expect(normalizeDrag(50, 60, 10, 20)).toEqual({ x: 10, y: 20, w: 40, h: 40 });
    expect(normalizeDrag(50, 20, 10, 60)).toEqual({ x: 10, y: 20, w: 40, h: 40 });
  });
});

describe("clampToBounds", () => {
  it("clips overhang", () => {
    expect(clampToBounds({ x: -10, y: 5, w: 30, h: 200 }, 100, 100)).toEqual({
      x: 0,
      y: 5,
      w: 20,
      h: 95,
    });
  });

  it("returns null for selections entirely outside", () => {
    expect(clampToBounds({ x: 150, y: 0, w: 20, h: 20 }, 100, 100)).toBeNull();
    expect(clampToBounds({ x: 0, y: 0, w: 0, h: 10 }, 100, 100)).toBeNull();
  });
});

describe("toNaturalCoords", () => {
  it("scales a preview selection up to image pixels", () => {
    const roi = toNaturalCoords({ x: 10, y: 10, w: 50, h: 25 }, 200, 100, 800, 400);
    expect(roi).toEqual({ x: 40, y: 40, w: 200, h: 100 });
  });

  it("always lands inside the natural bounds", () => {
    const roi = toNaturalCoords({ x: 190, y: 90, w: 20, h: 20 }, 200, 100, 800, 400);
    expect(roi).not.toBeNull();
    expect(roiWithinBounds(roi!, 800, 400)).toBe(true);
  });

  it("rejects a degenerate display", () => {
    expect(toNaturalCoords({ x: 0, y: 0, w: 5, h: 5 }, 0, 0, 800, 400)).toBeNull();
  });
});
