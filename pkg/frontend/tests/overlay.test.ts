import { describe, expect, it } from "vitest";

import { rgbaToGray, tintMask } from "../src/overlay";

describe("mask overlay tinting", () => {
  it("tints lichen pixels and leaves background transparent", () => {
    const gray = new Uint8Array([0, 255, 0, 255]);
    const out = tintMask(gray, { r: 255, g: 64, b: 64, opacity: 0.5 });
    expect(Array.from(out.slice(0, 4))).toEqual([0, 0, 0, 0]);
    expect(Array.from(out.slice(4, 8))).toEqual([255, 64, 64, 128]);
  });

  it("clamps opacity to [0, 1]", () => {
    const gray = new Uint8Array([255]);
    expect(tintMask(gray, { r: 1, g: 2, b: 3, opacity: 7 })[3]).toBe(255);
    expect(tintMask(gray, { r: 1, g: 2, b: 3, opacity: -1 })[3]).toBe(0);
  });

  it("rgbaToGray reads the red channel", () => {
    const rgba = new Uint8ClampedArray([255, 255, 255, 255, 0, 0, 0, 255]);
    expect(Array.from(rgbaToGray(rgba))).toEqual([255, 0]);
  });
});
