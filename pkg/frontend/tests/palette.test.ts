import { describe, expect, it } from "vitest";

import { PaletteStore, clampAlpha, clampSigma, clampStrength } from "../src/palette.js";
import { solidColor } from "../src/app.js";

describe("knob clamps", () => {
  it("clamps alpha into [0, 1] and warns below the soft floor", () => {
    expect(clampAlpha(1.4).value).toBe(1);
    expect(clampAlpha(-2).value).toBe(0);
    expect(clampAlpha(0.98).warning).toBeUndefined();
    expect(clampAlpha(0.90).warning).toMatch(/0.95/);
  });

  it("clamps sigma into [0, 64]", () => {
    expect(clampSigma(100).value).toBe(64);
    expect(clampSigma(-3).value).toBe(0);
  });

  it("clamps strength into [0, 1]", () => {
    expect(clampStrength(2).value).toBe(1);
  });
});

describe("palette store", () => {
  it("starts with a fixed background entry", () => {
    const store = new PaletteStore();
    expect(store.size).toBe(1);
    expect(store.get(0).background).toBe(true);
    expect(() => store.remove(0)).toThrow(/fixed/);
  });

  it("adds entries with distinct display swatches", () => {
    const store = new PaletteStore();
    store.add(1, "a", solidColor(1, 0, 0));
    store.add(2, "b", solidColor(0, 1, 0));
    expect(store.list().map((e) => e.id)).toEqual([0, 1, 2]);
    expect(store.get(1).swatch).not.toEqual(store.get(2).swatch);
    expect(store.activeId).toBe(2);
  });

  it("renaming is cosmetic and keeps the entry", () => {
    const store = new PaletteStore();
    store.add(1, "a", solidColor(1, 0, 0));
    store.rename(1, "totally new name");
    expect(store.get(1).name).toBe("totally new name");
    expect(store.get(1).target).toEqual(solidColor(1, 0, 0));
  });

  it("removal falls back to the background selection", () => {
    const store = new PaletteStore();
    store.add(1, "a", solidColor(1, 0, 0));
    store.remove(1);
    expect(store.activeId).toBe(0);
    expect(() => store.get(1)).toThrow(/no palette entry/);
  });

  it("knob setters clamp and persist", () => {
    const store = new PaletteStore();
    store.add(1, "a", solidColor(1, 0, 0));
    const check = store.setAlpha(1, 0.5);
    expect(check.warning).toBeDefined();
    expect(store.get(1).alpha).toBe(0.5);
    store.setSigma(1, 999);
    expect(store.get(1).blurSigma).toBe(64);
  });
});
