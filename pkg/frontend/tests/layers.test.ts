import { describe, expect, it } from "vitest";

import { LayerLockedError, LayerStack } from "../src/layers.js";
import { drawStroke } from "../src/strokes.js";

describe("layer stack", () => {
  it("background layer exists, locked, all-ones", () => {
    const stack = new LayerStack(16, 16);
    const bg = stack.get(0);
    expect(bg.locked).toBe(true);
    expect(bg.pixels.every((v) => v === 255)).toBe(true);
    expect(() => bg.snapshot()).toThrow(LayerLockedError);
  });

  it("layer count tracks brushes", () => {
    const stack = new LayerStack(16, 16);
    stack.addForBrush(1);
    stack.addForBrush(2);
    expect(stack.count).toBe(3);
    stack.removeForBrush(1);
    expect(stack.count).toBe(2);
    expect(() => stack.removeForBrush(0)).toThrow(LayerLockedError);
  });

  it("new layers start empty and become active", () => {
    const stack = new LayerStack(8, 8);
    const layer = stack.addForBrush(5);
    expect(stack.activeId).toBe(5);
    expect(layer.pixels.every((v) => v === 0)).toBe(true);
  });

  it("undo restores the previous PNG byte-identically", () => {
    const stack = new LayerStack(32, 32);
    const layer = stack.addForBrush(1);
    drawStroke(layer, [{ x: 8, y: 8 }], "brush", 4);
    const before = layer.toPng();
    drawStroke(layer, [{ x: 20, y: 20 }, { x: 28, y: 24 }], "brush", 6);
    expect(layer.toPng()).not.toEqual(before);
    expect(layer.undo()).toBe(true);
    expect([...layer.toPng()]).toEqual([...before]);
  });

  it("undo with no history reports false", () => {
    const stack = new LayerStack(8, 8);
    const layer = stack.addForBrush(1);
    expect(layer.undo()).toBe(false);
  });

  it("selecting an unknown layer throws", () => {
    const stack = new LayerStack(8, 8);
    expect(() => stack.select(9)).toThrow(/no layer/);
  });
});
