import { describe, expect, it } from "vitest";

import { encodeGrayPng, encodeRgbPng, isPng, readPngHeader } from "../src/png.js";
import { decodePng } from "./pngDecode.js";

describe("png writer", () => {
  it("emits a well-formed grayscale file", () => {
    const pixels = new Uint8Array(16 * 8).map((_, i) => i % 256);
    const png = encodeGrayPng(pixels, 16, 8);
    expect(isPng(png)).toBe(true);
    const header = readPngHeader(png);
    expect(header).toMatchObject({ width: 16, height: 8, bitDepth: 8, colorType: 0 });
  });

  it("round-trips grayscale pixels exactly", () => {
    const pixels = new Uint8Array(33 * 7).map(() => Math.floor(Math.random() * 256));
    const decoded = decodePng(encodeGrayPng(pixels, 33, 7));
    expect(decoded.width).toBe(33);
    expect(decoded.height).toBe(7);
    expect(decoded.channels).toBe(1);
    expect([...decoded.pixels]).toEqual([...pixels]);
  });

  it("round-trips rgb pixels exactly", () => {
    const pixels = new Uint8Array(5 * 4 * 3).map((_, i) => (i * 37) % 256);
    const decoded = decodePng(encodeRgbPng(pixels, 5, 4));
    expect(decoded.channels).toBe(3);
    expect([...decoded.pixels]).toEqual([...pixels]);
  });

  it("splits large images into multiple deflate blocks", () => {
    const side = 300; // raw stream > 65535 bytes
    const pixels = new Uint8Array(side * side).fill(7);
    const decoded = decodePng(encodeGrayPng(pixels, side, side));
    expect(decoded.pixels.every((v) => v === 7)).toBe(true);
  });

  it("rejects mismatched buffer sizes", () => {
    expect(() => encodeGrayPng(new Uint8Array(10), 4, 4)).toThrow(/expected/);
  });

  it("rejects non-png data in the header reader", () => {
    expect(() => readPngHeader(new Uint8Array([1, 2, 3]))).toThrow(/not a PNG/);
  });
});
