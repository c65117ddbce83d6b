/** Shared client-side types. */

export interface RgbColor {
  r: number;
  g: number;
  b: number;
}

/** Solid color or an uploaded image, standing in for a text prompt. */
export type TargetSpec =
  | { kind: "color"; color: RgbColor }
  | { kind: "image"; png: Uint8Array };

export interface PaletteEntry {
  id: number;
  name: string;
  /** Display-only; does not affect generation. */
  swatch: RgbColor;
  target: TargetSpec;
  alpha: number;
  blurSigma: number;
  strength: number;
  background: boolean;
}

export interface FrameMessage {
  tick: number;
  paletteVersion: number;
  width: number;
  height: number;
  png: Uint8Array;
}

export type Tool = "brush" | "eraser" | "fill";

export interface StrokePoint {
  x: number;
  y: number;
}

export type ConnectionStatus = "connecting" | "open" | "reconnecting" | "closed";
