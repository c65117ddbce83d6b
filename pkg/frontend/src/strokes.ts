/** Stroke rasterization: round brush, eraser, and bucket fill. */

import type { StrokePoint, Tool } from "./types.js";
import { Layer } from "./layers.js";

function stampDisc(layer: Layer, cx: number, cy: number, radius: number, value: number): void {
  const { width, height, pixels } = layer;
  const r2 = radius * radius;
  const top = Math.max(0, Math.floor(cy - radius));
  const bottom = Math.min(height - 1, Math.ceil(cy + radius));
  for (let y = top; y <= bottom; y++) {
    const dy = y - cy;
    const half = Math.sqrt(Math.max(0, r2 - dy * dy));
    const left = Math.max(0, Math.floor(cx - half));
    const right = Math.min(width - 1, Math.ceil(cx + half));
    for (let x = left; x <= right; x++) {
      const dx = x - cx;
      if (dx * dx + dy * dy <= r2) pixels[y * width + x] = value;
    }
  }
}

function floodFill(layer: Layer, seedX: number, seedY: number, value: number): void {
  const { width, height, pixels } = layer;
  const x0 = Math.round(seedX);
  const y0 = Math.round(seedY);
  if (x0 < 0 || y0 < 0 || x0 >= width || y0 >= height) return;
  const from = pixels[y0 * width + x0];
  if (from === value) return;
  const queue: number[] = [y0 * width + x0];
  pixels[y0 * width + x0] = value;
  while (queue.length) {
    const at = queue.pop()!;
    const x = at % width;
    const y = (at - x) / width;
    for (const [nx, ny] of [[x - 1, y], [x + 1, y], [x, y - 1], [x, y + 1]] as const) {
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
      const idx = ny * width + nx;
      if (pixels[idx] === from) {
        pixels[idx] = value;
        queue.push(idx);
      }
    }
  }
}

/** Apply one stroke to a layer. Records an undo snapshot first. */
export function drawStroke(layer: Layer, path: StrokePoint[], tool: Tool, radius: number): void {
  if (path.length === 0) return;
  layer.snapshot();
  if (tool === "fill") {
    floodFill(layer, path[0].x, path[0].y, 255);
    return;
  }
  const value = tool === "eraser" ? 0 : 255;
  let previous = path[0];
  stampDisc(layer, previous.x, previous.y, radius, value);
  for (const point of path.slice(1)) {
    const dx = point.x - previous.x;
    const dy = point.y - previous.y;
    const distance = Math.hypot(dx, dy);
    const steps = Math.max(1, Math.ceil(distance / Math.max(1, radius / 2)));
    for (let s = 1; s <= steps; s++) {
      stampDisc(layer, previous.x + (dx * s) / steps, previous.y + (dy * s) / steps, radius, value);
    }
    previous = point;
  }
}

/** Trailing-edge debouncer for mask uploads while the user keeps painting. */
export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: (() => void) | null = null;

  constructor(private readonly delayMs: number) {}

  schedule(action: () => void): void {
    this.pending = action;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => this.fire(), this.delayMs);
  }

  /** Run whatever is pending right now (used on pointer-up and in tests). */
  flush(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.fire();
  }

  private fire(): void {
    this.timer = null;
    const action = this.pending;
    this.pending = null;
    if (action) action();
  }
}
