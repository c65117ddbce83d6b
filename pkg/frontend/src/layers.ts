/** Raster mask layers, one per brush, with per-layer undo history.
 *
 * Layers live at image resolution as 8-bit masks (0..255).  The background
 * layer is locked all-ones; editing it is rejected with a hint instead of
 * silently ignored.
 */

import { encodeGrayPng } from "./png.js";

const UNDO_DEPTH = 32;

export class LayerLockedError extends Error {
  constructor() {
    super("the background layer is fixed; draw on a brush layer instead");
  }
}

export class Layer {
  readonly pixels: Uint8Array;
  private history: Uint8Array[] = [];

  constructor(
    readonly brushId: number,
    readonly width: number,
    readonly height: number,
    readonly locked: boolean,
    fill: number,
  ) {
    this.pixels = new Uint8Array(width * height).fill(fill);
  }

  snapshot(): void {
    if (this.locked) throw new LayerLockedError();
    this.history.push(this.pixels.slice());
    if (this.history.length > UNDO_DEPTH) this.history.shift();
  }

  undo(): boolean {
    const previous = this.history.pop();
    if (!previous) return false;
    this.pixels.set(previous);
    return true;
  }

  toPng(): Uint8Array {
    return encodeGrayPng(this.pixels, this.width, this.height);
  }
}

export class LayerStack {
  private layers = new Map<number, Layer>();
  activeId = 0;

  constructor(readonly width: number, readonly height: number) {
    this.layers.set(0, new Layer(0, width, height, true, 255));
  }

  get count(): number {
    return this.layers.size;
  }

  get(brushId: number): Layer {
    const layer = this.layers.get(brushId);
    if (!layer) throw new Error(`no layer for brush ${brushId}`);
    return layer;
  }

  active(): Layer {
    return this.get(this.activeId);
  }

  addForBrush(brushId: number): Layer {
    if (this.layers.has(brushId)) throw new Error(`layer for brush ${brushId} already exists`);
    const layer = new Layer(brushId, this.width, this.height, false, 0);
    this.layers.set(brushId, layer);
    this.activeId = brushId;
    return layer;
  }

  removeForBrush(brushId: number): void {
    if (this.get(brushId).locked) throw new LayerLockedError();
    this.layers.delete(brushId);
    if (this.activeId === brushId) this.activeId = 0;
  }

  select(brushId: number): void {
    this.get(brushId);
    this.activeId = brushId;
  }
}
