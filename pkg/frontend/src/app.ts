/** DOM-free application core.
 *
 * Owns the palette, the layer stack, and the stream client; everything the
 * widgets do goes through here.  The browser shell (main.ts) only renders
 * state and forwards events, which is what lets the whole app be driven
 * headlessly against a live server in tests.
 */

import { LayerStack } from "./layers.js";
import { PaletteStore, type KnobCheck } from "./palette.js";
import { bytesToBase64 } from "./protocol.js";
import { encodeGrayPng, encodeRgbPng } from "./png.js";
import { StreamClient } from "./stream.js";
import { Debouncer, drawStroke } from "./strokes.js";
import type { FrameMessage, RgbColor, StrokePoint, TargetSpec, Tool } from "./types.js";

export interface HttpLike {
  (url: string, init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string | Uint8Array;
  }): Promise<{ status: number; json(): Promise<unknown>; text(): Promise<string> }>;
}

export interface RawImage {
  width: number;
  height: number;
  /** RGB, row-major, 3 bytes per pixel. */
  pixels: Uint8Array;
}

export interface AppOptions {
  baseUrl: string;
  canvasWidth: number;
  canvasHeight: number;
  pipelineDepth: number;
  http: HttpLike;
  stream: StreamClient;
  maskDebounceMs?: number;
}

export interface AppEvents {
  frame?: (frame: FrameMessage) => void;
  notice?: (message: string) => void;
  flushing?: (reason: string) => void;
}

function targetDoc(target: TargetSpec): Record<string, unknown> {
  if (target.kind === "color") {
    return { color: [target.color.r, target.color.g, target.color.b] };
  }
  return { png_b64: bytesToBase64(target.png) };
}

/** Nearest-neighbor rescale for background images of the wrong size. */
export function rescaleImage(image: RawImage, width: number, height: number): RawImage {
  if (image.width === width && image.height === height) return image;
  const out = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    const sy = Math.min(image.height - 1, Math.floor((y * image.height) / height));
    for (let x = 0; x < width; x++) {
      const sx = Math.min(image.width - 1, Math.floor((x * image.width) / width));
      const src = (sy * image.width + sx) * 3;
      const dst = (y * width + x) * 3;
      out[dst] = image.pixels[src];
      out[dst + 1] = image.pixels[src + 1];
      out[dst + 2] = image.pixels[src + 2];
    }
  }
  return { width, height, pixels: out };
}

export class AppController {
  readonly palette = new PaletteStore();
  readonly layers: LayerStack;
  tool: Tool = "brush";
  brushRadius = 16;
  playing = false;
  frames: FrameMessage[] = [];
  private readonly maskDebouncer: Debouncer;
  private readonly events: AppEvents;

  constructor(private readonly options: AppOptions, events: AppEvents = {}) {
    this.layers = new LayerStack(options.canvasWidth, options.canvasHeight);
    this.maskDebouncer = new Debouncer(options.maskDebounceMs ?? 150);
    this.events = events;
  }

  get stream(): StreamClient {
    return this.options.stream;
  }

  handleFrame(frame: FrameMessage): void {
    this.frames.push(frame);
    this.events.frame?.(frame);
  }

  // -- palette ------------------------------------------------------------

  async registerBrush(name: string, target: TargetSpec): Promise<number> {
    this.events.flushing?.("registering brush");
    // New brushes start with an empty mask; coverage appears as the user
    // paints (the server would otherwise default to full coverage).
    const empty = encodeGrayPng(
      new Uint8Array(this.options.canvasWidth * this.options.canvasHeight),
      this.options.canvasWidth,
      this.options.canvasHeight,
    );
    const response = await this.options.http(`${this.options.baseUrl}/palette`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        name,
        target: targetDoc(target),
        mask: { png_b64: bytesToBase64(empty) },
      }),
    });
    if (response.status !== 200) {
      throw new Error(`brush registration failed: ${await response.text()}`);
    }
    const { id } = (await response.json()) as { id: number };
    this.palette.add(id, name, target);
    this.layers.addForBrush(id);
    return id;
  }

  async removeBrush(id: number): Promise<void> {
    const ack = await this.stream.removeBrush(id);
    if (ack.type === "error") throw new Error(ack.message);
    this.palette.remove(id);
    this.layers.removeForBrush(id);
  }

  selectBrush(id: number): void {
    this.palette.get(id);
    this.palette.activeId = id;
    this.layers.select(id);
  }

  async setAlpha(id: number, value: number): Promise<KnobCheck> {
    const check = this.palette.setAlpha(id, value);
    if (check.warning) this.events.notice?.(check.warning);
    await this.stream.setAlpha(id, check.value);
    return check;
  }

  async setSigma(id: number, value: number): Promise<KnobCheck> {
    const check = this.palette.setSigma(id, value);
    await this.stream.setSigma(id, check.value);
    return check;
  }

  async setStrength(id: number, value: number): Promise<KnobCheck> {
    const check = this.palette.setStrength(id, value);
    await this.stream.setStrength(id, check.value);
    return check;
  }

  // -- drawing --------------------------------------------------------------

  drawStroke(path: StrokePoint[], tool: Tool = this.tool, radius: number = this.brushRadius): void {
    const layer = this.layers.active();
    drawStroke(layer, path, tool, radius); // throws LayerLockedError on the background
    this.maskDebouncer.schedule(() => void this.pushActiveMask());
  }

  undo(): boolean {
    const layer = this.layers.active();
    const undone = layer.undo();
    if (undone) this.maskDebouncer.schedule(() => void this.pushActiveMask());
    return undone;
  }

  /** Force out any debounced mask update (pointer-up, tests). */
  async flushMaskUpdates(): Promise<void> {
    this.maskDebouncer.flush();
    await this.lastMaskPush;
  }

  private lastMaskPush: Promise<unknown> = Promise.resolve();

  private pushActiveMask(): Promise<unknown> {
    const layer = this.layers.active();
    if (layer.locked) return Promise.resolve();
    const push = this.stream
      .updateMask(layer.brushId, bytesToBase64(layer.toPng()))
      .catch((error) => this.events.notice?.(`mask update failed: ${error}`));
    this.lastMaskPush = push;
    return push;
  }

  // -- playback --------------------------------------------------------------

  async play(): Promise<void> {
    await this.stream.play();
    this.playing = true;
  }

  async pause(): Promise<void> {
    await this.stream.pause();
    this.playing = false;
  }

  async stepOnce(): Promise<void> {
    await this.stream.stepOnce();
  }

  async setSeed(value: number): Promise<void> {
    await this.stream.setSeed(value);
  }

  // -- background ------------------------------------------------------------

  async uploadBackground(image: RawImage): Promise<void> {
    let upload = image;
    if (image.width !== this.options.canvasWidth || image.height !== this.options.canvasHeight) {
      upload = rescaleImage(image, this.options.canvasWidth, this.options.canvasHeight);
      this.events.notice?.(
        `background was ${image.width}x${image.height}; rescaled to the `
        + `${this.options.canvasWidth}x${this.options.canvasHeight} canvas`,
      );
    }
    this.events.flushing?.("uploading background");
    const png = encodeRgbPng(upload.pixels, upload.width, upload.height);
    const response = await this.options.http(`${this.options.baseUrl}/background`, {
      method: "POST",
      headers: { "content-type": "image/png" },
      body: png,
    });
    if (response.status !== 200) {
      throw new Error(`background upload failed: ${await response.text()}`);
    }
  }
}

export function solidColor(r: number, g: number, b: number): TargetSpec {
  const color: RgbColor = { r, g, b };
  return { kind: "color", color };
}
