/** Browser shell: renders app state and forwards events to the controller.
 *
 * All behavior lives in AppController; this file only builds widgets from
 * the control inventory and keeps the two canvases painted.
 */

import { AppController, solidColor, type RawImage } from "./app.js";
import { CONTROL_INVENTORY } from "./controls.js";
import { StreamClient } from "./stream.js";
import type { FrameMessage, StrokePoint, Tool } from "./types.js";

const CANVAS_WIDTH = 512;
const CANVAS_HEIGHT = 512;
const PIPELINE_DEPTH = 5;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (HTMLElement | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  for (const child of children) node.append(child);
  return node;
}

function controlHost(id: string): HTMLElement {
  const spec = CONTROL_INVENTORY.find((c) => c.id === id);
  if (!spec) throw new Error(`unknown control ${id}`);
  const host = el("div", { class: "control", "data-control": spec.id, title: spec.hint ?? "" });
  host.append(el("label", {}, spec.label));
  return host;
}

export function bootstrap(root: HTMLElement, baseUrl: string): AppController {
  const wsUrl = baseUrl.replace(/^http/, "ws") + "/stream";
  const banner = el("div", { class: "banner", hidden: "hidden" });
  const frameInfo = el("span", { class: "frame-info" }, "no frames yet");
  const display = el("canvas", {
    width: String(CANVAS_WIDTH),
    height: String(CANVAS_HEIGHT),
    class: "display",
  });
  const pad = el("canvas", {
    width: String(CANVAS_WIDTH),
    height: String(CANVAS_HEIGHT),
    class: "pad",
  });

  const stream = new StreamClient(() => new WebSocket(wsUrl), {
    onFrame: (frame) => {
      controller.handleFrame(frame);
      renderFrame(frame);
    },
    onStatus: (status) => {
      banner.hidden = status === "open";
      banner.textContent = status === "open" ? "" : `stream ${status}...`;
    },
  });

  const controller = new AppController(
    {
      baseUrl,
      canvasWidth: CANVAS_WIDTH,
      canvasHeight: CANVAS_HEIGHT,
      pipelineDepth: PIPELINE_DEPTH,
      http: (url, init) => fetch(url, init as RequestInit),
      stream,
    },
    {
      notice: (message) => showNotice(message),
      flushing: (reason) => showNotice(`stream flushing: ${reason}`),
    },
  );

  function showNotice(message: string): void {
    const node = el("div", { class: "notice" }, message);
    notices.prepend(node);
    setTimeout(() => node.remove(), 4000);
  }

  function renderFrame(frame: FrameMessage): void {
    frameInfo.textContent = `tick ${frame.tick} / palette v${frame.paletteVersion}`;
    const blob = new Blob([frame.png as BlobPart], { type: "image/png" });
    const url = URL.createObjectURL(blob);
    const image = new Image();
    image.onload = () => {
      display.getContext("2d")?.drawImage(image, 0, 0, CANVAS_WIDTH, CANVAS_HEIGHT);
      URL.revokeObjectURL(url);
    };
    image.src = url;
  }

  function repaintPad(): void {
    const ctx = pad.getContext("2d");
    if (!ctx) return;
    const layer = controller.layers.active();
    const image = ctx.createImageData(CANVAS_WIDTH, CANVAS_HEIGHT);
    const entry = controller.palette.get(controller.palette.activeId);
    for (let i = 0; i < layer.pixels.length; i++) {
      const v = layer.pixels[i];
      image.data[i * 4] = entry.swatch.r;
      image.data[i * 4 + 1] = entry.swatch.g;
      image.data[i * 4 + 2] = entry.swatch.b;
      image.data[i * 4 + 3] = v > 0 ? 160 : 0;
    }
    ctx.clearRect(0, 0, CANVAS_WIDTH, CANVAS_HEIGHT);
    ctx.putImageData(image, 0, 0);
  }

  // -- palette panel -------------------------------------------------------

  const paletteHost = controlHost("palette-panel");
  const paletteList = el("ul", { class: "palette" });
  paletteHost.append(paletteList);

  function repaintPalette(): void {
    paletteList.replaceChildren(
      ...controller.palette.list().map((entry) => {
        const item = el(
          "li",
          { "data-brush": String(entry.id), class: entry.id === controller.palette.activeId ? "active" : "" },
          el("span", {
            class: "swatch",
            style: `background: rgb(${entry.swatch.r},${entry.swatch.g},${entry.swatch.b})`,
          }),
          `${entry.name}${entry.background ? " (background)" : ""}`,
        );
        item.onclick = () => {
          controller.selectBrush(entry.id);
          repaintPalette();
          repaintPad();
        };
        return item;
      }),
    );
  }

  const newBrushHost = controlHost("new-brush-button");
  const newBrushButton = el("button", {}, "add brush");
  newBrushButton.onclick = async () => {
    const name = `brush ${controller.palette.size}`;
    const color = solidColor(Math.random(), Math.random(), Math.random());
    await controller.registerBrush(name, color);
    repaintPalette();
    repaintPad();
  };
  newBrushHost.append(newBrushButton);

  // -- layer selection -------------------------------------------------------

  const layerHost = controlHost("layer-selector");
  layerHost.append(paletteListClone());
  function paletteListClone(): HTMLElement {
    const select = el("select");
    select.onchange = () => {
      controller.selectBrush(Number(select.value));
      repaintPalette();
      repaintPad();
    };
    new MutationObserver(() => {
      select.replaceChildren(
        ...controller.palette.list().map((entry) =>
          el("option", { value: String(entry.id) }, entry.name),
        ),
      );
    }).observe(paletteList, { childList: true });
    return select;
  }

  // -- drawing ---------------------------------------------------------------

  const padHost = controlHost("drawing-pad");
  padHost.append(pad);
  let stroke: StrokePoint[] | null = null;

  function padPoint(event: PointerEvent): StrokePoint {
    const rect = pad.getBoundingClientRect();
    return {
      x: ((event.clientX - rect.left) * CANVAS_WIDTH) / rect.width,
      y: ((event.clientY - rect.top) * CANVAS_HEIGHT) / rect.height,
    };
  }

  pad.onpointerdown = (event) => {
    stroke = [padPoint(event)];
  };
  pad.onpointermove = (event) => {
    if (!stroke) return;
    stroke.push(padPoint(event));
    try {
      controller.drawStroke(stroke.slice(-2));
    } catch (error) {
      showNotice(String(error));
      stroke = null;
      return;
    }
    repaintPad();
  };
  pad.onpointerup = () => {
    if (stroke && stroke.length === 1) {
      try {
        controller.drawStroke(stroke);
        repaintPad();
      } catch (error) {
        showNotice(String(error));
      }
    }
    stroke = null;
    void controller.flushMaskUpdates();
  };

  const toolHost = controlHost("tool-picker");
  for (const tool of ["brush", "eraser", "fill"] as Tool[]) {
    const button = el("button", { "data-tool": tool }, tool);
    button.onclick = () => {
      controller.tool = tool;
    };
    toolHost.append(button);
  }
  const undoButton = el("button", {}, "undo");
  undoButton.onclick = () => {
    controller.undo();
    repaintPad();
  };
  toolHost.append(undoButton);

  // -- background upload -------------------------------------------------------

  const backgroundHost = controlHost("background-upload");
  const fileInput = el("input", { type: "file", accept: "image/png,image/jpeg" });
  fileInput.onchange = async () => {
    const file = (fileInput as HTMLInputElement).files?.[0];
    if (!file) return; // canceled: nothing is sent
    const bitmap = await createImageBitmap(file);
    const scratch = el("canvas", {
      width: String(bitmap.width),
      height: String(bitmap.height),
    });
    const ctx = scratch.getContext("2d")!;
    ctx.drawImage(bitmap, 0, 0);
    const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
    const rgb = new Uint8Array(bitmap.width * bitmap.height * 3);
    for (let i = 0; i < bitmap.width * bitmap.height; i++) {
      rgb[i * 3] = data[i * 4];
      rgb[i * 3 + 1] = data[i * 4 + 1];
      rgb[i * 3 + 2] = data[i * 4 + 2];
    }
    const image: RawImage = { width: bitmap.width, height: bitmap.height, pixels: rgb };
    await controller.uploadBackground(image);
  };
  backgroundHost.append(fileInput);

  // -- playback ---------------------------------------------------------------

  const playHost = controlHost("play-button");
  const playButton = el("button", {}, "play");
  playButton.onclick = async () => {
    if (controller.playing) {
      await controller.pause();
      playButton.textContent = "play";
    } else {
      await controller.play();
      playButton.textContent = "pause";
    }
  };
  const stepButton = el("button", {}, "step");
  stepButton.onclick = () => void controller.stepOnce();
  playHost.append(playButton, stepButton);

  const displayHost = controlHost("stream-display");
  displayHost.append(display, frameInfo);

  // -- knobs -------------------------------------------------------------------

  function slider(hostId: string, min: number, max: number, step: number,
                  read: () => number,
                  write: (value: number) => Promise<unknown>): HTMLElement {
    const host = controlHost(hostId);
    const input = el("input", {
      type: "range", min: String(min), max: String(max), step: String(step),
    }) as HTMLInputElement;
    input.value = String(read());
    input.onchange = () => void write(Number(input.value));
    host.append(input);
    return host;
  }

  const alphaHost = slider("alpha-slider", 0, 1, 0.005,
    () => controller.palette.get(controller.palette.activeId).alpha,
    (v) => controller.setAlpha(controller.palette.activeId, v));
  const blurHost = slider("blur-slider", 0, 64, 0.5,
    () => controller.palette.get(controller.palette.activeId).blurSigma,
    (v) => controller.setSigma(controller.palette.activeId, v));
  const strengthHost = slider("strength-slider", 0, 1, 0.01,
    () => controller.palette.get(controller.palette.activeId).strength,
    (v) => controller.setStrength(controller.palette.activeId, v));

  const seedHost = controlHost("seed-input");
  const seedInput = el("input", { type: "number", value: "0" }) as HTMLInputElement;
  seedInput.onchange = () => void controller.setSeed(Number(seedInput.value));
  seedHost.append(seedInput);

  const targetHost = controlHost("target-picker");
  const targetInput = el("input", { type: "color", value: "#808080" }) as HTMLInputElement;
  targetInput.onchange = () => {
    const hex = targetInput.value;
    const color = solidColor(
      parseInt(hex.slice(1, 3), 16) / 255,
      parseInt(hex.slice(3, 5), 16) / 255,
      parseInt(hex.slice(5, 7), 16) / 255,
    );
    controller.palette.setTarget(controller.palette.activeId, color);
    showNotice("target applies to the next registration of this brush");
  };
  targetHost.append(targetInput);

  const nameHost = controlHost("name-input");
  const nameInput = el("input", { type: "text" }) as HTMLInputElement;
  nameInput.onchange = () => {
    controller.palette.rename(controller.palette.activeId, nameInput.value);
    repaintPalette();
  };
  nameHost.append(nameInput);

  const notices = el("div", { class: "notices" });

  root.append(
    banner,
    el("div", { class: "columns" },
      el("div", { class: "left" }, paletteHost, newBrushHost, layerHost, toolHost,
        backgroundHost, alphaHost, blurHost, strengthHost, seedHost, targetHost, nameHost),
      el("div", { class: "center" }, padHost),
      el("div", { class: "right" }, playHost, displayHost, notices),
    ),
  );
  repaintPalette();
  repaintPad();
  stream.connect();
  return controller;
}

declare global {
  interface Window {
    streampaint?: AppController;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const base = `${location.protocol}//${location.host}`;
  window.streampaint = bootstrap(document.getElementById("app")!, base);
}
