/** Wire formats of the streaming service.
 *
 * Frames arrive as binary messages: `SPF1` magic, then five little-endian
 * u32 fields (tick, palette version, width, height, PNG byte count) and the
 * PNG image.  Commands go out as JSON text and are answered with an `ack`
 * or `error` message carrying the request id.
 */

import type { FrameMessage } from "./types.js";

export const FRAME_MAGIC = "SPF1";
const HEADER_BYTES = 4 + 5 * 4;

export function parseFrame(data: Uint8Array): FrameMessage {
  if (data.length < HEADER_BYTES) {
    throw new Error(`frame too short: ${data.length} bytes`);
  }
  const magic = String.fromCharCode(data[0], data[1], data[2], data[3]);
  if (magic !== FRAME_MAGIC) {
    throw new Error(`bad frame magic ${JSON.stringify(magic)}`);
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const tick = view.getUint32(4, true);
  const paletteVersion = view.getUint32(8, true);
  const width = view.getUint32(12, true);
  const height = view.getUint32(16, true);
  const pngLength = view.getUint32(20, true);
  if (data.length < HEADER_BYTES + pngLength) {
    throw new Error("frame truncated");
  }
  return {
    tick,
    paletteVersion,
    width,
    height,
    png: data.slice(HEADER_BYTES, HEADER_BYTES + pngLength),
  };
}

export type CommandKind =
  | "play"
  | "pause"
  | "step_once"
  | "set_seed"
  | "set_alpha"
  | "set_sigma"
  | "set_strength"
  | "update_mask"
  | "register_brush"
  | "remove_brush"
  | "set_background";

export interface CommandDoc {
  id?: number;
  kind: CommandKind;
  [field: string]: unknown;
}

export interface AckMessage {
  type: "ack" | "error";
  id: number | null;
  tick?: number;
  result?: unknown;
  message?: string;
}

export function parseReply(text: string): AckMessage {
  const doc = JSON.parse(text);
  if (doc.type !== "ack" && doc.type !== "error") {
    throw new Error(`unexpected reply type ${JSON.stringify(doc.type)}`);
  }
  return doc as AckMessage;
}

export function bytesToBase64(data: Uint8Array): string {
  let binary = "";
  const CHUNK = 0x8000;
  for (let i = 0; i < data.length; i += CHUNK) {
    binary += String.fromCharCode(...data.subarray(i, i + CHUNK));
  }
  return btoa(binary);
}
