/** WebSocket client: frame delivery, command acks, auto-reconnect.
 *
 * The socket is injected as a factory so the same client runs on the
 * browser WebSocket, the `ws` package, or a test double.  Frame handling
 * never blocks on command replies: replies are matched to requests by id.
 */

import { AckMessage, CommandDoc, parseFrame, parseReply } from "./protocol.js";
import type { ConnectionStatus, FrameMessage } from "./types.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  binaryType?: string;
  // eslint-disable-next-line @typescript-eslint/no-explicit-any
  onopen: ((event: any) => void) | null;
  onclose: ((event: any) => void) | null;
  onerror: ((event: any) => void) | null;
  onmessage: ((event: any) => void) | null;
}

export interface StreamClientOptions {
  reconnectDelayMs?: number;
  onFrame?: (frame: FrameMessage) => void;
  onStatus?: (status: ConnectionStatus) => void;
}

interface PendingCommand {
  resolve: (ack: AckMessage) => void;
  reject: (error: Error) => void;
}

function toBytes(data: unknown): Uint8Array | null {
  if (data instanceof Uint8Array) return data;
  if (data instanceof ArrayBuffer) return new Uint8Array(data);
  if (ArrayBuffer.isView(data)) {
    const view = data as ArrayBufferView;
    return new Uint8Array(view.buffer, view.byteOffset, view.byteLength);
  }
  return null;
}

export class StreamClient {
  status: ConnectionStatus = "closed";
  lastFrame: FrameMessage | null = null;
  private socket: SocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, PendingCommand>();
  private closedByUser = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly makeSocket: () => SocketLike,
    private readonly options: StreamClientOptions = {},
  ) {}

  connect(): void {
    this.closedByUser = false;
    this.open();
  }

  private open(): void {
    this.setStatus(this.status === "closed" ? "connecting" : "reconnecting");
    const socket = this.makeSocket();
    this.socket = socket;
    if ("binaryType" in socket) socket.binaryType = "arraybuffer";
    socket.onopen = () => this.setStatus("open");
    socket.onmessage = (event) => this.handleMessage(event.data);
    socket.onerror = () => {
      /* onclose follows; reconnect handles it */
    };
    socket.onclose = () => {
      this.failPending("connection lost");
      if (this.closedByUser) {
        this.setStatus("closed");
        return;
      }
      this.setStatus("reconnecting");
      const delay = this.options.reconnectDelayMs ?? 1000;
      this.reconnectTimer = setTimeout(() => this.open(), delay);
    };
  }

  close(): void {
    this.closedByUser = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
    this.setStatus("closed");
  }

  private setStatus(status: ConnectionStatus): void {
    this.status = status;
    this.options.onStatus?.(status);
  }

  private handleMessage(data: unknown): void {
    const bytes = toBytes(data);
    if (bytes !== null) {
      const frame = parseFrame(bytes);
      this.lastFrame = frame;
      this.options.onFrame?.(frame);
      return;
    }
    const reply = parseReply(String(data));
    if (reply.id != null) {
      const pending = this.pending.get(reply.id as number);
      if (pending) {
        this.pending.delete(reply.id as number);
        pending.resolve(reply);
      }
    }
  }

  private failPending(reason: string): void {
    for (const [, pending] of this.pending) {
      pending.reject(new Error(reason));
    }
    this.pending.clear();
  }

  send(doc: CommandDoc): Promise<AckMessage> {
    if (!this.socket || this.status !== "open") {
      return Promise.reject(new Error("stream is not connected"));
    }
    const id = this.nextId++;
    const promise = new Promise<AckMessage>((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
    });
    this.socket.send(JSON.stringify({ ...doc, id }));
    return promise;
  }

  play(): Promise<AckMessage> {
    return this.send({ kind: "play" });
  }

  pause(): Promise<AckMessage> {
    return this.send({ kind: "pause" });
  }

  stepOnce(): Promise<AckMessage> {
    return this.send({ kind: "step_once" });
  }

  setSeed(value: number): Promise<AckMessage> {
    return this.send({ kind: "set_seed", value });
  }

  setAlpha(brushId: number, value: number): Promise<AckMessage> {
    return this.send({ kind: "set_alpha", brush_id: brushId, value });
  }

  setSigma(brushId: number, value: number): Promise<AckMessage> {
    return this.send({ kind: "set_sigma", brush_id: brushId, value });
  }

  setStrength(brushId: number, value: number): Promise<AckMessage> {
    return this.send({ kind: "set_strength", brush_id: brushId, value });
  }

  updateMask(brushId: number, maskPngBase64: string): Promise<AckMessage> {
    return this.send({ kind: "update_mask", brush_id: brushId, mask_png_b64: maskPngBase64 });
  }

  removeBrush(brushId: number): Promise<AckMessage> {
    return this.send({ kind: "remove_brush", brush_id: brushId });
  }
}
