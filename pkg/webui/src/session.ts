/** Live audition session: one WebSocket, JSON up, PCM frames down.
 * The UI never touches audio state except through these messages; every
 * send lands in the store's message log for the dev-mode audit. */

import type { ClientMessage, ServerText } from "./protocol.js";
import { decodeFrame, type AudioFrame } from "./protocol.js";

export interface WebSocketLike {
  binaryType: string;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface SessionHooks {
  onFrame?: (frame: AudioFrame) => void;
  onServerMessage?: (msg: ServerText) => void;
  onOpen?: () => void;
  onClose?: () => void;
  onSent?: (msg: ClientMessage) => void;
}

export class Session {
  private ws: WebSocketLike | null = null;
  framesReceived = 0;
  lastSampleIndex = -1;

  constructor(
    private readonly wsFactory: WebSocketFactory,
    private readonly hooks: SessionHooks = {},
  ) {}

  get connected(): boolean {
    return this.ws !== null;
  }

  connect(url: string): void {
    this.close();
    const ws = this.wsFactory(url);
    ws.binaryType = "arraybuffer";
    ws.onopen = () => this.hooks.onOpen?.();
    ws.onclose = () => {
      this.ws = null;
      this.hooks.onClose?.();
    };
    ws.onerror = () => {
      /* close follows */
    };
    ws.onmessage = (ev) => {
      if (typeof ev.data === "string") {
        this.hooks.onServerMessage?.(JSON.parse(ev.data) as ServerText);
        return;
      }
      const frame = decodeFrame(ev.data as ArrayBuffer);
      this.framesReceived += 1;
      this.lastSampleIndex = frame.sampleIndex;
      this.hooks.onFrame?.(frame);
    };
    this.ws = ws;
  }

  send(msg: ClientMessage): void {
    if (!this.ws) return;
    this.ws.send(JSON.stringify(msg));
    this.hooks.onSent?.(msg);
  }

  close(): void {
    if (this.ws) {
      const ws = this.ws;
      this.ws = null;
      ws.close();
    }
  }
}
