/** Streamed-PCM playback: decoded stereo frames are copied into
 * AudioBuffers and scheduled back to back on the context clock. There is
 * no client-side DSP; whatever the engine streamed is what plays. */

import type { AudioFrame } from "./protocol.js";

const RATE = 48_000;

export class StreamPlayer {
  private ctx: AudioContext | null = null;
  private nextStart = 0;

  /** True when the environment can actually play audio. */
  get available(): boolean {
    return typeof AudioContext !== "undefined";
  }

  enqueue(frame: AudioFrame): void {
    if (!this.available) return;
    if (!this.ctx) {
      this.ctx = new AudioContext({ sampleRate: RATE });
      this.nextStart = this.ctx.currentTime;
    }
    const ctx = this.ctx;
    const buf = ctx.createBuffer(2, frame.frameCount, RATE);
    const left = buf.getChannelData(0);
    const right = buf.getChannelData(1);
    for (let i = 0; i < frame.frameCount; i++) {
      left[i] = frame.samples[2 * i];
      right[i] = frame.samples[2 * i + 1];
    }
    const node = ctx.createBufferSource();
    node.buffer = buf;
    node.connect(ctx.destination);
    // if we fell behind (tab hiccup), restart at "now" instead of bursting
    this.nextStart = Math.max(this.nextStart, ctx.currentTime);
    node.start(this.nextStart);
    this.nextStart += buf.duration;
  }

  stop(): void {
    if (this.ctx) {
      void this.ctx.close();
      this.ctx = null;
    }
  }
}
