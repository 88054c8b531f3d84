/** Session wire protocol: JSON text up, binary PCM frames down.
 *
 * Frame layout, little-endian: u32 magic 0x50534F4E, u32 sequence,
 * u64 starting sample index, u16 frame count F, then F interleaved
 * stereo float32 samples.
 */

export const STREAM_MAGIC = 0x50534f4e;
export const WIRE_FRAME = 960; // samples per frame (20 ms at 48 kHz)
export const HEADER_BYTES = 18;

export interface AudioFrame {
  sequence: number;
  sampleIndex: number;
  frameCount: number;
  /** interleaved stereo: L R L R ... */
  samples: Float32Array;
}

export function decodeFrame(buf: ArrayBuffer): AudioFrame {
  const view = new DataView(buf);
  const magic = view.getUint32(0, true);
  if (magic !== STREAM_MAGIC) {
    throw new Error(`bad stream magic 0x${magic.toString(16)}`);
  }
  const sequence = view.getUint32(4, true);
  const sampleIndex = Number(view.getBigUint64(8, true));
  const frameCount = view.getUint16(16, true);
  const samples = new Float32Array(frameCount * 2);
  for (let i = 0; i < samples.length; i++) {
    samples[i] = view.getFloat32(HEADER_BYTES + 4 * i, true);
  }
  return { sequence, sampleIndex, frameCount, samples };
}

/** Inverse of decodeFrame; the test harness uses it to fake a server. */
export function encodeFrame(frame: AudioFrame): ArrayBuffer {
  const buf = new ArrayBuffer(HEADER_BYTES + frame.samples.length * 4);
  const view = new DataView(buf);
  view.setUint32(0, STREAM_MAGIC, true);
  view.setUint32(4, frame.sequence, true);
  view.setBigUint64(8, BigInt(frame.sampleIndex), true);
  view.setUint16(16, frame.frameCount, true);
  for (let i = 0; i < frame.samples.length; i++) {
    view.setFloat32(HEADER_BYTES + 4 * i, frame.samples[i], true);
  }
  return buf;
}

export type ClientMessage =
  | { type: "pose"; x: number; y: number; yaw: number }
  | { type: "transport"; value: "play" | "stop" }
  | { type: "set"; source: string; path: string; value: unknown }
  | { type: "record"; value: "start" | "stop" };

export type ServerText =
  | { type: "error"; code: string; message: string }
  | { type: "record"; value: "stopped"; url: string; frames: number };

export const poseMessage = (x: number, y: number, yaw: number): ClientMessage => ({
  type: "pose",
  x,
  y,
  yaw,
});
export const transportMessage = (value: "play" | "stop"): ClientMessage => ({
  type: "transport",
  value,
});
export const setMessage = (source: string, path: string, value: unknown): ClientMessage => ({
  type: "set",
  source,
  path,
  value,
});
export const recordMessage = (value: "start" | "stop"): ClientMessage => ({
  type: "record",
  value,
});
