/** Soundscape document shapes, mirroring docs/soundscape.schema.json.
 * Index signatures keep unknown fields intact across load/save. */

export interface Point {
  x: number;
  y: number;
}

export interface AssetDoc {
  uri?: string;
  data?: string;
  media_type?: string;
  channels?: number;
  sample_rate?: number;
  duration?: number;
  [key: string]: unknown;
}

export interface TimingDoc {
  after_source: string;
  mode: "after_completes" | "after_starts";
  [key: string]: unknown;
}

export interface SourceDoc {
  id: string;
  name: string;
  asset: AssetDoc;
  position_mode: "absolute" | "relative";
  position: Point;
  elevation: number;
  gain_db: number;
  loop: boolean;
  reach_enabled: boolean;
  reach_radius: number;
  reach_fade_duration: number;
  start_on_enter: boolean;
  hidden: boolean;
  spatialized: boolean;
  timings: TimingDoc[];
  [key: string]: unknown;
}

export interface RoomDoc {
  shape: "rectangular" | "round";
  width: number;
  depth: number;
  height: number;
  floorplan?: { uri?: string; data?: string; media_type?: string } | null;
  [key: string]: unknown;
}

export interface ListenerDoc {
  position: Point;
  yaw: number;
  head_circumference: number;
  master_gain_db: number;
  [key: string]: unknown;
}

export interface SoundscapeDoc {
  format_version: number;
  title: string;
  description: string;
  tags: string[];
  room: RoomDoc;
  listener: ListenerDoc;
  sources: SourceDoc[];
  [key: string]: unknown;
}

export function blankSoundscape(): SoundscapeDoc {
  return {
    format_version: 1,
    title: "Untitled soundscape",
    description: "",
    tags: [],
    room: { shape: "rectangular", width: 10, depth: 10, height: 3 },
    listener: { position: { x: 0, y: 0 }, yaw: 0, head_circumference: 0.55, master_gain_db: 0 },
    sources: [],
  };
}

export function defaultSource(id: string, asset: AssetDoc): SourceDoc {
  return {
    id,
    name: id,
    asset,
    position_mode: "absolute",
    position: { x: 0, y: 0 },
    elevation: 0,
    gain_db: 0,
    loop: false,
    reach_enabled: false,
    reach_radius: 3,
    reach_fade_duration: 0,
    start_on_enter: false,
    hidden: false,
    spatialized: true,
    timings: [],
  };
}
