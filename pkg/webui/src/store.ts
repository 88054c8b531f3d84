/** Central UI state: the soundscape draft, selection, session status and
 * the auditable log of every message sent to the service. All edits go
 * through methods here so the draft always stays serializable and the
 * canvas/panels just re-render from snapshots. */

import { clampToRoom } from "./geometry.js";
import type { ClientMessage } from "./protocol.js";
import type { AssetDoc, Point, SoundscapeDoc, SourceDoc } from "./types.js";
import { blankSoundscape, defaultSource } from "./types.js";

export type PanelTab = "sources" | "search" | "room" | "listener" | "exhibition";
export type SessionStatus = "disconnected" | "connecting" | "streaming";

export interface LibraryEntry {
  assetId: string;
  name: string;
  duration?: number;
}

export class Store {
  draft: SoundscapeDoc = blankSoundscape();
  scapeId: string | null = null;
  selectedSource: string | null = null;
  panelTab: PanelTab = "sources";
  panelOpen = true;
  sessionStatus: SessionStatus = "disconnected";
  transport: "stopped" | "playing" = "stopped";
  recording = false;
  loading = false; // "Loading..." indicator while assets/documents fetch
  experienceMode = false;
  /** listener pose while auditioning (draft.listener.position is the saved one) */
  livePose: { x: number; y: number; yaw: number };
  library: LibraryEntry[] = [];
  messageLog: ClientMessage[] = [];

  private listeners = new Set<() => void>();

  constructor() {
    const p = this.draft.listener.position;
    this.livePose = { x: p.x, y: p.y, yaw: this.draft.listener.yaw };
  }

  subscribe(fn: () => void): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  notify(): void {
    for (const fn of this.listeners) fn();
  }

  logMessage(msg: ClientMessage): void {
    this.messageLog.push(msg);
  }

  loadDraft(doc: SoundscapeDoc, scapeId: string | null): void {
    this.draft = structuredClone(doc);
    this.scapeId = scapeId;
    this.selectedSource = this.draft.sources[0]?.id ?? null;
    const p = this.draft.listener.position;
    this.livePose = { x: p.x, y: p.y, yaw: this.draft.listener.yaw };
    this.notify();
  }

  /** Structural copy of the draft, the exact document that save() uploads. */
  serializeDraft(): SoundscapeDoc {
    return structuredClone(this.draft);
  }

  source(id: string): SourceDoc | undefined {
    return this.draft.sources.find((s) => s.id === id);
  }

  /** Drag/edit position; clamped at the room boundary like the engine. */
  moveSource(id: string, p: Point): Point {
    const src = this.source(id);
    if (!src) return p;
    const clamped = src.position_mode === "absolute" ? clampToRoom(this.draft.room, p) : p;
    src.position = { x: clamped.x, y: clamped.y };
    this.notify();
    return clamped;
  }

  moveListener(p: Point, yaw?: number): Point {
    const clamped = clampToRoom(this.draft.room, p);
    this.livePose = { x: clamped.x, y: clamped.y, yaw: yaw ?? this.livePose.yaw };
    this.notify();
    return clamped;
  }

  updateSource(id: string, patch: Partial<SourceDoc>): void {
    const src = this.source(id);
    if (!src) return;
    Object.assign(src, patch);
    this.notify();
  }

  addSource(name: string, asset: AssetDoc): SourceDoc {
    let id = name.toLowerCase().replace(/[^a-z0-9]+/g, "-").replace(/^-+|-+$/g, "") || "source";
    let n = 1;
    while (this.source(id)) id = `${id.replace(/-\d+$/, "")}-${++n}`;
    const src = defaultSource(id, asset);
    src.name = name;
    this.draft.sources.push(src);
    this.selectedSource = id;
    this.notify();
    return src;
  }

  removeSource(id: string): void {
    this.draft.sources = this.draft.sources.filter((s) => s.id !== id);
    for (const s of this.draft.sources) {
      s.timings = s.timings.filter((t) => t.after_source !== id);
    }
    if (this.selectedSource === id) this.selectedSource = this.draft.sources[0]?.id ?? null;
    this.notify();
  }

  addTag(tag: string): void {
    const t = tag.trim();
    if (t && !this.draft.tags.includes(t)) {
      this.draft.tags.push(t);
      this.notify();
    }
  }

  removeTag(tag: string): void {
    this.draft.tags = this.draft.tags.filter((t) => t !== tag);
    this.notify();
  }

  addLibraryEntry(entry: LibraryEntry): void {
    if (!this.library.some((e) => e.assetId === entry.assetId)) {
      this.library.push(entry);
      this.notify();
    }
  }
}

/** Slider values show one decimal everywhere (evaluation feedback: finer
 * text made precise entry hard, coarser hid the change). */
export function formatSlider(value: number): string {
  return (Math.round(value * 10) / 10).toFixed(1);
}
