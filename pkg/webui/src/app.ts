/** Application controller: top playback bar, room view, side panel, one
 * live session. Create mode edits everything; experience mode strips the
 * editing surfaces down to transport, record, touch arrows and the
 * listener options, with title/description/tags visible but fixed. */

import { ServiceClient, type FetchLike } from "./api.js";
import type { Point, SoundscapeDoc } from "./types.js";
import { SidePanel } from "./panels.js";
import { StreamPlayer } from "./player.js";
import {
  poseMessage,
  recordMessage,
  setMessage,
  transportMessage,
  type ClientMessage,
} from "./protocol.js";
import { RoomView } from "./roomview.js";
import { Session, type WebSocketFactory } from "./session.js";
import { Store } from "./store.js";

export interface AppOptions {
  baseUrl: string;
  fetchImpl?: FetchLike;
  wsFactory?: WebSocketFactory;
  experienceMode?: boolean;
}

export class App {
  readonly store = new Store();
  readonly client: ServiceClient;
  readonly session: Session;
  readonly element: HTMLElement;
  readonly room: RoomView;
  readonly panel: SidePanel;
  private readonly player = new StreamPlayer();
  statusText = "";
  lastRecordingUrl: string | null = null;

  constructor(private readonly options: AppOptions) {
    this.client = new ServiceClient(
      options.baseUrl,
      options.fetchImpl ?? ((u, i) => fetch(u, i)),
    );
    this.store.experienceMode = options.experienceMode ?? false;
    this.session = new Session(
      options.wsFactory ?? ((url) => new WebSocket(url) as unknown as never),
      {
        onFrame: (frame) => this.player.enqueue(frame),
        onServerMessage: (msg) => {
          if (msg.type === "record" && msg.value === "stopped") {
            this.lastRecordingUrl = msg.url;
            this.store.recording = false;
            this.statusText = `recording saved: ${msg.url}`;
            this.store.notify();
          } else if (msg.type === "error") {
            this.statusText = `${msg.code}: ${msg.message}`;
            this.store.notify();
          }
        },
        onOpen: () => {
          this.store.sessionStatus = "streaming";
          this.store.notify();
        },
        onClose: () => {
          this.store.sessionStatus = "disconnected";
          this.store.notify();
        },
        onSent: (msg) => this.store.logMessage(msg),
      },
    );

    this.element = document.createElement("div");
    this.element.className = "app";
    this.room = new RoomView(this.store, {
      onSourceMoved: (id, pos) => this.sendLive(setMessage(id, "position", pos)),
      onListenerMoved: (pose) => this.sendLive(poseMessage(pose.x, pose.y, pose.yaw)),
    });
    this.panel = new SidePanel(this.store, {
      onSourceParam: (id, path, value) => this.sendLive(setMessage(id, path, value)),
      onAddFromLibrary: (assetId, name) => this.addSourceFromAsset(assetId, name),
      onUploadFiles: (files) => void this.uploadFiles(files),
    });
    this.buildChrome();
    this.store.subscribe(() => this.refreshChrome());
  }

  // --- service round-trips ---

  async load(scapeId: string): Promise<void> {
    this.store.loading = true;
    this.store.notify();
    try {
      const doc = await this.client.getSoundscape(scapeId);
      this.store.loadDraft(doc, scapeId);
      for (const src of doc.sources) {
        const uri = src.asset.uri;
        if (uri) {
          const assetId = uri.split("/").pop() ?? uri;
          this.store.addLibraryEntry({ assetId, name: src.name, duration: src.asset.duration });
        }
      }
    } finally {
      this.store.loading = false;
      this.store.notify();
    }
  }

  /** Uploads the draft; returns the stored (content-addressed) id. */
  async save(): Promise<string> {
    const { id } = await this.client.putSoundscape(this.store.serializeDraft());
    this.store.scapeId = id;
    this.statusText = `saved as ${id}`;
    this.store.notify();
    return id;
  }

  async uploadFiles(files: FileList): Promise<void> {
    this.store.loading = true;
    this.store.notify();
    try {
      for (const file of Array.from(files)) {
        const meta = await this.client.putAsset(await file.arrayBuffer());
        this.store.addLibraryEntry({
          assetId: meta.id,
          name: file.name.replace(/\.wav$/i, ""),
          duration: meta.duration,
        });
      }
    } finally {
      this.store.loading = false;
      this.store.notify();
    }
  }

  addSourceFromAsset(assetId: string, name: string, at?: Point): void {
    const src = this.store.addSource(name, { uri: `/assets/${assetId}` });
    if (at) this.store.moveSource(src.id, at);
  }

  // --- session ---

  connect(): void {
    if (!this.store.scapeId) return;
    this.store.sessionStatus = "connecting";
    this.store.notify();
    this.session.connect(this.client.sessionUrl(this.store.scapeId));
  }

  private sendLive(msg: ClientMessage): void {
    if (this.session.connected) this.session.send(msg);
  }

  play(): void {
    if (!this.session.connected) this.connect();
    const pose = this.store.livePose;
    this.session.send(poseMessage(pose.x, pose.y, pose.yaw));
    this.session.send(transportMessage("play"));
    this.store.transport = "playing";
    this.store.notify();
  }

  stop(): void {
    this.sendLive(transportMessage("stop"));
    this.store.transport = "stopped";
    this.player.stop();
    this.store.notify();
  }

  toggleRecord(): void {
    if (!this.session.connected) return;
    this.store.recording = !this.store.recording;
    this.session.send(recordMessage(this.store.recording ? "start" : "stop"));
    this.store.notify();
  }

  // --- chrome (top bar) ---

  private topBar!: HTMLElement;

  private buildChrome(): void {
    this.topBar = document.createElement("header");
    this.topBar.className = "top-bar";
    this.element.append(this.topBar, this.room.element, this.panel.element);
    this.refreshChrome();

    document.addEventListener("keydown", (ev) => {
      if (ev.key.startsWith("Arrow")) {
        this.room.keyDown(ev.key);
        ev.preventDefault();
      }
    });
    document.addEventListener("keyup", (ev) => {
      if (ev.key.startsWith("Arrow")) this.room.keyUp(ev.key);
    });
    this.startWalkLoop();
  }

  private startWalkLoop(): void {
    if (typeof requestAnimationFrame !== "function") return;
    let last = performance.now();
    const tick = (now: number) => {
      this.room.walkTick((now - last) / 1000);
      last = now;
      requestAnimationFrame(tick);
    };
    requestAnimationFrame(tick);
  }

  private refreshChrome(): void {
    this.topBar.replaceChildren();
    const play = document.createElement("button");
    play.dataset.transport = "";
    play.textContent = this.store.transport === "playing" ? "Stop" : "Play";
    play.addEventListener("click", () => (this.store.transport === "playing" ? this.stop() : this.play()));
    this.topBar.appendChild(play);

    const record = document.createElement("button");
    record.dataset.record = "";
    record.textContent = this.store.recording ? "Stop recording" : "Record";
    record.addEventListener("click", () => this.toggleRecord());
    this.topBar.appendChild(record);

    if (!this.store.experienceMode) {
      const save = document.createElement("button");
      save.dataset.save = "";
      save.textContent = "Save";
      save.addEventListener("click", () => void this.save());
      this.topBar.appendChild(save);
    }

    // touch arrows: four-way on-screen walking control
    const arrows = document.createElement("div");
    arrows.className = "touch-arrows";
    for (const [key, glyph] of [
      ["ArrowUp", "↑"],
      ["ArrowLeft", "←"],
      ["ArrowDown", "↓"],
      ["ArrowRight", "→"],
    ] as const) {
      const btn = document.createElement("button");
      btn.textContent = glyph;
      btn.dataset.arrow = key;
      btn.addEventListener("pointerdown", () => this.room.keyDown(key));
      btn.addEventListener("pointerup", () => this.room.keyUp(key));
      btn.addEventListener("pointerleave", () => this.room.keyUp(key));
      arrows.appendChild(btn);
    }
    this.topBar.appendChild(arrows);

    const status = document.createElement("span");
    status.className = "status";
    status.dataset.status = "";
    status.textContent = this.store.loading
      ? "Loading..."
      : `${this.store.sessionStatus}${this.statusText ? " - " + this.statusText : ""}`;
    this.topBar.appendChild(status);
  }
}
