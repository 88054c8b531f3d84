/** The room view: floor plan underlay, reach circles, draggable source
 * and listener icons. Icons always render above the floor plan, and a
 * reach circle changes color while the listener stands inside it.
 * Dragging updates the draft and, when a session is live, sends the
 * matching set/pose message so the audio follows the hand. */

import { distance, fitRoom, metresToPx, pxToMetres, type ViewMapping } from "./geometry.js";
import type { Point } from "./types.js";
import type { Store } from "./store.js";

export const WALK_SPEED_M_PER_S = 1.5; // arrow-key walking speed

export interface RoomViewHooks {
  onSourceMoved?: (id: string, pos: Point) => void;
  onListenerMoved?: (pose: { x: number; y: number; yaw: number }) => void;
}

type DragTarget = { kind: "source"; id: string } | { kind: "listener" } | null;

export class RoomView {
  readonly element: HTMLElement;
  private mapping: ViewMapping;
  private drag: DragTarget = null;
  private readonly pressed = new Set<string>();

  constructor(
    private readonly store: Store,
    private readonly hooks: RoomViewHooks = {},
    private readonly maxWidthPx = 640,
    private readonly maxHeightPx = 480,
  ) {
    this.element = document.createElement("div");
    this.element.className = "room";
    this.mapping = fitRoom(store.draft.room, maxWidthPx, maxHeightPx);

    this.element.addEventListener("pointerdown", (ev) => this.onPointerDown(ev as PointerEvent));
    this.element.addEventListener("pointermove", (ev) => this.onPointerMove(ev as PointerEvent));
    this.element.addEventListener("pointerup", () => this.onPointerUp());
    this.element.addEventListener("pointerleave", () => this.onPointerUp());

    store.subscribe(() => this.render());
    this.render();
  }

  // --- dragging ---

  private localPoint(ev: { clientX: number; clientY: number }): Point {
    const rect = this.element.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  private onPointerDown(ev: PointerEvent): void {
    const el = (ev.target as HTMLElement).closest?.("[data-drag]") as HTMLElement | null;
    if (!el) return;
    if (el.dataset.drag === "listener") {
      this.drag = { kind: "listener" };
    } else if (el.dataset.sourceId) {
      if (this.store.experienceMode) return; // sources are fixed when exploring
      this.drag = { kind: "source", id: el.dataset.sourceId };
      this.store.selectedSource = el.dataset.sourceId;
      this.store.notify();
    }
  }

  private onPointerMove(ev: PointerEvent): void {
    if (!this.drag) return;
    const m = pxToMetres(this.mapping, this.localPoint(ev));
    if (this.drag.kind === "listener") {
      const pose = this.store.moveListener(m);
      this.hooks.onListenerMoved?.({ ...this.store.livePose, x: pose.x, y: pose.y });
    } else {
      const clamped = this.store.moveSource(this.drag.id, m);
      this.hooks.onSourceMoved?.(this.drag.id, clamped);
    }
  }

  private onPointerUp(): void {
    this.drag = null;
  }

  // --- arrow-key walking ---

  keyDown(key: string): void {
    this.pressed.add(key);
  }

  keyUp(key: string): void {
    this.pressed.delete(key);
  }

  /** Advance the listener for held arrow keys; dt in seconds. */
  walkTick(dt: number): void {
    let dx = 0;
    let dy = 0;
    if (this.pressed.has("ArrowLeft")) dx -= 1;
    if (this.pressed.has("ArrowRight")) dx += 1;
    if (this.pressed.has("ArrowUp")) dy += 1;
    if (this.pressed.has("ArrowDown")) dy -= 1;
    if (dx === 0 && dy === 0) return;
    const norm = Math.hypot(dx, dy);
    const step = (WALK_SPEED_M_PER_S * dt) / norm;
    const pose = this.store.livePose;
    const moved = this.store.moveListener({ x: pose.x + dx * step, y: pose.y + dy * step });
    this.hooks.onListenerMoved?.({ ...this.store.livePose, x: moved.x, y: moved.y });
  }

  // --- rendering ---

  render(): void {
    const { draft, livePose } = this.store;
    this.mapping = fitRoom(draft.room, this.maxWidthPx, this.maxHeightPx);
    const m = this.mapping;
    this.element.style.position = "relative";
    this.element.style.width = `${m.widthPx}px`;
    this.element.style.height = `${m.heightPx}px`;
    this.element.classList.toggle("room-round", draft.room.shape === "round");
    this.element.replaceChildren();

    // layer 0: floor plan image, always under everything else
    const plan = draft.room.floorplan;
    if (plan && (plan.uri || plan.data)) {
      const img = document.createElement("img");
      img.className = "floorplan";
      img.src = plan.uri ?? `data:${plan.media_type ?? "image/png"};base64,${plan.data}`;
      img.style.cssText = "position:absolute;inset:0;width:100%;height:100%;z-index:0;";
      this.element.appendChild(img);
    }

    // layer 1: reach circles (highlighted while the listener is inside)
    for (const src of draft.sources) {
      if (!src.reach_enabled || src.position_mode !== "absolute") continue;
      const c = document.createElement("div");
      const inside =
        distance(src.position, { x: livePose.x, y: livePose.y }) <= src.reach_radius;
      c.className = inside ? "reach reach-inside" : "reach";
      c.dataset.reachFor = src.id;
      const at = metresToPx(m, src.position);
      const r = src.reach_radius * m.pxPerMetre;
      c.style.cssText =
        `position:absolute;z-index:1;border-radius:50%;` +
        `left:${at.x - r}px;top:${at.y - r}px;width:${2 * r}px;height:${2 * r}px;`;
      this.element.appendChild(c);
    }

    // layer 2: source icons (skip hidden ones in experience mode)
    for (const src of draft.sources) {
      if (src.hidden && this.store.experienceMode) continue;
      if (src.position_mode !== "absolute") continue;
      const icon = document.createElement("div");
      icon.className = "icon source-icon";
      if (src.id === this.store.selectedSource) icon.classList.add("selected");
      icon.dataset.sourceId = src.id;
      icon.dataset.drag = "source";
      icon.title = src.name;
      icon.textContent = "♫";
      const at = metresToPx(m, src.position);
      icon.style.cssText = `position:absolute;z-index:2;left:${at.x - 12}px;top:${at.y - 12}px;`;
      this.element.appendChild(icon);
    }

    // layer 3: the listener
    const lis = document.createElement("div");
    lis.className = "icon listener-icon";
    lis.dataset.drag = "listener";
    lis.textContent = "☉";
    const at = metresToPx(m, { x: livePose.x, y: livePose.y });
    lis.style.cssText =
      `position:absolute;z-index:3;left:${at.x - 12}px;top:${at.y - 12}px;` +
      `transform:rotate(${-livePose.yaw}rad);`;
    this.element.appendChild(lis);
  }
}
