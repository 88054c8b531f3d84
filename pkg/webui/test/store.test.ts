import { describe, expect, it } from "vitest";

import { clampToRoom } from "../src/geometry.js";
import { Store, formatSlider } from "../src/store.js";
import { blankSoundscape, defaultSource } from "../src/types.js";

function demoDraft() {
  const doc = blankSoundscape();
  doc.title = "demo";
  doc.room.width = 10;
  doc.room.depth = 10;
  doc.sources.push(defaultSource("one", { uri: "/assets/x" }));
  return doc;
}

describe("store", () => {
  it("round-trips the draft structurally", () => {
    const store = new Store();
    const doc = demoDraft();
    (doc as Record<string, unknown>)["exhibition_extra"] = { likes: 3 };
    store.loadDraft(doc, "abc");
    const out = store.serializeDraft();
    expect(out).toEqual(doc);
    expect(out).not.toBe(store.draft); // a copy, not the live object
  });

  it("clamps source moves to the room like the engine", () => {
    const store = new Store();
    store.loadDraft(demoDraft(), null);
    const landed = store.moveSource("one", { x: 99, y: -0.5 });
    expect(landed).toEqual({ x: 5, y: -0.5 });
    expect(store.source("one")!.position).toEqual({ x: 5, y: -0.5 });
  });

  it("clamps round rooms radially", () => {
    const round = { shape: "round", width: 10, depth: 10, height: 3 } as const;
    const p = clampToRoom(round, { x: 8, y: 6 });
    expect(Math.hypot(p.x / 5, p.y / 5)).toBeCloseTo(1, 10);
    expect(p.y / p.x).toBeCloseTo(6 / 8, 10);
  });

  it("generates unique ids when adding sources", () => {
    const store = new Store();
    store.loadDraft(demoDraft(), null);
    const a = store.addSource("Bird Song", { uri: "/assets/b" });
    const b = store.addSource("Bird Song", { uri: "/assets/b" });
    expect(a.id).toBe("bird-song");
    expect(b.id).not.toBe(a.id);
    expect(store.draft.sources).toHaveLength(3);
  });

  it("removing a source drops timing references to it", () => {
    const store = new Store();
    const doc = demoDraft();
    const dep = defaultSource("two", { uri: "/assets/y" });
    dep.timings = [{ after_source: "one", mode: "after_completes" }];
    doc.sources.push(dep);
    store.loadDraft(doc, null);
    store.removeSource("one");
    expect(store.source("two")!.timings).toEqual([]);
  });

  it("adds tags once, trimmed", () => {
    const store = new Store();
    store.loadDraft(demoDraft(), null);
    store.addTag("  garden ");
    store.addTag("garden");
    store.addTag("");
    expect(store.draft.tags).toEqual(["garden"]);
  });

  it("formats sliders to one decimal", () => {
    expect(formatSlider(3.14159)).toBe("3.1");
    expect(formatSlider(-0.04)).toBe("0.0"); // toFixed drops the -0 sign
    expect(formatSlider(2)).toBe("2.0");
  });

  it("logs every sent message for the dev-mode audit", () => {
    const store = new Store();
    store.logMessage({ type: "transport", value: "play" });
    store.logMessage({ type: "pose", x: 0, y: 0, yaw: 0 });
    expect(store.messageLog.map((m) => m.type)).toEqual(["transport", "pose"]);
  });
});
