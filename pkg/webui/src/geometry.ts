/** Room-frame geometry shared by canvas and editing: the same clamping
 * rules the engine applies (per-axis for rectangles, radial projection
 * onto the ellipse for round rooms), and metre <-> pixel mapping.
 *
 * Room frame: origin at the centre, x toward width (right), y toward
 * depth (up on the floor plan). Screen y grows downward, so the mapping
 * flips it.
 */

import type { Point, RoomDoc } from "./types.js";

export function clampToRoom(room: RoomDoc, p: Point): Point {
  if (room.shape === "round") {
    const a = room.width / 2;
    const b = room.depth / 2;
    const s = Math.sqrt((p.x / a) ** 2 + (p.y / b) ** 2);
    return s > 1 ? { x: p.x / s, y: p.y / s } : { x: p.x, y: p.y };
  }
  const hw = room.width / 2;
  const hd = room.depth / 2;
  return {
    x: Math.min(Math.max(p.x, -hw), hw),
    y: Math.min(Math.max(p.y, -hd), hd),
  };
}

export function insideRoom(room: RoomDoc, p: Point): boolean {
  if (room.shape === "round") {
    return (p.x / (room.width / 2)) ** 2 + (p.y / (room.depth / 2)) ** 2 <= 1;
  }
  return Math.abs(p.x) <= room.width / 2 && Math.abs(p.y) <= room.depth / 2;
}

export function distance(a: Point, b: Point): number {
  return Math.hypot(a.x - b.x, a.y - b.y);
}

export interface ViewMapping {
  pxPerMetre: number;
  widthPx: number;
  heightPx: number;
}

export function fitRoom(room: RoomDoc, maxWidthPx: number, maxHeightPx: number): ViewMapping {
  const pxPerMetre = Math.min(maxWidthPx / room.width, maxHeightPx / room.depth);
  return {
    pxPerMetre,
    widthPx: room.width * pxPerMetre,
    heightPx: room.depth * pxPerMetre,
  };
}

export function metresToPx(m: ViewMapping, p: Point): Point {
  return {
    x: m.widthPx / 2 + p.x * m.pxPerMetre,
    y: m.heightPx / 2 - p.y * m.pxPerMetre,
  };
}

export function pxToMetres(m: ViewMapping, px: Point): Point {
  return {
    x: (px.x - m.widthPx / 2) / m.pxPerMetre,
    y: (m.heightPx / 2 - px.y) / m.pxPerMetre,
  };
}
