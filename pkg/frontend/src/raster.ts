/**
 * Client-side rasterization mirroring the server conventions: normalized
 * coordinates scale by (size - 1) with round-to-nearest, lines are drawn
 * 8-connected (Bresenham), no anti-aliasing. Used to sanity-check ink counts
 * against the server's echo endpoint.
 */

import type { Stroke } from "./strokes.js";

export interface InkCounts {
  contour: number;
  detail: number;
}

function plotLine(
  set: Set<number>,
  w: number,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
): void {
  const dx = Math.abs(x1 - x0);
  const dy = -Math.abs(y1 - y0);
  const sx = x0 < x1 ? 1 : -1;
  const sy = y0 < y1 ? 1 : -1;
  let err = dx + dy;
  let x = x0;
  let y = y0;
  for (;;) {
    set.add(y * w + x);
    if (x === x1 && y === y1) break;
    const e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

function stamp(set: Set<number>, w: number, h: number, width: number): Set<number> {
  if (width <= 1) return set;
  const r = Math.floor(width / 2);
  const out = new Set<number>();
  for (const idx of set) {
    const cx = idx % w;
    const cy = Math.floor(idx / w);
    for (let dy = -r; dy <= r; dy++) {
      for (let dx = -r; dx <= r; dx++) {
        const x = cx + dx;
        const y = cy + dy;
        if (x >= 0 && x < w && y >= 0 && y < h) out.add(y * w + x);
      }
    }
  }
  return out;
}

export function rasterizeStrokes(
  strokes: Stroke[],
  height: number,
  width: number,
): { contour: Set<number>; detail: Set<number> } {
  const layers = { contour: new Set<number>(), detail: new Set<number>() };
  for (const stroke of strokes) {
    let ink = new Set<number>();
    const px = stroke.points.map(([x, y]) => [
      Math.round(x * (width - 1)),
      Math.round(y * (height - 1)),
    ]);
    for (let i = 0; i + 1 < px.length; i++) {
      plotLine(ink, width, px[i][0], px[i][1], px[i + 1][0], px[i + 1][1]);
    }
    ink = stamp(ink, width, height, stroke.width);
    for (const idx of ink) layers[stroke.kind].add(idx);
  }
  return layers;
}

export function inkCounts(strokes: Stroke[], height: number, width: number): InkCounts {
  const layers = rasterizeStrokes(strokes, height, width);
  return { contour: layers.contour.size, detail: layers.detail.size };
}

/** Scanline fill of a polygon given in normalized coordinates. */
export function fillPolygon(
  vertices: [number, number][],
  height: number,
  width: number,
): Uint8Array {
  const mask = new Uint8Array(height * width);
  if (vertices.length < 3) throw new Error("polygon needs at least 3 vertices");
  const px = vertices.map(([x, y]) => [x * (width - 1), y * (height - 1)]);
  for (let row = 0; row < height; row++) {
    const yc = row;
    const xs: number[] = [];
    for (let i = 0; i < px.length; i++) {
      const [x0, y0] = px[i];
      const [x1, y1] = px[(i + 1) % px.length];
      if (y0 === y1) continue;
      if ((yc >= y0 && yc < y1) || (yc >= y1 && yc < y0)) {
        xs.push(x0 + ((yc - y0) * (x1 - x0)) / (y1 - y0));
      }
    }
    xs.sort((a, b) => a - b);
    for (let i = 0; i + 1 < xs.length; i += 2) {
      const lo = Math.max(0, Math.ceil(xs[i]));
      const hi = Math.min(width - 1, Math.floor(xs[i + 1]));
      for (let x = lo; x <= hi; x++) mask[row * width + x] = 1;
    }
  }
  return mask;
}

/** Run-length encode a mask in the platform wire format. */
export function maskToRle(mask: Uint8Array, height: number, width: number) {
  const runs: number[] = [];
  let pos = 0;
  const total = height * width;
  while (pos < total) {
    if (mask[pos]) {
      const start = pos;
      while (pos < total && mask[pos]) pos++;
      runs.push(start, pos - start);
    } else {
      pos++;
    }
  }
  return { shape: [height, width], runs };
}
