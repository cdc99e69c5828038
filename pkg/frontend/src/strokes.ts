/**
 * Stroke model and the platform wire format.
 *
 * A stroke is a polyline in the unit square with a kind (contour strokes are
 * rendered blue, detail strokes red) and a pixel width. Serialization must
 * round-trip losslessly; the server derives rasters from this JSON.
 */

export type StrokeKind = "contour" | "detail";

export interface Stroke {
  kind: StrokeKind;
  width: number;
  points: [number, number][];
}

export interface StrokeWire {
  kind: StrokeKind;
  width: number;
  points: number[][];
}

const clamp01 = (v: number): number => Math.min(1, Math.max(0, v));

/** Validate and normalize a pointer path into a stroke; null if degenerate. */
export function makeStroke(
  kind: StrokeKind,
  path: [number, number][],
  width = 1,
): Stroke | null {
  const points = path.map(([x, y]) => [clamp01(x), clamp01(y)] as [number, number]);
  if (points.length < 2) return null; // single-point strokes are discarded
  if (width < 1 || !Number.isInteger(width)) throw new Error(`bad stroke width ${width}`);
  return { kind, width, points };
}

export function strokeToWire(stroke: Stroke): StrokeWire {
  return {
    kind: stroke.kind,
    width: stroke.width,
    points: stroke.points.map(([x, y]) => [x, y]),
  };
}

export function strokeFromWire(wire: StrokeWire): Stroke {
  if (wire.kind !== "contour" && wire.kind !== "detail") {
    throw new Error(`unknown stroke kind ${String(wire.kind)}`);
  }
  if (!Array.isArray(wire.points) || wire.points.length < 2) {
    throw new Error("stroke needs at least 2 points");
  }
  return {
    kind: wire.kind,
    width: wire.width ?? 1,
    points: wire.points.map((p) => {
      if (p.length !== 2) throw new Error("points must be [x, y] pairs");
      return [p[0], p[1]] as [number, number];
    }),
  };
}

export function strokesToJson(strokes: Stroke[]): string {
  return JSON.stringify(strokes.map(strokeToWire));
}

export function strokesFromJson(text: string): Stroke[] {
  const parsed = JSON.parse(text);
  if (!Array.isArray(parsed)) throw new Error("stroke JSON must be a list");
  return parsed.map(strokeFromWire);
}
