/**
 * The studio document: reference layer, contour/detail stroke lists, mask,
 * prompt and linked concept, with undo/redo over immutable snapshots so the
 * layers can never desynchronize.
 */

import { makeStroke, Stroke, StrokeKind, strokesFromJson, strokesToJson } from "./strokes.js";

export interface MaskLayer {
  kind: "polygon" | "auto";
  vertices: [number, number][]; // empty for auto masks
}

export interface DocumentState {
  strokes: Stroke[];
  mask: MaskLayer | null;
  prompt: string;
  conceptId: string | null;
}

const emptyState = (): DocumentState => ({
  strokes: [],
  mask: null,
  prompt: "",
  conceptId: null,
});

const cloneState = (s: DocumentState): DocumentState => ({
  strokes: s.strokes.map((st) => ({ ...st, points: st.points.map((p) => [...p] as [number, number]) })),
  mask: s.mask ? { kind: s.mask.kind, vertices: s.mask.vertices.map((p) => [...p] as [number, number]) } : null,
  prompt: s.prompt,
  conceptId: s.conceptId,
});

export class CanvasDocument {
  private state: DocumentState = emptyState();
  private undoStack: DocumentState[] = [];
  private redoStack: DocumentState[] = [];

  get current(): DocumentState {
    return this.state;
  }

  get strokes(): Stroke[] {
    return this.state.strokes;
  }

  strokesOf(kind: StrokeKind): Stroke[] {
    return this.state.strokes.filter((s) => s.kind === kind);
  }

  private commit(next: DocumentState): void {
    this.undoStack.push(this.state);
    this.state = next;
    this.redoStack = [];
  }

  /** Append a pointer path as a stroke; single-point paths are discarded. */
  drawStroke(kind: StrokeKind, path: [number, number][], width = 1): boolean {
    const stroke = makeStroke(kind, path, width);
    if (stroke === null) return false;
    const next = cloneState(this.state);
    next.strokes.push(stroke);
    this.commit(next);
    return true;
  }

  setPrompt(prompt: string): void {
    const next = cloneState(this.state);
    next.prompt = prompt;
    this.commit(next);
  }

  linkConcept(conceptId: string | null): void {
    const next = cloneState(this.state);
    next.conceptId = conceptId;
    this.commit(next);
  }

  /** Manual polygon mask (>= 3 vertices) or a server-side auto mask. */
  setMask(layer: MaskLayer | null): void {
    if (layer && layer.kind === "polygon" && layer.vertices.length < 3) {
      throw new Error("polygon mask needs at least 3 vertices");
    }
    const next = cloneState(this.state);
    next.mask = layer;
    this.commit(next);
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (prev === undefined) return false;
    this.redoStack.push(this.state);
    this.state = prev;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (next === undefined) return false;
    this.undoStack.push(this.state);
    this.state = next;
    return true;
  }

  serializeStrokes(): string {
    return strokesToJson(this.state.strokes);
  }

  loadStrokes(json: string): void {
    const strokes = strokesFromJson(json);
    const next = cloneState(this.state);
    next.strokes = strokes;
    this.commit(next);
  }

  snapshot(): DocumentState {
    return cloneState(this.state);
  }

  equalsState(other: DocumentState): boolean {
    return JSON.stringify(this.state) === JSON.stringify(other);
  }
}
