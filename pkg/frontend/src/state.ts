import {
  Kind,
  KIND_CYCLE,
  MatchJson,
  QueryJson,
  Region,
  SketchRect,
  SketchState,
} from "./types.js";
import { validateExpression, ValidationIssue } from "./grammar.js";

export const GRID = 8; // canvas units; snapping keeps adjacency clean

export function snap(v: number, grid: number = GRID): number {
  return Math.round(v / grid) * grid;
}

export function createState(canvasW = 400, canvasH = 400): SketchState {
  return {
    canvasW,
    canvasH,
    layouts: new Map([["A", []]]),
    activeLayout: "A",
    expression: "",
    regions: new Map(),
  };
}

let nextRectId = 1;

function clampRect(
  state: SketchState,
  x: number,
  y: number,
  w: number,
  h: number,
): { x: number; y: number; w: number; h: number } | null {
  if (Math.abs(w) < GRID / 2 || Math.abs(h) < GRID / 2) return null; // a click
  let x0 = snap(Math.max(0, Math.min(x, x + w)));
  let y0 = snap(Math.max(0, Math.min(y, y + h)));
  let x1 = snap(Math.min(state.canvasW, Math.max(x, x + w)));
  let y1 = snap(Math.min(state.canvasH, Math.max(y, y + h)));
  if (x1 - x0 < GRID || y1 - y0 < GRID) return null; // degenerate drag
  return { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
}

export function activeRects(state: SketchState): SketchRect[] {
  return state.layouts.get(state.activeLayout) ?? [];
}

export function addRect(
  state: SketchState,
  x: number,
  y: number,
  w: number,
  h: number,
  kind: Kind = "text",
): SketchRect | null {
  const snapped = clampRect(state, x, y, w, h);
  if (snapped === null) return null;
  const rect: SketchRect = { id: nextRectId++, ...snapped, kind };
  activeRects(state).push(rect);
  return rect;
}

export function moveRect(
  state: SketchState,
  id: number,
  x: number,
  y: number,
): boolean {
  const rect = activeRects(state).find((r) => r.id === id);
  if (!rect) return false;
  rect.x = Math.min(Math.max(0, snap(x)), state.canvasW - rect.w);
  rect.y = Math.min(Math.max(0, snap(y)), state.canvasH - rect.h);
  return true;
}

export function deleteRect(state: SketchState, id: number): boolean {
  const rects = activeRects(state);
  const idx = rects.findIndex((r) => r.id === id);
  if (idx < 0) return false;
  rects.splice(idx, 1);
  return true;
}

export function toggleKind(state: SketchState, id: number): Kind | null {
  const rect = activeRects(state).find((r) => r.id === id);
  if (!rect) return null;
  rect.kind = KIND_CYCLE[rect.kind];
  return rect.kind;
}

export function addLayout(state: SketchState, name: string): boolean {
  if (!/^[A-Za-z_][A-Za-z0-9_]*$/.test(name) || state.layouts.has(name)) {
    return false;
  }
  state.layouts.set(name, []);
  state.activeLayout = name;
  return true;
}

export function removeLayout(state: SketchState, name: string): boolean {
  if (state.layouts.size <= 1 || !state.layouts.has(name)) return false;
  state.layouts.delete(name);
  state.regions.delete(name);
  if (state.activeLayout === name) {
    state.activeLayout = state.layouts.keys().next().value as string;
  }
  return true;
}

export function setRegion(
  state: SketchState,
  layout: string,
  region: Region | null,
): void {
  state.regions.set(layout, region);
}

function nonEmptyLayouts(state: SketchState): Array<[string, SketchRect[]]> {
  return [...state.layouts].filter(([, rects]) => rects.length > 0);
}

// Submission is disabled exactly when this returns issues.
export function validate(state: SketchState): ValidationIssue[] {
  const layouts = nonEmptyLayouts(state);
  if (layouts.length === 0) {
    return [{ message: "sketch at least one rectangle" }];
  }
  const names = layouts.map(([name]) => name);
  const expr = state.expression.trim();
  if (!expr) {
    return names.length === 1
      ? []
      : [{ message: "multiple layouts need an expression" }];
  }
  return validateExpression(expr, names);
}

export function serialize(state: SketchState): QueryJson {
  const layouts: QueryJson["layouts"] = {};
  for (const [name, rects] of nonEmptyLayouts(state)) {
    layouts[name] = {
      blocks: rects.map(({ x, y, w, h, kind }) => ({ x, y, w, h, kind })),
    };
  }
  const query: QueryJson = {
    canvas: { w: state.canvasW, h: state.canvasH },
    layouts,
  };
  const expr = state.expression.trim();
  if (expr) query.expr = expr;
  return query;
}

// Click-to-refine: replace the active layout with a result's matched blocks,
// normalized per axis so the match bbox fills the canvas.
export function refineFromMatch(state: SketchState, match: MatchJson): void {
  const { bbox } = match;
  const sx = state.canvasW / bbox.w;
  const sy = state.canvasH / bbox.h;
  const rects: SketchRect[] = [];
  for (const entry of match.mapping) {
    for (const b of entry.doc_blocks) {
      const kind: Kind = b.kind === "nontext" ? "nontext" : "text";
      rects.push({
        id: nextRectId++,
        x: (b.x - bbox.x) * sx,
        y: (b.y - bbox.y) * sy,
        w: b.w * sx,
        h: b.h * sy,
        kind: entry.query_block < 0 ? "any" : kind,
      });
    }
  }
  state.layouts.set(state.activeLayout, rects);
}
