import { MatchJson } from "./types.js";

export interface OverlayRect {
  x: number;
  y: number;
  w: number;
  h: number;
  kind: string;
  queryBlock: number;
}

// Scale server-side page coordinates to the displayed image size.
export function overlayRects(
  match: MatchJson,
  pageW: number,
  pageH: number,
  displayW: number,
  displayH: number,
): OverlayRect[] {
  const sx = displayW / pageW;
  const sy = displayH / pageH;
  const out: OverlayRect[] = [];
  for (const entry of match.mapping) {
    for (const b of entry.doc_blocks) {
      out.push({
        x: b.x * sx,
        y: b.y * sy,
        w: b.w * sx,
        h: b.h * sy,
        kind: b.kind,
        queryBlock: entry.query_block,
      });
    }
  }
  return out;
}

export interface SchematicBlock {
  x: number;
  y: number;
  w: number;
  h: number;
  kind: string;
  matched: boolean;
}

interface HypothesisJson {
  page: { w: number; h: number };
  hypotheses: Array<{
    blocks: Array<{ id: number; x: number; y: number; w: number; h: number; kind: string }>;
  }>;
}

// Annotation-only documents have no raster image; render the block graph
// itself, highlighting the matched blocks.
export function schematicBlocks(
  doc: HypothesisJson,
  match: MatchJson,
  displayW: number,
  displayH: number,
): SchematicBlock[] {
  const sx = displayW / doc.page.w;
  const sy = displayH / doc.page.h;
  const matched = new Set<string>();
  for (const entry of match.mapping) {
    for (const b of entry.doc_blocks) {
      matched.add(`${b.x},${b.y},${b.w},${b.h}`);
    }
  }
  const hyp = doc.hypotheses[0];
  return hyp.blocks.map((b) => ({
    x: b.x * sx,
    y: b.y * sy,
    w: b.w * sx,
    h: b.h * sy,
    kind: b.kind,
    matched: matched.has(`${b.x},${b.y},${b.w},${b.h}`),
  }));
}
