export type Kind = "text" | "nontext" | "any";
export type Region = "top" | "bottom" | "left" | "right" | "center";

export const REGIONS: Region[] = ["top", "bottom", "left", "right", "center"];

export const KIND_COLORS: Record<Kind, string> = {
  text: "#3fb5c4",
  nontext: "#e87aa0",
  any: "#9e9e9e",
};

export const KIND_CYCLE: Record<Kind, Kind> = {
  text: "nontext",
  nontext: "any",
  any: "text",
};

export interface SketchRect {
  id: number;
  x: number;
  y: number;
  w: number;
  h: number;
  kind: Kind;
}

export interface SketchState {
  canvasW: number;
  canvasH: number;
  layouts: Map<string, SketchRect[]>;
  activeLayout: string;
  expression: string;
  regions: Map<string, Region | null>;
}

export interface QueryBlockJson {
  x: number;
  y: number;
  w: number;
  h: number;
  kind: Kind;
}

export interface QueryJson {
  canvas: { w: number; h: number };
  expr?: string;
  layouts: Record<string, { blocks: QueryBlockJson[] }>;
}

export interface MappedBlock {
  x: number;
  y: number;
  w: number;
  h: number;
  kind: string;
}

export interface MatchMapping {
  query_block: number;
  doc_blocks: MappedBlock[];
}

export interface MatchJson {
  hypothesis: string;
  bbox: { x: number; y: number; w: number; h: number };
  mapping: MatchMapping[];
}

export interface ResultJson {
  doc_id: string;
  score: number;
  matches: MatchJson[];
}

export interface QueryResponse {
  results: ResultJson[];
}
