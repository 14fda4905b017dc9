// DOM wiring: sketch canvas, layout tabs, expression composer, and the
// ranked results gallery with match overlays.

import { ApiClient } from "./api.js";
import { formatAtom } from "./grammar.js";
import { overlayRects, schematicBlocks } from "./overlay.js";
import {
  activeRects,
  addLayout,
  addRect,
  createState,
  deleteRect,
  refineFromMatch,
  serialize,
  setRegion,
  toggleKind,
  validate,
} from "./state.js";
import {
  KIND_COLORS,
  MatchJson,
  Region,
  REGIONS,
  ResultJson,
  SketchState,
} from "./types.js";

const THUMB_W = 160;
const THUMB_H = 200;

export class SketchApp {
  private state: SketchState = createState();
  private selected: number | null = null;
  private drag: { x: number; y: number } | null = null;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {
    this.render();
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    cls?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (cls) node.className = cls;
    return node;
  }

  private render(): void {
    this.root.textContent = "";
    this.root.append(
      this.renderTabs(),
      this.renderCanvas(),
      this.renderComposer(),
      this.el("div", "results"),
    );
  }

  private renderTabs(): HTMLElement {
    const bar = this.el("div", "tabs");
    for (const name of this.state.layouts.keys()) {
      const tab = this.el("button", name === this.state.activeLayout ? "tab active" : "tab");
      tab.textContent = name;
      tab.onclick = () => {
        this.state.activeLayout = name;
        this.render();
      };
      bar.append(tab);
    }
    const add = this.el("button", "tab add");
    add.textContent = "+";
    add.onclick = () => {
      const name = prompt("layout name");
      if (name && addLayout(this.state, name)) this.render();
    };
    bar.append(add);
    return bar;
  }

  private renderCanvas(): HTMLElement {
    const canvas = this.el("canvas", "sketch");
    canvas.width = this.state.canvasW;
    canvas.height = this.state.canvasH;
    const ctx = canvas.getContext("2d")!;
    const paint = () => {
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      ctx.strokeStyle = "#ccc";
      ctx.strokeRect(0, 0, canvas.width, canvas.height);
      for (const r of activeRects(this.state)) {
        ctx.fillStyle = KIND_COLORS[r.kind];
        ctx.globalAlpha = 0.6;
        ctx.fillRect(r.x, r.y, r.w, r.h);
        ctx.globalAlpha = 1.0;
        ctx.strokeStyle = r.id === this.selected ? "#000" : "#666";
        ctx.strokeRect(r.x, r.y, r.w, r.h);
      }
    };
    paint();

    const pos = (ev: MouseEvent) => {
      const rect = canvas.getBoundingClientRect();
      return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
    };
    canvas.onmousedown = (ev) => {
      const p = pos(ev);
      const hit = [...activeRects(this.state)]
        .reverse()
        .find((r) => p.x >= r.x && p.x <= r.x + r.w && p.y >= r.y && p.y <= r.y + r.h);
      if (hit) {
        this.selected = hit.id;
      } else {
        this.drag = p;
        this.selected = null;
      }
      paint();
    };
    canvas.onmouseup = (ev) => {
      if (this.drag) {
        const p = pos(ev);
        const made = addRect(
          this.state,
          this.drag.x,
          this.drag.y,
          p.x - this.drag.x,
          p.y - this.drag.y,
        );
        if (made) this.selected = made.id;
        this.drag = null;
        paint();
      }
    };
    canvas.ondblclick = () => {
      if (this.selected !== null) {
        toggleKind(this.state, this.selected);
        paint();
      }
    };
    canvas.tabIndex = 0;
    canvas.onkeydown = (ev) => {
      if ((ev.key === "Delete" || ev.key === "Backspace") && this.selected !== null) {
        deleteRect(this.state, this.selected);
        this.selected = null;
        paint();
      }
    };
    return canvas;
  }

  private renderComposer(): HTMLElement {
    const box = this.el("div", "composer");
    const regionRow = this.el("div", "regions");
    for (const name of this.state.layouts.keys()) {
      const label = this.el("label");
      label.textContent = `${name}: `;
      const select = this.el("select");
      const none = this.el("option");
      none.value = "";
      none.textContent = "anywhere";
      select.append(none);
      for (const region of REGIONS) {
        const opt = this.el("option");
        opt.value = region;
        opt.textContent = region;
        select.append(opt);
      }
      select.value = this.state.regions.get(name) ?? "";
      select.onchange = () => {
        setRegion(this.state, name, (select.value || null) as Region | null);
        input.value = this.defaultExpression();
        this.state.expression = input.value;
        refresh();
      };
      label.append(select);
      regionRow.append(label);
    }

    const input = this.el("input");
    input.type = "text";
    input.placeholder = "expression, e.g. (A,bottom) AND NOT B";
    input.value = this.state.expression;
    const errors = this.el("div", "errors");
    const submit = this.el("button", "submit");
    submit.textContent = "Search";

    const refresh = () => {
      const issues = validate(this.state);
      errors.textContent = issues.map((i) => i.message).join("; ");
      submit.disabled = issues.length > 0;
    };
    input.oninput = () => {
      this.state.expression = input.value;
      refresh();
    };
    submit.onclick = () => void this.submit();
    refresh();

    box.append(regionRow, input, errors, submit);
    return box;
  }

  // Region chips without a typed expression produce the canonical form,
  // e.g. A=bottom, B untouched -> "(A,bottom) AND B".
  private defaultExpression(): string {
    const parts: string[] = [];
    for (const [name, rects] of this.state.layouts) {
      if (rects.length === 0) continue;
      parts.push(formatAtom(name, this.state.regions.get(name) ?? null));
    }
    return parts.join(" AND ");
  }

  private async submit(): Promise<void> {
    if (!this.state.expression.trim() && this.state.regions.size > 0) {
      this.state.expression = this.defaultExpression();
    }
    const response = await this.api.query(serialize(this.state));
    if (response === null) return; // superseded by a newer query
    this.renderResults(response.results);
  }

  private renderResults(results: ResultJson[]): void {
    const panel = this.root.querySelector(".results")!;
    panel.textContent = "";
    for (const result of results) {
      const card = this.el("div", "card");
      const title = this.el("div", "title");
      title.textContent = `${result.doc_id}  (${result.score.toFixed(3)})`;
      const view = this.el("canvas", "thumb");
      view.width = THUMB_W;
      view.height = THUMB_H;
      const match = result.matches[0];
      if (match) {
        void this.drawThumb(view, result.doc_id, match);
        view.onclick = () => {
          refineFromMatch(this.state, match);
          this.render();
        };
      }
      card.append(title, view);
      panel.append(card);
    }
  }

  private async drawThumb(
    canvas: HTMLCanvasElement,
    docId: string,
    match: MatchJson,
  ): Promise<void> {
    const ctx = canvas.getContext("2d")!;
    const doc = (await this.api.hypothesis(docId, match.hypothesis)) as {
      page: { w: number; h: number };
      hypotheses: Array<{
        blocks: Array<{ id: number; x: number; y: number; w: number; h: number; kind: string }>;
      }>;
    };
    const image = new Image();
    image.onload = () => {
      ctx.drawImage(image, 0, 0, canvas.width, canvas.height);
      this.drawOverlays(ctx, doc.page, match, canvas);
    };
    image.onerror = () => {
      // No raster source: draw the block graph schematically.
      for (const b of schematicBlocks(doc, match, canvas.width, canvas.height)) {
        ctx.fillStyle = b.kind === "text" ? "#cfe9ee" : "#f3d2de";
        ctx.fillRect(b.x, b.y, b.w, b.h);
      }
      this.drawOverlays(ctx, doc.page, match, canvas);
    };
    image.src = this.api.imageUrl(docId);
  }

  private drawOverlays(
    ctx: CanvasRenderingContext2D,
    page: { w: number; h: number },
    match: MatchJson,
    canvas: HTMLCanvasElement,
  ): void {
    ctx.lineWidth = 2;
    for (const r of overlayRects(match, page.w, page.h, canvas.width, canvas.height)) {
      ctx.strokeStyle = r.queryBlock < 0 ? "#9e9e9e" : "#d32f2f";
      ctx.strokeRect(r.x, r.y, r.w, r.h);
    }
  }
}

export function mount(rootId = "app", baseUrl = ""): SketchApp {
  const root = document.getElementById(rootId);
  if (!root) throw new Error(`no element #${rootId}`);
  return new SketchApp(root, new ApiClient(baseUrl));
}
