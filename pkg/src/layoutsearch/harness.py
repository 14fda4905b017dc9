"""Synthetic corpus generation, the brute-force oracle, and retrieval
statistics (recall / precision / timing, plus the hypothesis ablation)."""

from __future__ import annotations

import random
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .blocks import NONTEXT, TEXT, Block, LayoutGraph
from .geometry import Rect
from .hypotheses import build_all_hypotheses
from .index import CorpusStore
from .matching import MatchResult, retrieve
from .query import QueryLayout, QueryValidationError, build_layout
from .raster import ingest_page


@dataclass
class SynthParams:
    seed: int = 0
    docs: int = 100
    page_w: float = 800.0
    page_h: float = 1000.0
    depth_min: int = 2
    depth_max: int = 3
    nontext_prob: float = 0.3
    small_block_rate: float = 0.0
    caption_rate: float = 0.0
    nontext_cluster_rate: float = 0.0
    char_height: float = 10.0
    gutter: float = 16.0
    min_cell: float = 90.0
    raster: bool = False


@dataclass
class PlantSpec:
    """A layout to hide in the corpus as standalone documents.

    `blocks` is the full arrangement in canvas coordinates; `query_ids`
    selects which of them the query shows (the others become vacancies).
    """

    name: str
    canvas: tuple[float, float]
    blocks: list[tuple[Rect, str]]  # kind: text | nontext | any
    query_ids: list[int]
    count: int = 1


@dataclass
class Planted:
    query_name: str
    doc_id: str
    mapping: dict[int, int]  # query block id -> document block id
    transform: tuple[float, float, float, float]  # sx, sy, tx, ty


@dataclass
class GroundTruth:
    instances: list[Planted] = field(default_factory=list)

    def relevant(self, query_name: str) -> set[str]:
        return {p.doc_id for p in self.instances if p.query_name == query_name}


def guillotine_cells(rng: random.Random, rect: Rect, depth: int,
                     min_cell: float) -> list[Rect]:
    if depth <= 0 or (rect.w < 2 * min_cell and rect.h < 2 * min_cell):
        return [rect]
    can_v = rect.w >= 2 * min_cell
    can_h = rect.h >= 2 * min_cell
    if can_v and can_h:
        vertical = rng.random() < (rect.w / (rect.w + rect.h))
    else:
        vertical = can_v
    frac = rng.uniform(0.35, 0.65)
    if vertical:
        cut = rect.x + frac * rect.w
        a = Rect(rect.x, rect.y, cut - rect.x, rect.h)
        b = Rect(cut, rect.y, rect.right - cut, rect.h)
    else:
        cut = rect.y + frac * rect.h
        a = Rect(rect.x, rect.y, rect.w, cut - rect.y)
        b = Rect(rect.x, cut, rect.w, rect.bottom - cut)
    return guillotine_cells(rng, a, depth - 1, min_cell) + guillotine_cells(
        rng, b, depth - 1, min_cell
    )


def _inset(cell: Rect, gutter: float) -> Rect:
    g = gutter / 2.0
    return Rect(cell.x + g, cell.y + g, max(1.0, cell.w - gutter),
                max(1.0, cell.h - gutter))


def _decoy_small(rect: Rect, ach: float, next_id: int) -> list[Block]:
    """Text / small text line / two-column text, for the H2 ablation."""
    gap = 1.2 * ach
    top_h = 0.35 * rect.h
    line_y = rect.y + top_h + gap
    row_y = line_y + ach + gap
    half = (rect.w - 2 * gap) / 2.0
    line_w = 0.4 * rect.w  # centered author line, does not occlude the row
    return [
        Block(next_id, Rect(rect.x, rect.y, rect.w, top_h), TEXT, ach),
        Block(next_id + 1, Rect(rect.cx - line_w / 2, line_y, line_w, ach),
              TEXT, ach),
        Block(next_id + 2, Rect(rect.x, row_y, half, rect.bottom - row_y), TEXT, ach),
        Block(next_id + 3, Rect(rect.x + half + 2 * gap, row_y,
                                half, rect.bottom - row_y), TEXT, ach),
    ]


def _decoy_caption(rect: Rect, ach: float, next_id: int) -> list[Block]:
    """Image / caption line / two-column text, for the H4 ablation."""
    gap = 0.8 * ach
    img_h = 0.4 * rect.h
    cap_y = rect.y + img_h + gap
    cap_h = 1.4 * ach
    row_y = cap_y + cap_h + 2 * ach
    half = (rect.w - 4 * ach) / 2.0
    return [
        Block(next_id, Rect(rect.x, rect.y, rect.w, img_h), NONTEXT, 0.0),
        Block(next_id + 1, Rect(rect.x, cap_y, rect.w, cap_h), TEXT, ach),
        Block(next_id + 2, Rect(rect.x, row_y, half, rect.bottom - row_y), TEXT, ach),
        Block(next_id + 3, Rect(rect.x + half + 4 * ach, row_y,
                                half, rect.bottom - row_y), TEXT, ach),
    ]


def _decoy_cluster(rect: Rect, ach: float, next_id: int) -> list[Block]:
    """Tall text beside a stack of two aligned images, for the H3 ablation."""
    gap = 1.5 * ach
    left_w = 0.45 * rect.w
    img_x = rect.x + left_w + 2 * ach
    img_w = rect.right - img_x
    img_h = (rect.h - gap) / 2.0
    return [
        Block(next_id, Rect(rect.x, rect.y, left_w, rect.h), TEXT, ach),
        Block(next_id + 1, Rect(img_x, rect.y, img_w, img_h), NONTEXT, 0.0),
        Block(next_id + 2, Rect(img_x, rect.y + img_h + gap, img_w, img_h),
              NONTEXT, 0.0),
    ]


def random_page_blocks(rng: random.Random, params: SynthParams) -> list[Block]:
    page = Rect(0, 0, params.page_w, params.page_h)
    ach = params.char_height
    # A decoy, when rolled, takes the full-width bottom strip of the page so
    # nothing below it adds visible neighbors to the decoy structure.
    roll = rng.random()
    decoy_fn = None
    if roll < params.small_block_rate:
        decoy_fn = _decoy_small
    elif roll < params.small_block_rate + params.caption_rate:
        decoy_fn = _decoy_caption
    elif (roll < params.small_block_rate + params.caption_rate
          + params.nontext_cluster_rate):
        decoy_fn = _decoy_cluster
    region = page
    decoy_rect = None
    if decoy_fn is not None:
        cut = 0.6 * page.h
        region = Rect(page.x, page.y, page.w, cut)
        decoy_rect = _inset(Rect(page.x, cut, page.w, page.h - cut),
                            params.gutter)
    depth = rng.randint(params.depth_min, params.depth_max)
    cells = guillotine_cells(rng, region, depth, params.min_cell)
    blocks: list[Block] = []
    for cell in cells:
        rect = _inset(cell, params.gutter)
        if rng.random() < params.nontext_prob:
            blocks.append(Block(len(blocks), rect, NONTEXT, 0.0))
        else:
            blocks.append(Block(len(blocks), rect, TEXT, ach))
    if decoy_fn is not None:
        blocks.extend(decoy_fn(decoy_rect, ach, len(blocks)))
    return blocks


def plant_blocks(
    rng: random.Random, spec: PlantSpec, params: SynthParams
) -> tuple[list[Block], tuple[float, float, float, float]]:
    cw, ch = spec.canvas
    sx = rng.uniform(0.5, min(2.0, params.page_w / cw))
    sy = rng.uniform(0.5, min(2.0, params.page_h / ch))
    tx = rng.uniform(0.0, params.page_w - sx * cw)
    ty = rng.uniform(0.0, params.page_h - sy * ch)
    blocks = []
    for i, (r, kind) in enumerate(spec.blocks):
        if kind == "any":
            kind = TEXT if rng.random() < 0.5 else NONTEXT
        bbox = Rect(tx + sx * r.x, ty + sy * r.y, sx * r.w, sy * r.h)
        ach = params.char_height if kind == TEXT else 0.0
        blocks.append(Block(i, bbox, kind, ach))
    return blocks, (sx, sy, tx, ty)


def render_page(blocks: list[Block], params: SynthParams) -> np.ndarray:
    """Rasterize: text blocks as ruled line bars, nontext as solid ink."""
    img = np.full((int(params.page_h), int(params.page_w)), 255, dtype=np.uint8)
    h = max(2, int(round(params.char_height)))
    for b in blocks:
        x0, y0 = int(round(b.bbox.x)), int(round(b.bbox.y))
        x1, y1 = int(round(b.bbox.right)), int(round(b.bbox.bottom))
        if b.kind == NONTEXT:
            img[y0:y1, x0:x1] = 0
        else:
            # Dashed bars: word-sized runs so no component is ruling-shaped.
            seg = 3 * h
            y = y0
            while y + h <= y1:
                x = x0
                while x < x1:
                    img[y : y + h, x : min(x + seg, x1)] = 0
                    x += seg + h
                y += 2 * h
    return img


def graphs_for_blocks(
    blocks: list[Block], doc_id: str, params: SynthParams
) -> list[LayoutGraph]:
    if params.raster:
        img = render_page(blocks, params)
        res = ingest_page(img)
        return build_all_hypotheses(
            res.blocks, res.lines, res.page_dims, doc_id=doc_id,
            avg_char_height_doc=res.avg_char_height_doc,
        )
    return build_all_hypotheses(
        blocks, [], (params.page_w, params.page_h), doc_id=doc_id,
        avg_char_height_doc=params.char_height,
    )


def synth_corpus(
    params: SynthParams, plantings: list[PlantSpec] | None = None
) -> tuple[dict[str, list[LayoutGraph]], GroundTruth]:
    """Deterministic corpus: random guillotine pages plus planted layouts
    (each planted instance is its own document)."""
    rng = random.Random(params.seed)
    docs: dict[str, list[LayoutGraph]] = {}
    truth = GroundTruth()
    for i in range(params.docs):
        doc_id = f"doc-{i:04d}"
        blocks = random_page_blocks(rng, params)
        docs[doc_id] = graphs_for_blocks(blocks, doc_id, params)
    for spec in plantings or []:
        for j in range(spec.count):
            doc_id = f"plant-{spec.name}-{j:03d}"
            blocks, transform = plant_blocks(rng, spec, params)
            docs[doc_id] = graphs_for_blocks(blocks, doc_id, params)
            mapping = {qpos: full_idx
                       for qpos, full_idx in enumerate(spec.query_ids)}
            truth.instances.append(
                Planted(spec.name, doc_id, mapping, transform)
            )
    return docs, truth


def store_from_docs(
    docs: dict[str, list[LayoutGraph]], n_bins: int = 4093,
    hypotheses: tuple[str, ...] = ("H1", "H2", "H3", "H4"),
) -> CorpusStore:
    store = CorpusStore(n_bins)
    for doc_id in sorted(docs):
        graphs = [g for g in docs[doc_id] if g.hypothesis_id in hypotheses]
        store.insert_document(graphs, meta={"source": "synthetic"})
    return store


def query_layout_for_spec(spec: PlantSpec) -> QueryLayout:
    raw = []
    for i in spec.query_ids:
        r, kind = spec.blocks[i]
        raw.append({"x": r.x, "y": r.y, "w": r.w, "h": r.h, "kind": kind})
    return build_layout(raw, spec.canvas[0], spec.canvas[1])


def brute_force_retrieve(store: CorpusStore, layout: QueryLayout) -> list[MatchResult]:
    """Oracle: attempt matching from every block of every hypothesis graph."""
    return retrieve(store, layout, use_hash=False)


def _spec_retrievable(spec: PlantSpec, layout: QueryLayout,
                      params: SynthParams) -> bool:
    """Check that an identity-planted instance of the spec is retrieved.

    The base adjacency graph is invariant under per-axis scaling and
    translation, so success here guarantees success for every planted copy.
    """
    check = random.Random(0)
    blocks = []
    for i, (r, kind) in enumerate(spec.blocks):
        if kind == "any":
            kind = TEXT if check.random() < 0.5 else NONTEXT
        ach = params.char_height if kind == TEXT else 0.0
        blocks.append(Block(i, r, kind, ach))
    graphs = build_all_hypotheses(
        blocks, [], (params.page_w, params.page_h), doc_id="probe",
        avg_char_height_doc=params.char_height,
    )
    store = store_from_docs({"probe": graphs}, n_bins=61, hypotheses=("H1",))
    return any(m.doc_id == "probe" for m in retrieve(store, layout))


def random_layout_spec(
    rng: random.Random,
    name: str,
    query_type: int,
    count: int = 1,
    params: SynthParams | None = None,
) -> PlantSpec:
    """Random guillotine arrangement whose sketch is of the requested type.

    Types 4-6 drop one non-reference block so its area becomes a vacancy.
    Rerolls until the sketch retrieves an identity-planted instance, which
    makes every planted copy of the spec retrievable by construction.
    """
    if query_type not in range(1, 7):
        raise ValueError(f"query type must be 1-6, got {query_type}")
    params = params or SynthParams()
    want_dummy = query_type > 3
    base = query_type - 3 if want_dummy else query_type
    while True:
        depth = 2 if want_dummy else rng.randint(1, 2)
        cells = guillotine_cells(rng, Rect(0, 0, 400.0, 400.0), depth, 130.0)
        if len(cells) < (3 if want_dummy else 2):
            continue
        rects = [_inset(c, 22.0) for c in cells]
        if base == 1:
            kinds = [rng.choice((TEXT, NONTEXT)) for _ in rects]
        elif base == 2:
            kinds = ["any" for _ in rects]
        else:
            kinds = [rng.choice((TEXT, NONTEXT, "any")) for _ in rects]
        query_ids = list(range(len(rects)))
        if want_dummy:
            ref = min(query_ids, key=lambda i: (rects[i].y, rects[i].x))
            query_ids.remove(rng.choice([i for i in query_ids if i != ref]))
        qkinds = [kinds[i] for i in query_ids]
        if base == 3 and not (
            "any" in qkinds and any(k != "any" for k in qkinds)
        ):
            continue
        spec = PlantSpec(
            name=name,
            canvas=(400.0, 400.0),
            blocks=list(zip(rects, kinds)),
            query_ids=query_ids,
            count=count,
        )
        try:
            layout = query_layout_for_spec(spec)
        except QueryValidationError:
            continue
        if layout.query_type != query_type:
            continue
        if _spec_retrievable(spec, layout, params):
            return spec


@dataclass
class EvalRow:
    query_type: int
    documents: int
    recall: float
    precision: float
    mean_time_s: float
    relevant: int = 0
    relevant_retrieved: int = 0
    retrieved: int = 0


@dataclass
class EvalReport:
    rows: dict[int, EvalRow] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            str(t): {
                "query_type": r.query_type,
                "documents": r.documents,
                "recall": r.recall,
                "precision": r.precision,
                "time": r.mean_time_s,
            }
            for t, r in sorted(self.rows.items())
        }


def evaluate(
    store: CorpusStore,
    battery: list[tuple[str, QueryLayout]],
    relevant: dict[str, set[str]],
    use_hash: bool = True,
    runs: int = 3,
) -> EvalReport:
    """Recall / precision / median-timing per query type."""
    agg: dict[int, dict] = {}
    for name, layout in battery:
        times = []
        results: list[MatchResult] = []
        for _ in range(runs):
            t0 = time.perf_counter()
            results = retrieve(store, layout, use_hash=use_hash)
            times.append(time.perf_counter() - t0)
        retrieved = {m.doc_id for m in results}
        rel = relevant.get(name, set())
        stats = agg.setdefault(
            layout.query_type,
            {"docs": 0, "rel_ret": 0, "rel": 0, "ret": 0, "times": []},
        )
        stats["docs"] += len(retrieved)
        stats["rel_ret"] += len(retrieved & rel)
        stats["rel"] += len(rel)
        stats["ret"] += len(retrieved)
        stats["times"].append(statistics.median(times))
    report = EvalReport()
    for qtype, s in agg.items():
        recall = 100.0 * s["rel_ret"] / s["rel"] if s["rel"] else 100.0
        precision = 100.0 * s["rel_ret"] / s["ret"] if s["ret"] else 100.0
        report.rows[qtype] = EvalRow(
            query_type=qtype,
            documents=s["docs"],
            recall=recall,
            precision=precision,
            mean_time_s=sum(s["times"]) / len(s["times"]),
            relevant=s["rel"],
            relevant_retrieved=s["rel_ret"],
            retrieved=s["ret"],
        )
    return report


def ablate_hypotheses(
    docs: dict[str, list[LayoutGraph]],
    battery: list[tuple[str, QueryLayout]],
    n_bins: int = 4093,
    runs: int = 1,
) -> tuple[EvalReport, EvalReport]:
    """Evaluate with H1-only indexing vs all four hypotheses.

    Relevance is oracle-defined on the full store, so precision measures
    only pruning/hypothesis effects."""
    full = store_from_docs(docs, n_bins)
    h1_only = store_from_docs(docs, n_bins, hypotheses=("H1",))
    relevant = {
        name: {m.doc_id for m in brute_force_retrieve(full, layout)}
        for name, layout in battery
    }
    report_h1 = evaluate(h1_only, battery, relevant, runs=runs)
    report_all = evaluate(full, battery, relevant, runs=runs)
    return report_h1, report_all
