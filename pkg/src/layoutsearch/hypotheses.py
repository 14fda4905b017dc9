"""Symmetry maximization and the four segmentation-hypothesis graphs."""

from __future__ import annotations

from dataclasses import dataclass

from .blocks import (
    HYPOTHESIS_IDS,
    NONTEXT,
    TEXT,
    Block,
    LayoutGraph,
    build_adjacency,
)
from .geometry import Rect, h_overlap, v_overlap


@dataclass(frozen=True)
class HorizontalLine:
    y: float
    x0: float
    x1: float


def alignment_tolerance(avg_char_height_doc: float) -> float:
    return max(3.0, 0.25 * avg_char_height_doc)


def edges_aligned(a: Rect, b: Rect, tol: float) -> bool:
    """Left, right or center alignment within tolerance."""
    return (
        abs(a.x - b.x) <= tol
        or abs(a.right - b.right) <= tol
        or abs(a.cx - b.cx) <= tol
    )


def same_char_height(h1: float, h2: float) -> bool:
    return abs(h1 - h2) <= 0.2 * max(h1, h2)


def _line_between(a: Rect, b: Rect, lines: list[HorizontalLine]) -> bool:
    """A horizontal line lies in the vertical gap and crosses the shared span."""
    top, bot = (a, b) if a.y <= b.y else (b, a)
    x0 = min(a.x, b.x)
    x1 = max(a.right, b.right)
    for ln in lines:
        if top.bottom <= ln.y <= bot.y and ln.x1 > x0 and ln.x0 < x1:
            return True
    return False


def _merge_blocks(a: Block, b: Block, kind: str) -> Block:
    bbox = a.bbox.union(b.bbox)
    wa, wb = a.bbox.area, b.bbox.area
    ach = (a.avg_char_height_block * wa + b.avg_char_height_block * wb) / (wa + wb)
    return Block(
        block_id=min(a.block_id, b.block_id),
        bbox=bbox,
        kind=kind,
        avg_char_height_block=ach,
    )


def symmetry_maximize(
    blocks: list[Block],
    lines: list[HorizontalLine],
    avg_char_height_doc: float,
    page_dims: tuple[float, float],
    doc_id: str = "",
) -> LayoutGraph:
    """Merge vertically adjacent text blocks until no pair qualifies.

    A pair is merged when all four conditions hold: edge alignment, equal
    character height, vertical distance below the document character height,
    and no horizontal ruling in between.
    """
    tol = alignment_tolerance(avg_char_height_doc)
    work = list(blocks)
    changed = True
    while changed:
        changed = False
        graph = build_adjacency(work, page_dims)
        for bid in sorted(graph.blocks, key=lambda i: (graph.blocks[i].bbox.y,
                                                       graph.blocks[i].bbox.x, i)):
            a = graph.blocks[bid]
            if a.kind != TEXT:
                continue
            for nid in graph.neighbors[bid]["bottom"]:
                b = graph.blocks[nid]
                if b.kind != TEXT:
                    continue
                gap = max(0.0, b.bbox.y - a.bbox.bottom)
                if (
                    edges_aligned(a.bbox, b.bbox, tol)
                    and same_char_height(a.avg_char_height_block, b.avg_char_height_block)
                    and gap < avg_char_height_doc
                    and not _line_between(a.bbox, b.bbox, lines)
                ):
                    merged = _merge_blocks(a, b, TEXT)
                    work = [x for x in work if x.block_id not in (a.block_id, b.block_id)]
                    work.append(merged)
                    changed = True
                    break
            if changed:
                break
    return build_adjacency(work, page_dims, doc_id=doc_id, hypothesis_id="H1",
                           avg_char_height_doc=avg_char_height_doc)


def _rebuilt(graph: LayoutGraph, blocks: list[Block], hypothesis_id: str) -> LayoutGraph:
    return build_adjacency(
        blocks,
        (graph.page_w, graph.page_h),
        doc_id=graph.doc_id,
        hypothesis_id=hypothesis_id,
        avg_char_height_doc=graph.avg_char_height_doc,
    )


def hypothesis_remove_small(graph: LayoutGraph) -> LayoutGraph:
    """H2: drop blocks no taller than the document character height that sit
    sandwiched between two text blocks."""
    ach = graph.avg_char_height_doc
    doomed = set()
    for bid, b in graph.blocks.items():
        if b.height > ach:
            continue
        tops = graph.neighbors[bid]["top"]
        bots = graph.neighbors[bid]["bottom"]
        if any(graph.blocks[t].kind == TEXT for t in tops) and any(
            graph.blocks[t].kind == TEXT for t in bots
        ):
            doomed.add(bid)
    keep = [b for bid, b in graph.blocks.items() if bid not in doomed]
    return _rebuilt(graph, keep, "H2")


def hypothesis_merge_nontext(graph: LayoutGraph) -> LayoutGraph:
    """H3: merge close-by aligned non-text blocks to a fixpoint."""
    ach = graph.avg_char_height_doc
    tol = alignment_tolerance(ach)
    work = list(graph.blocks.values())
    changed = True
    while changed:
        changed = False
        g = build_adjacency(work, (graph.page_w, graph.page_h))
        for bid in sorted(g.blocks):
            a = g.blocks[bid]
            if a.kind != NONTEXT:
                continue
            for d in ("bottom", "right"):
                for nid in g.neighbors[bid][d]:
                    b = g.blocks[nid]
                    if b.kind != NONTEXT:
                        continue
                    if d == "bottom":
                        gap = max(0.0, b.bbox.y - a.bbox.bottom)
                        aligned = edges_aligned(a.bbox, b.bbox, tol)
                    else:
                        gap = max(0.0, b.bbox.x - a.bbox.right)
                        ra = Rect(a.bbox.y, a.bbox.x, a.bbox.h, a.bbox.w)
                        rb = Rect(b.bbox.y, b.bbox.x, b.bbox.h, b.bbox.w)
                        aligned = edges_aligned(ra, rb, tol)
                    if aligned and gap < 2 * ach:
                        merged = _merge_blocks(a, b, NONTEXT)
                        work = [x for x in work
                                if x.block_id not in (a.block_id, b.block_id)]
                        work.append(merged)
                        changed = True
                        break
                if changed:
                    break
            if changed:
                break
    return _rebuilt(graph, work, "H3")


def _nearest(graph: LayoutGraph, bid: int, direction: str) -> int | None:
    """Closest neighbor in a vertical direction by facing-edge distance."""
    ids = graph.neighbors[bid][direction]
    if not ids:
        return None
    if direction == "top":
        return max(ids, key=lambda i: (graph.blocks[i].bbox.bottom, -i))
    return min(ids, key=lambda i: (graph.blocks[i].bbox.y, i))


def hypothesis_remove_captions(graph: LayoutGraph) -> LayoutGraph:
    """H4: drop single-line text blocks hugging a non-text neighbor."""
    ach = graph.avg_char_height_doc
    doomed = set()
    for bid, b in graph.blocks.items():
        if b.kind != TEXT or b.height > 1.5 * ach:
            continue
        for d in ("top", "bottom"):
            nid = _nearest(graph, bid, d)
            if nid is None:
                continue
            nb = graph.blocks[nid]
            if nb.kind != NONTEXT:
                continue
            if d == "top":
                gap = max(0.0, b.bbox.y - nb.bbox.bottom)
            else:
                gap = max(0.0, nb.bbox.y - b.bbox.bottom)
            if gap <= ach:
                doomed.add(bid)
                break
    keep = [b for bid, b in graph.blocks.items() if bid not in doomed]
    return _rebuilt(graph, keep, "H4")


def build_all_hypotheses(
    raw_blocks: list[Block],
    lines: list[HorizontalLine],
    page_dims: tuple[float, float],
    doc_id: str = "",
    avg_char_height_doc: float | None = None,
) -> list[LayoutGraph]:
    """Emit the four stored graphs: H1 plus its three independent variants."""
    if avg_char_height_doc is None:
        text_achs = sorted(
            b.avg_char_height_block for b in raw_blocks
            if b.kind == TEXT and b.avg_char_height_block > 0
        )
        if text_achs:
            avg_char_height_doc = text_achs[len(text_achs) // 2]
        else:
            heights = sorted(b.height for b in raw_blocks) or [10.0]
            avg_char_height_doc = heights[len(heights) // 2]
    h1 = symmetry_maximize(raw_blocks, lines, avg_char_height_doc, page_dims,
                           doc_id=doc_id)
    h2 = hypothesis_remove_small(h1)
    h3 = hypothesis_merge_nontext(h1)
    h4 = hypothesis_remove_captions(h1)
    return [h1, h2, h3, h4]
