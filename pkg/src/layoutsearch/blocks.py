"""Layout blocks and the 4-directional adjacency graph built over them."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .geometry import Rect, h_overlap, v_overlap

DIRECTIONS = ("top", "bottom", "left", "right")
OPPOSITE = {"top": "bottom", "bottom": "top", "left": "right", "right": "left"}
LOCATIONS = ("top", "bottom", "left", "right", "center")
HYPOTHESIS_IDS = ("H1", "H2", "H3", "H4")

TEXT = "text"
NONTEXT = "nontext"


class DuplicateBlockError(ValueError):
    pass


def spatial_location(bbox: Rect, page_w: float, page_h: float) -> str:
    """Quantize a block centroid into one of five page regions.

    Center wins when both normalized coordinates fall in the middle third;
    otherwise the label is the direction of largest displacement from the
    page center, with the vertical axis winning ties.
    """
    u = bbox.cx / page_w
    v = bbox.cy / page_h
    if 1 / 3 <= u <= 2 / 3 and 1 / 3 <= v <= 2 / 3:
        return "center"
    du = u - 0.5
    dv = v - 0.5
    if abs(dv) >= abs(du):
        return "top" if dv < 0 else "bottom"
    return "left" if du < 0 else "right"


@dataclass(frozen=True)
class Block:
    block_id: int
    bbox: Rect
    kind: str  # TEXT or NONTEXT
    avg_char_height_block: float = 0.0

    @property
    def width(self) -> float:
        return self.bbox.w

    @property
    def height(self) -> float:
        return self.bbox.h

    def with_bbox(self, bbox: Rect) -> "Block":
        return replace(self, bbox=bbox)


def _directed_neighbor(a: Rect, b: Rect, direction: str) -> bool:
    """True when b lies in `direction` of a with overlapping projections."""
    if direction == "right":
        return v_overlap(a, b) > 0 and b.x >= a.cx
    if direction == "left":
        return v_overlap(a, b) > 0 and b.right <= a.cx
    if direction == "bottom":
        return h_overlap(a, b) > 0 and b.y >= a.cy
    if direction == "top":
        return h_overlap(a, b) > 0 and b.bottom <= a.cy
    raise ValueError(direction)


def _occludes(a: Rect, b: Rect, c: Rect, direction: str) -> bool:
    """True when c fully blocks the corridor between a and b."""
    if direction in ("left", "right"):
        lo = max(a.y, b.y)
        hi = min(a.bottom, b.bottom)
        if not (c.y <= lo and c.bottom >= hi):
            return False
        if direction == "right":
            g0, g1 = a.right, b.x
        else:
            g0, g1 = b.right, a.x
        return g1 > g0 and c.x < g1 and c.right > g0
    lo = max(a.x, b.x)
    hi = min(a.right, b.right)
    if not (c.x <= lo and c.right >= hi):
        return False
    if direction == "bottom":
        g0, g1 = a.bottom, b.y
    else:
        g0, g1 = b.bottom, a.y
    return g1 > g0 and c.y < g1 and c.bottom > g0


def adjacency_for_rects(rects: dict[int, Rect]) -> dict[int, dict[str, list[int]]]:
    """Visibility-based directed adjacency over arbitrary rectangles.

    b is a neighbor of a in direction d iff their perpendicular projections
    overlap, b lies past a's center in d, and no third rectangle fully
    occludes the corridor between them.  Neighbor lists are ordered by the
    perpendicular centroid coordinate.
    """
    ids = sorted(rects)
    out: dict[int, dict[str, list[int]]] = {
        i: {d: [] for d in DIRECTIONS} for i in ids
    }
    # Compute right/bottom relations, then mirror so symmetry holds exactly.
    for i in ids:
        a = rects[i]
        for d in ("right", "bottom"):
            for j in ids:
                if j == i:
                    continue
                b = rects[j]
                if not _directed_neighbor(a, b, d):
                    continue
                if any(
                    _occludes(a, b, rects[k], d)
                    for k in ids
                    if k != i and k != j
                ):
                    continue
                out[i][d].append(j)
                out[j][OPPOSITE[d]].append(i)
    for i in ids:
        for d in DIRECTIONS:
            if d in ("left", "right"):
                out[i][d].sort(key=lambda j: (rects[j].cy, rects[j].cx, j))
            else:
                out[i][d].sort(key=lambda j: (rects[j].cx, rects[j].cy, j))
    return out


@dataclass
class LayoutGraph:
    doc_id: str
    hypothesis_id: str
    page_w: float
    page_h: float
    avg_char_height_doc: float
    blocks: dict[int, Block] = field(default_factory=dict)
    neighbors: dict[int, dict[str, list[int]]] = field(default_factory=dict)
    overlap_flags: dict[int, dict[str, bool]] = field(default_factory=dict)

    def location(self, block_id: int) -> str:
        return spatial_location(self.blocks[block_id].bbox, self.page_w, self.page_h)

    def neighbor_counts(self, block_id: int) -> tuple[int, int, int, int]:
        n = self.neighbors[block_id]
        return tuple(len(n[d]) for d in DIRECTIONS)  # type: ignore[return-value]


def build_adjacency(
    blocks: list[Block],
    page_dims: tuple[float, float],
    doc_id: str = "",
    hypothesis_id: str = "H1",
    avg_char_height_doc: float = 0.0,
) -> LayoutGraph:
    """Build the block graph with visibility adjacency and overlap flags."""
    seen: set[int] = set()
    for b in blocks:
        if b.block_id in seen:
            raise DuplicateBlockError(f"duplicate block_id {b.block_id}")
        seen.add(b.block_id)
    rects = {b.block_id: b.bbox for b in blocks}
    neighbors = adjacency_for_rects(rects)
    overlap_flags = {}
    for b in blocks:
        flags = {}
        for d in DIRECTIONS:
            flags[d] = any(
                b.bbox.intersects(rects[j]) for j in neighbors[b.block_id][d]
            )
        overlap_flags[b.block_id] = flags
    return LayoutGraph(
        doc_id=doc_id,
        hypothesis_id=hypothesis_id,
        page_w=page_dims[0],
        page_h=page_dims[1],
        avg_char_height_doc=avg_char_height_doc,
        blocks={b.block_id: b for b in blocks},
        neighbors=neighbors,
        overlap_flags=overlap_flags,
    )
