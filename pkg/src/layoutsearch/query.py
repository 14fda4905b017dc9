"""Sketch-query model: layouts, vacancy dummies, and the Boolean grammar."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .blocks import LOCATIONS, adjacency_for_rects
from .geometry import Rect, h_overlap, v_overlap

KINDS = ("text", "nontext", "any")
VACANCY_FRACTION = 0.25
OVERLAP_TOLERANCE = 2.0  # canvas units


class QueryValidationError(ValueError):
    pass


@dataclass(frozen=True)
class QueryBlock:
    block_id: int
    bbox: Rect
    kind: str  # text | nontext | any


@dataclass(frozen=True)
class DummyBlock:
    block_id: int  # negative, disjoint from real ids
    bbox: Rect
    anchors: tuple[tuple[int, str], ...]  # (query block id, direction)


@dataclass
class QueryLayout:
    canvas_w: float
    canvas_h: float
    blocks: list[QueryBlock]
    dummies: list[DummyBlock] = field(default_factory=list)
    # adjacency over real blocks (ids >= 0) and dummies (ids < 0)
    neighbors: dict[int, dict[str, list[int]]] = field(default_factory=dict)

    @property
    def reference_block(self) -> QueryBlock:
        return min(self.blocks, key=lambda b: (b.bbox.y, b.bbox.x, b.block_id))

    def block(self, block_id: int) -> QueryBlock:
        cache = self.__dict__.get("_by_id")
        if cache is None:
            cache = {b.block_id: b for b in self.blocks}
            self.__dict__["_by_id"] = cache
        return cache[block_id]

    def dummy(self, block_id: int) -> DummyBlock:
        for d in self.dummies:
            if d.block_id == block_id:
                return d
        raise KeyError(block_id)

    @property
    def query_type(self) -> int:
        specified = [b.kind != "any" for b in self.blocks]
        if all(specified):
            base = 1
        elif not any(specified):
            base = 2
        else:
            base = 3
        return base + (3 if self.dummies else 0)


def _strip(blocks: list[QueryBlock], canvas_w: float, canvas_h: float,
           b: QueryBlock, direction: str) -> Rect | None:
    """Maximal empty strip adjacent to one side of a block."""
    r = b.bbox
    others = [o.bbox for o in blocks if o.block_id != b.block_id]
    if direction == "bottom":
        limit = canvas_h
        for o in others:
            if h_overlap(o, r) > 0 and o.bottom > r.bottom:
                limit = min(limit, max(o.y, r.bottom))
        if limit <= r.bottom:
            return None
        return Rect(r.x, r.bottom, r.w, limit - r.bottom)
    if direction == "top":
        limit = 0.0
        for o in others:
            if h_overlap(o, r) > 0 and o.y < r.y:
                limit = max(limit, min(o.bottom, r.y))
        if limit >= r.y:
            return None
        return Rect(r.x, limit, r.w, r.y - limit)
    if direction == "right":
        limit = canvas_w
        for o in others:
            if v_overlap(o, r) > 0 and o.right > r.right:
                limit = min(limit, max(o.x, r.right))
        if limit <= r.right:
            return None
        return Rect(r.right, r.y, limit - r.right, r.h)
    limit = 0.0
    for o in others:
        if v_overlap(o, r) > 0 and o.x < r.x:
            limit = max(limit, min(o.right, r.x))
    if limit >= r.x:
        return None
    return Rect(limit, r.y, r.x - limit, r.h)


def _touches(a: Rect, b: Rect) -> bool:
    return (
        a.x <= b.right and b.x <= a.right and a.y <= b.bottom and b.y <= a.bottom
    )


def detect_vacancies(blocks: list[QueryBlock], canvas_w: float,
                     canvas_h: float) -> list[DummyBlock]:
    """Find vacant regions worth a dummy block.

    A side strip qualifies when its extension exceeds 25% of the block's
    matching dimension, or when both its dimensions exceed the minimum
    dimensions among blocks touching the strip.  Overlapping strips from
    different anchors coalesce when their union stays empty.
    """
    candidates: list[tuple[Rect, tuple[int, str]]] = []
    for b in blocks:
        for d in ("top", "bottom", "left", "right"):
            strip = _strip(blocks, canvas_w, canvas_h, b, d)
            if strip is None or strip.w <= 0 or strip.h <= 0:
                continue
            extent = strip.h if d in ("top", "bottom") else strip.w
            own = b.bbox.h if d in ("top", "bottom") else b.bbox.w
            rule_fraction = extent > VACANCY_FRACTION * own
            adjacent = [o.bbox for o in blocks if _touches(o.bbox, strip)]
            rule_min = bool(adjacent) and (
                strip.w > min(a.w for a in adjacent)
                and strip.h > min(a.h for a in adjacent)
            )
            if rule_fraction or rule_min:
                candidates.append((strip, (b.block_id, d)))
    if not candidates:
        return []

    # Coalesce transitively-overlapping strips.
    groups: list[list[int]] = []
    for i, (r, _) in enumerate(candidates):
        merged_into = None
        for gi, grp in enumerate(groups):
            if any(candidates[j][0].intersects(r) for j in grp):
                if merged_into is None:
                    grp.append(i)
                    merged_into = gi
                else:
                    groups[merged_into].extend(grp)
                    grp.clear()
        if merged_into is None:
            groups.append([i])
    dummies = []
    next_id = -1
    for grp in groups:
        if not grp:
            continue
        rects = [candidates[j][0] for j in grp]
        anchors = tuple(sorted({candidates[j][1] for j in grp}))
        bbox = rects[0]
        for r in rects[1:]:
            bbox = bbox.union(r)
        if any(bbox.intersects(b.bbox) for b in blocks):
            # Union would cover a block; keep the strips separate.
            for j in grp:
                dummies.append(DummyBlock(next_id, candidates[j][0],
                                          (candidates[j][1],)))
                next_id -= 1
        else:
            dummies.append(DummyBlock(next_id, bbox, anchors))
            next_id -= 1
    return dummies


def build_layout(raw_blocks: list[dict], canvas_w: float,
                 canvas_h: float) -> QueryLayout:
    if not raw_blocks:
        raise QueryValidationError("layout has no blocks")
    blocks = []
    for i, rb in enumerate(raw_blocks):
        kind = rb.get("kind", "any")
        if kind not in KINDS:
            raise QueryValidationError(f"block {i}: bad kind {kind!r}")
        bbox = Rect(float(rb["x"]), float(rb["y"]), float(rb["w"]), float(rb["h"]))
        if bbox.w <= 0 or bbox.h <= 0:
            raise QueryValidationError(f"block {i}: empty bbox")
        if bbox.x < 0 or bbox.y < 0 or bbox.right > canvas_w or bbox.bottom > canvas_h:
            raise QueryValidationError(f"block {i}: outside canvas")
        blocks.append(QueryBlock(block_id=i, bbox=bbox, kind=kind))
    for i, a in enumerate(blocks):
        for b in blocks[i + 1 :]:
            iw = min(a.bbox.right, b.bbox.right) - max(a.bbox.x, b.bbox.x)
            ih = min(a.bbox.bottom, b.bbox.bottom) - max(a.bbox.y, b.bbox.y)
            if iw > OVERLAP_TOLERANCE and ih > OVERLAP_TOLERANCE:
                raise QueryValidationError(
                    f"blocks {a.block_id} and {b.block_id} overlap beyond tolerance"
                )
    dummies = detect_vacancies(blocks, canvas_w, canvas_h)
    rects = {b.block_id: b.bbox for b in blocks}
    rects.update({d.block_id: d.bbox for d in dummies})
    neighbors = adjacency_for_rects(rects)
    return QueryLayout(canvas_w, canvas_h, blocks, dummies, neighbors)


# --- Boolean expression grammar -------------------------------------------
# Atom := NAME | "(" NAME "," REGION ")"
# Expr := Atom | "(" Expr ")" | "NOT" Expr | Expr "AND" Expr | Expr "OR" Expr
# with precedence NOT > AND > OR.


@dataclass(frozen=True)
class Atom:
    name: str
    region: str | None = None


@dataclass(frozen=True)
class Not:
    child: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


_TOKEN_RE = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*|\(|\)|,)")


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise QueryValidationError(
                    f"bad character in expression at {pos}: {text[pos]!r}"
                )
            break
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise QueryValidationError("unexpected end of expression")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.next()
        if got != tok:
            raise QueryValidationError(f"expected {tok!r}, got {got!r}")

    def parse(self):
        node = self.parse_or()
        if self.peek() is not None:
            raise QueryValidationError(f"trailing tokens from {self.peek()!r}")
        return node

    def parse_or(self):
        node = self.parse_and()
        while self.peek() is not None and self.peek().upper() == "OR":
            self.next()
            node = Or(node, self.parse_and())
        return node

    def parse_and(self):
        node = self.parse_unary()
        while self.peek() is not None and self.peek().upper() == "AND":
            self.next()
            node = And(node, self.parse_unary())
        return node

    def parse_unary(self):
        tok = self.peek()
        if tok is not None and tok.upper() == "NOT":
            self.next()
            return Not(self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        tok = self.next()
        if tok == "(":
            # "(NAME, REGION)" is an atom; anything else is a group.
            if (
                self.pos + 1 < len(self.tokens)
                and self.tokens[self.pos + 1] == ","
                and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", self.tokens[self.pos])
                and self.tokens[self.pos].upper() not in ("AND", "OR", "NOT")
            ):
                name = self.next()
                self.expect(",")
                region = self.next().lower()
                if region not in LOCATIONS:
                    raise QueryValidationError(f"unknown region {region!r}")
                self.expect(")")
                return Atom(name, region)
            node = self.parse_or()
            self.expect(")")
            return node
        if tok in (")", ","):
            raise QueryValidationError(f"unexpected {tok!r}")
        if tok.upper() in ("AND", "OR", "NOT"):
            raise QueryValidationError(f"unexpected operator {tok!r}")
        return Atom(tok, None)


def parse_expression(text: str):
    tokens = _tokenize(text)
    if not tokens:
        raise QueryValidationError("empty expression")
    return _Parser(tokens).parse()


def expression_atoms(node, negated: bool = False):
    """Yield (atom, negated) for every leaf."""
    if isinstance(node, Atom):
        yield node, negated
    elif isinstance(node, Not):
        yield from expression_atoms(node.child, not negated)
    elif isinstance(node, (And, Or)):
        yield from expression_atoms(node.left, negated)
        yield from expression_atoms(node.right, negated)
    else:
        raise TypeError(node)


@dataclass
class BooleanQuery:
    layouts: dict[str, QueryLayout]
    expr: object

    @property
    def query_types(self) -> dict[str, int]:
        return {name: lay.query_type for name, lay in self.layouts.items()}


def parse_query(source) -> BooleanQuery:
    """Parse and validate a query document (JSON text or decoded object)."""
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise QueryValidationError(f"invalid JSON: {exc}")
    else:
        doc = source
    if not isinstance(doc, dict):
        raise QueryValidationError("query must be a JSON object")
    canvas = doc.get("canvas")
    if not canvas or "w" not in canvas or "h" not in canvas:
        raise QueryValidationError("missing canvas dimensions")
    cw, ch = float(canvas["w"]), float(canvas["h"])
    if cw <= 0 or ch <= 0:
        raise QueryValidationError("canvas dimensions must be positive")
    raw_layouts = doc.get("layouts")
    if not raw_layouts:
        raise QueryValidationError("no layouts given")
    layouts = {}
    for name, spec in raw_layouts.items():
        layouts[name] = build_layout(spec.get("blocks", []), cw, ch)
    expr_text = doc.get("expr")
    if expr_text:
        expr = parse_expression(expr_text)
    elif len(layouts) == 1:
        expr = Atom(next(iter(layouts)), None)
    else:
        raise QueryValidationError("expr required with multiple layouts")
    atoms = list(expression_atoms(expr))
    for atom, _ in atoms:
        if atom.name not in layouts:
            raise QueryValidationError(f"expression names unknown layout {atom.name!r}")
    if not any(not neg for _, neg in atoms):
        raise QueryValidationError("query has no positive atom (NOT-only)")
    return BooleanQuery(layouts=layouts, expr=expr)
