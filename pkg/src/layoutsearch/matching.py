"""Coupled graph traversal, ranking, and Boolean evaluation over the corpus."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .blocks import DIRECTIONS, LayoutGraph, spatial_location
from .geometry import Rect, union_all
from .index import CorpusStore, Entry, QueryDescriptor
from .query import And, Atom, BooleanQuery, Not, Or, QueryLayout


@dataclass
class MatchResult:
    doc_id: str
    hypothesis_id: str
    mapping: dict[int, int]  # real query block -> document block
    dummy_mapping: dict[int, tuple[int, ...]]  # dummy -> absorbed doc blocks
    match_bbox: Rect
    score: float = 0.0

    def mapped_doc_blocks(self) -> frozenset[int]:
        out = set(self.mapping.values())
        for blocks in self.dummy_mapping.values():
            out.update(blocks)
        return frozenset(out)


def _kind_compatible(query_kind: str, doc_kind: str) -> bool:
    return query_kind == "any" or query_kind == doc_kind


def _align(
    qlist: list[int],
    dlist: list[int],
    layout: QueryLayout,
    graph: LayoutGraph,
    mapping: dict[int, int],
    rev: dict[int, int],
):
    """Consume the whole document list with the query list in order.

    Real query entries take exactly one document neighbor of compatible
    kind; a dummy absorbs one or more consecutive ones.  Returns a list of
    (query_id, doc_ids) or None.
    """

    def feasible(qi: int, di: int):
        if qi == len(qlist):
            return [] if di == len(dlist) else None
        q = qlist[qi]
        remaining = len(dlist) - di
        if q >= 0:
            if remaining < 1:
                return None
            dn = dlist[di]
            qb = layout.block(q)
            if not _kind_compatible(qb.kind, graph.blocks[dn].kind):
                return None
            if q in mapping:
                if mapping[q] != dn:
                    return None
            elif dn in rev:
                return None
            rest = feasible(qi + 1, di + 1)
            if rest is None:
                return None
            return [(q, (dn,))] + rest
        # Dummy: shortest absorption first.
        min_rest = sum(1 for x in qlist[qi + 1 :])
        for take in range(1, remaining - min_rest + 1):
            rest = feasible(qi + 1, di + take)
            if rest is not None:
                return [(q, tuple(dlist[di : di + take]))] + rest
        return None

    return feasible(0, 0)


def _align_subsequence(
    qreals: list[int],
    dlist: list[int],
    layout: QueryLayout,
    graph: LayoutGraph,
    mapping: dict[int, int],
    rev: dict[int, int],
):
    """Order-preserving 1:1 pairing of query blocks into a document list,
    allowing unmatched document entries.  Used past a dummy, where the
    absorbed region's outer neighborhood is only partially constrained."""

    def feasible(qi: int, di: int):
        if qi == len(qreals):
            return []
        q = qreals[qi]
        qb = layout.block(q)
        for j in range(di, len(dlist) - (len(qreals) - qi) + 1):
            dn = dlist[j]
            if not _kind_compatible(qb.kind, graph.blocks[dn].kind):
                continue
            if q in mapping and mapping[q] != dn:
                continue
            if q not in mapping and dn in rev:
                continue
            rest = feasible(qi + 1, j + 1)
            if rest is not None:
                return [(q, (dn,))] + rest
        return None

    return feasible(0, 0)


def match_sublayout(
    layout: QueryLayout, graph: LayoutGraph, start: int
) -> MatchResult | None:
    """Breadth-first coupled traversal from (reference block, start).

    Popped pairs align their directional neighbor lists; dummies absorb runs
    of document blocks and matching continues through them.  Succeeds when
    every non-dummy query block is mapped.
    """
    ref = layout.reference_block
    start_block = graph.blocks.get(start)
    if start_block is None or not _kind_compatible(ref.kind, start_block.kind):
        return None

    mapping: dict[int, int] = {ref.block_id: start}
    rev: dict[int, int] = {start: ref.block_id}
    dummy_absorbed: dict[int, list[int]] = {d.block_id: [] for d in layout.dummies}
    queue: deque = deque([("pair", ref.block_id, start)])
    aligned_pairs: set[tuple[int, int]] = set()
    continued: dict[int, int] = {}  # dummy -> absorbed size when last continued

    while queue:
        item = queue.popleft()
        if item[0] == "pair":
            _, q, b = item
            if (q, b) in aligned_pairs:
                continue
            aligned_pairs.add((q, b))
            for d in DIRECTIONS:
                qlist = layout.neighbors[q][d]
                if not qlist:
                    continue
                dlist = graph.neighbors[b][d]
                assignment = _align(qlist, dlist, layout, graph, mapping, rev)
                if assignment is None:
                    return None
                for qn, docs in assignment:
                    if qn >= 0:
                        dn = docs[0]
                        if qn not in mapping:
                            mapping[qn] = dn
                            rev[dn] = qn
                            queue.append(("pair", qn, dn))
                    else:
                        grew = False
                        for dn in docs:
                            if dn not in dummy_absorbed[qn]:
                                dummy_absorbed[qn].append(dn)
                                grew = True
                        if grew:
                            queue.append(("dummy", qn))
        else:
            _, dm = item
            absorbed = dummy_absorbed[dm]
            if continued.get(dm) == len(absorbed):
                continue
            continued[dm] = len(absorbed)
            for d in DIRECTIONS:
                qreals = [x for x in layout.neighbors[dm][d] if x >= 0]
                if not qreals:
                    continue
                seen: list[int] = []
                for s in absorbed:
                    for dn in graph.neighbors[s][d]:
                        if dn not in absorbed and dn not in seen:
                            seen.append(dn)
                if d in ("left", "right"):
                    seen.sort(key=lambda j: (graph.blocks[j].bbox.cy,
                                             graph.blocks[j].bbox.cx, j))
                else:
                    seen.sort(key=lambda j: (graph.blocks[j].bbox.cx,
                                             graph.blocks[j].bbox.cy, j))
                assignment = _align_subsequence(qreals, seen, layout, graph,
                                                mapping, rev)
                if assignment is None:
                    return None
                for qn, docs in assignment:
                    dn = docs[0]
                    if qn not in mapping:
                        mapping[qn] = dn
                        rev[dn] = qn
                        queue.append(("pair", qn, dn))

    if len(mapping) != len(layout.blocks):
        return None
    all_ids = list(mapping.values())
    for absorbed in dummy_absorbed.values():
        all_ids.extend(absorbed)
    bbox = union_all([graph.blocks[i].bbox for i in all_ids])
    return MatchResult(
        doc_id=graph.doc_id,
        hypothesis_id=graph.hypothesis_id,
        mapping=dict(mapping),
        dummy_mapping={k: tuple(v) for k, v in dummy_absorbed.items() if v},
        match_bbox=bbox,
    )


def rank_score(layout: QueryLayout, match: MatchResult, graph: LayoutGraph) -> float:
    """Mean geometric discrepancy over non-dummy pairs: half aspect-ratio
    difference, half normalized-centroid distance."""
    mb = match.match_bbox
    terms = []
    for qid, did in match.mapping.items():
        qb = layout.block(qid).bbox
        db = graph.blocks[did].bbox
        ar_q = qb.w / qb.h
        ar_b = db.w / db.h
        aspect = abs(ar_q - ar_b) / max(ar_q, ar_b)
        qx = qb.cx / layout.canvas_w
        qy = qb.cy / layout.canvas_h
        bx = (db.cx - mb.x) / mb.w if mb.w > 0 else 0.5
        by = (db.cy - mb.y) / mb.h if mb.h > 0 else 0.5
        position = math.hypot(qx - bx, qy - by)
        terms.append(0.5 * aspect + 0.5 * position)
    return sum(terms) / len(terms)


def reference_descriptor(layout: QueryLayout) -> QueryDescriptor:
    """Index constraints implied by the reference block's neighborhood.

    Location is never constrained (matches occur anywhere on a page); a
    direction with real neighbors and no dummy pins the count exactly, a
    dummy makes it a lower bound, an empty direction is unconstrained.
    """
    ref = layout.reference_block
    kind_code = None if ref.kind == "any" else (0 if ref.kind == "text" else 1)
    mins = []
    exacts = []
    for d in DIRECTIONS:
        entries = layout.neighbors[ref.block_id][d]
        reals = sum(1 for x in entries if x >= 0)
        has_dummy = any(x < 0 for x in entries)
        if has_dummy:
            mins.append(reals + 1)
            exacts.append(False)
        elif reals:
            mins.append(reals)
            exacts.append(True)
        else:
            mins.append(0)
            exacts.append(False)
    return QueryDescriptor(
        kind_code=kind_code,
        location_code=None,
        min_counts=tuple(mins),  # type: ignore[arg-type]
        exact_counts=tuple(exacts),  # type: ignore[arg-type]
    )


def _all_entries(store: CorpusStore) -> list[Entry]:
    out = []
    for doc_id in sorted(store.documents):
        for g in store.documents[doc_id]:
            for bid in sorted(g.blocks):
                out.append((doc_id, g.hypothesis_id, bid))
    return out


def _dedupe_and_rank(
    results: list[MatchResult], store: CorpusStore
) -> list[MatchResult]:
    best: dict[tuple, MatchResult] = {}
    for m in results:
        g = store.graph(m.doc_id, m.hypothesis_id)
        bboxes = frozenset(
            (g.blocks[i].bbox.x, g.blocks[i].bbox.y,
             g.blocks[i].bbox.w, g.blocks[i].bbox.h)
            for i in m.mapping.values()
        )
        key = (m.doc_id, bboxes)
        prev = best.get(key)
        if prev is None or (m.score, m.hypothesis_id) < (prev.score, prev.hypothesis_id):
            best[key] = m
    ranked = sorted(
        best.values(),
        key=lambda m: (m.score, m.doc_id, m.match_bbox.y, m.match_bbox.x),
    )
    return ranked


def retrieve(
    store: CorpusStore,
    layout: QueryLayout,
    use_hash: bool = True,
    top: int | None = None,
) -> list[MatchResult]:
    """Hash-pruned retrieval: candidate starts, coupled matching, de-dup
    across hypotheses, ascending score order."""
    if use_hash:
        candidates = store.candidate_lookup(reference_descriptor(layout))
    else:
        candidates = _all_entries(store)
    results = []
    for doc_id, hyp_id, bid in candidates:
        graph = store.graph(doc_id, hyp_id)
        m = match_sublayout(layout, graph, bid)
        if m is not None:
            m.score = rank_score(layout, m, graph)
            results.append(m)
    ranked = _dedupe_and_rank(results, store)
    return ranked[:top] if top is not None else ranked


def region_predicate(
    match_bbox: Rect, page_dims: tuple[float, float], region: str | None
) -> bool:
    if region is None:
        return True
    return spatial_location(match_bbox, page_dims[0], page_dims[1]) == region


@dataclass
class BooleanResult:
    doc_id: str
    score: float
    matches: list[MatchResult] = field(default_factory=list)


def evaluate_boolean(
    store: CorpusStore, bq: BooleanQuery, use_hash: bool = True
) -> list[BooleanResult]:
    """Evaluate a Boolean sub-layout query over every stored document."""
    atom_matches: dict[tuple[str, str | None], dict[str, list[MatchResult]]] = {}
    for atom, _neg in _unique_atoms(bq.expr):
        layout = bq.layouts[atom.name]
        per_doc: dict[str, list[MatchResult]] = {}
        for m in retrieve(store, layout, use_hash=use_hash):
            g = store.graph(m.doc_id, m.hypothesis_id)
            if region_predicate(m.match_bbox, (g.page_w, g.page_h), atom.region):
                per_doc.setdefault(m.doc_id, []).append(m)
        atom_matches[(atom.name, atom.region)] = per_doc

    def truth(node, doc_id: str) -> bool:
        if isinstance(node, Atom):
            return doc_id in atom_matches[(node.name, node.region)]
        if isinstance(node, Not):
            return not truth(node.child, doc_id)
        if isinstance(node, And):
            return truth(node.left, doc_id) and truth(node.right, doc_id)
        if isinstance(node, Or):
            return truth(node.left, doc_id) or truth(node.right, doc_id)
        raise TypeError(node)

    positive_keys = [
        (a.name, a.region) for a, neg in _unique_atoms(bq.expr) if not neg
    ]
    out = []
    for doc_id in sorted(store.documents):
        if not truth(bq.expr, doc_id):
            continue
        matches: list[MatchResult] = []
        for key in positive_keys:
            matches.extend(atom_matches[key].get(doc_id, []))
        score = min((m.score for m in matches), default=0.0)
        matches.sort(key=lambda m: (m.score, m.hypothesis_id,
                                    m.match_bbox.y, m.match_bbox.x))
        out.append(BooleanResult(doc_id=doc_id, score=score, matches=matches))
    out.sort(key=lambda r: (r.score, r.doc_id))
    return out


def _unique_atoms(expr):
    from .query import expression_atoms

    seen = set()
    for atom, neg in expression_atoms(expr):
        key = (atom.name, atom.region, neg)
        if key not in seen:
            seen.add(key)
            yield atom, neg
