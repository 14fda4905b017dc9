"""Context-string keys, the chained hash index, and corpus persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .blocks import (
    DIRECTIONS,
    HYPOTHESIS_IDS,
    LOCATIONS,
    NONTEXT,
    TEXT,
    Block,
    LayoutGraph,
)
from .geometry import Rect

DEFAULT_BINS = 4093  # prime
COUNT_CLAMP = 7
KEY_SPACE = 2 * 5 * 8**4 * 2**4  # 655360 code points

Entry = tuple[str, str, int]  # (doc_id, hypothesis_id, block_id)


@dataclass(frozen=True)
class ContextKey:
    kind_code: int  # 0 text, 1 nontext
    location_code: int  # index into LOCATIONS
    counts: tuple[int, int, int, int]  # top, bottom, left, right, clamped 0-7
    overlap_bits: tuple[bool, bool, bool, bool]


def context_key(graph: LayoutGraph, block_id: int) -> ContextKey:
    if block_id not in graph.blocks:
        raise KeyError(f"unknown block_id {block_id}")
    block = graph.blocks[block_id]
    counts = tuple(
        min(len(graph.neighbors[block_id][d]), COUNT_CLAMP) for d in DIRECTIONS
    )
    bits = tuple(graph.overlap_flags[block_id][d] for d in DIRECTIONS)
    return ContextKey(
        kind_code=0 if block.kind == TEXT else 1,
        location_code=LOCATIONS.index(graph.location(block_id)),
        counts=counts,  # type: ignore[arg-type]
        overlap_bits=bits,  # type: ignore[arg-type]
    )


def encode(key: ContextKey) -> int:
    k = key.kind_code
    k = k * 5 + key.location_code
    for c in key.counts:
        k = k * 8 + c
    for b in key.overlap_bits:
        k = k * 2 + int(b)
    return k


def decode(k: int) -> ContextKey:
    bits = []
    for _ in range(4):
        bits.append(bool(k % 2))
        k //= 2
    bits.reverse()
    counts = []
    for _ in range(4):
        counts.append(k % 8)
        k //= 8
    counts.reverse()
    loc = k % 5
    k //= 5
    return ContextKey(k, loc, tuple(counts), tuple(bits))  # type: ignore[arg-type]


def hash_key(k: int, n: int) -> int:
    if n < 1:
        raise ValueError("bin count must be >= 1")
    return k % n


@dataclass
class QueryDescriptor:
    """Constraints on a candidate reference block's context.

    `kind_code`/`location_code` of None means unconstrained.  Counts are
    lower bounds; a direction flagged exact requires equality (modulo the
    clamp).  Overlap bits set True must be set on the candidate.
    """

    kind_code: int | None = None
    location_code: int | None = None
    min_counts: tuple[int, int, int, int] = (0, 0, 0, 0)
    exact_counts: tuple[bool, bool, bool, bool] = (False, False, False, False)
    overlap_bits: tuple[bool, bool, bool, bool] = (False, False, False, False)

    @classmethod
    def exact(cls, key: ContextKey) -> "QueryDescriptor":
        return cls(
            kind_code=key.kind_code,
            location_code=key.location_code,
            min_counts=key.counts,
            exact_counts=(True, True, True, True),
            overlap_bits=key.overlap_bits,
        )

    @property
    def fully_determined(self) -> bool:
        return (
            self.kind_code is not None
            and self.location_code is not None
            and all(self.exact_counts)
        )

    def to_key(self) -> ContextKey:
        assert self.fully_determined
        return ContextKey(
            self.kind_code,
            self.location_code,
            tuple(min(c, COUNT_CLAMP) for c in self.min_counts),  # type: ignore[arg-type]
            self.overlap_bits,
        )

    def compatible(self, key: ContextKey) -> bool:
        if self.kind_code is not None and key.kind_code != self.kind_code:
            return False
        if self.location_code is not None and key.location_code != self.location_code:
            return False
        for want, have, ex in zip(self.min_counts, key.counts, self.exact_counts):
            w = min(want, COUNT_CLAMP)
            if ex:
                if have != w:
                    return False
            elif have < w:
                return False
        for want, have in zip(self.overlap_bits, key.overlap_bits):
            if want and not have:
                return False
        return True


class HashIndex:
    """Fine bins keyed by H = k mod n with chaining, plus coarse bins keyed
    by (kind, location) for partial descriptors."""

    def __init__(self, n: int = DEFAULT_BINS):
        if n < 1:
            raise ValueError("bin count must be >= 1")
        self.n = n
        # bucket -> full key -> entries
        self.fine: dict[int, dict[int, list[Entry]]] = {}
        # (kind, loc) -> (counts + bits tuple) -> entries
        self.coarse: dict[tuple[int, int], dict[tuple, list[Entry]]] = {}
        self.count = 0

    def insert(self, key: ContextKey, entry: Entry) -> None:
        k = encode(key)
        bucket = self.fine.setdefault(hash_key(k, self.n), {})
        bucket.setdefault(k, []).append(entry)
        cell = self.coarse.setdefault((key.kind_code, key.location_code), {})
        cell.setdefault(key.counts + key.overlap_bits, []).append(entry)
        self.count += 1

    def remove_doc(self, doc_id: str) -> None:
        for table in (self.fine, self.coarse):
            for bucket in table.values():
                for k in list(bucket):
                    bucket[k] = [e for e in bucket[k] if e[0] != doc_id]
                    if not bucket[k]:
                        del bucket[k]
        self.count = sum(
            len(es) for bucket in self.fine.values() for es in bucket.values()
        )

    def lookup_exact(self, key: ContextKey) -> list[Entry]:
        k = encode(key)
        return list(self.fine.get(hash_key(k, self.n), {}).get(k, []))

    def lookup(self, desc: QueryDescriptor) -> list[Entry]:
        if desc.fully_determined:
            return self.lookup_exact(desc.to_key())
        kinds = [desc.kind_code] if desc.kind_code is not None else [0, 1]
        locs = (
            [desc.location_code]
            if desc.location_code is not None
            else list(range(len(LOCATIONS)))
        )
        out: list[Entry] = []
        for kc in kinds:
            for lc in locs:
                cell = self.coarse.get((kc, lc))
                if not cell:
                    continue
                for raw, entries in cell.items():
                    key = ContextKey(kc, lc, raw[:4], raw[4:])
                    if desc.compatible(key):
                        out.extend(entries)
        return out

    def bucket_histogram(self) -> dict[int, int]:
        return {
            h: sum(len(es) for es in bucket.values())
            for h, bucket in sorted(self.fine.items())
        }


class CorpusError(ValueError):
    pass


class CorpusStore:
    """All hypothesis graphs of all documents, plus the hash index over
    their blocks.  Single writer during build; immutable for readers."""

    def __init__(self, n_bins: int = DEFAULT_BINS):
        self.documents: dict[str, list[LayoutGraph]] = {}
        self.meta: dict[str, dict] = {}
        self.index = HashIndex(n_bins)

    @property
    def n_bins(self) -> int:
        return self.index.n

    def insert_document(
        self, graphs: list[LayoutGraph], replace: bool = False, meta: dict | None = None
    ) -> None:
        doc_id = graphs[0].doc_id
        if doc_id in self.documents:
            if not replace:
                raise CorpusError(f"doc_id already present: {doc_id}")
            self.index.remove_doc(doc_id)
        self.documents[doc_id] = list(graphs)
        self.meta[doc_id] = dict(meta or {})
        for g in graphs:
            for bid in g.blocks:
                self.index.insert(context_key(g, bid), (doc_id, g.hypothesis_id, bid))

    def candidate_lookup(self, desc: QueryDescriptor) -> list[Entry]:
        return self.index.lookup(desc)

    def graph(self, doc_id: str, hypothesis_id: str) -> LayoutGraph:
        for g in self.documents[doc_id]:
            if g.hypothesis_id == hypothesis_id:
                return g
        raise KeyError(hypothesis_id)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for doc_id in sorted(self.documents):
                f.write(document_to_json(self.documents[doc_id]))
                f.write("\n")

    @classmethod
    def load(cls, path, n_bins: int = DEFAULT_BINS) -> "CorpusStore":
        store = cls(n_bins)
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    graphs = document_from_json(line)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CorpusError(f"line {lineno}: corrupt document ({exc})")
                store.insert_document(graphs, meta={"source": "corpus"})
        return store


def _num(x: float):
    xi = int(x)
    return xi if xi == x else x


def document_to_json(graphs: list[LayoutGraph]) -> str:
    g0 = graphs[0]
    doc = {
        "doc_id": g0.doc_id,
        "page": {"w": _num(g0.page_w), "h": _num(g0.page_h)},
        "ach_doc": _num(g0.avg_char_height_doc),
        "hypotheses": [
            {
                "id": g.hypothesis_id,
                "blocks": [
                    {
                        "id": bid,
                        "x": _num(b.bbox.x),
                        "y": _num(b.bbox.y),
                        "w": _num(b.bbox.w),
                        "h": _num(b.bbox.h),
                        "kind": b.kind,
                        "ach_block": _num(b.avg_char_height_block),
                    }
                    for bid, b in sorted(g.blocks.items())
                ],
                "neighbors": {
                    str(bid): {d: g.neighbors[bid][d] for d in DIRECTIONS}
                    for bid in sorted(g.blocks)
                },
                "overlaps": {
                    str(bid): [g.overlap_flags[bid][d] for d in DIRECTIONS]
                    for bid in sorted(g.blocks)
                },
            }
            for g in graphs
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def document_from_json(line: str) -> list[LayoutGraph]:
    doc = json.loads(line)
    page_w = float(doc["page"]["w"])
    page_h = float(doc["page"]["h"])
    ach = float(doc.get("ach_doc", 0.0))
    graphs = []
    for hyp in doc["hypotheses"]:
        blocks = {}
        for b in hyp["blocks"]:
            if b["kind"] not in (TEXT, NONTEXT):
                raise ValueError(f"bad kind {b['kind']!r}")
            blocks[int(b["id"])] = Block(
                block_id=int(b["id"]),
                bbox=Rect(float(b["x"]), float(b["y"]), float(b["w"]), float(b["h"])),
                kind=b["kind"],
                avg_char_height_block=float(b.get("ach_block", 0.0)),
            )
        neighbors = {
            int(bid): {d: [int(x) for x in dirs[d]] for d in DIRECTIONS}
            for bid, dirs in hyp["neighbors"].items()
        }
        overlaps = {
            int(bid): dict(zip(DIRECTIONS, map(bool, flags)))
            for bid, flags in hyp["overlaps"].items()
        }
        if set(neighbors) != set(blocks) or set(overlaps) != set(blocks):
            raise ValueError("neighbor/overlap tables do not cover blocks")
        for dirs in neighbors.values():
            for ids in dirs.values():
                for i in ids:
                    if i not in blocks:
                        raise ValueError(f"dangling neighbor id {i}")
        graphs.append(
            LayoutGraph(
                doc_id=doc["doc_id"],
                hypothesis_id=hyp["id"],
                page_w=page_w,
                page_h=page_h,
                avg_char_height_doc=ach,
                blocks=blocks,
                neighbors=neighbors,
                overlap_flags=overlaps,
            )
        )
    if [g.hypothesis_id for g in graphs] != list(HYPOTHESIS_IDS):
        raise ValueError("expected hypotheses H1..H4 in order")
    return graphs
