"""Shared helpers for the test suite."""

import random

from layoutsearch.blocks import NONTEXT, TEXT, Block
from layoutsearch.geometry import Rect
from layoutsearch.harness import SynthParams, guillotine_cells, _inset
from layoutsearch.hypotheses import build_all_hypotheses
from layoutsearch.index import CorpusStore


def block(bid, x, y, w, h, kind=TEXT, ach=10.0):
    if kind == NONTEXT:
        ach = 0.0
    return Block(bid, Rect(x, y, w, h), kind, ach)


def doc_graphs(blocks, doc_id="doc", page=(800.0, 1000.0), ach=10.0, lines=None):
    return build_all_hypotheses(blocks, lines or [], page, doc_id=doc_id,
                                avg_char_height_doc=ach)


def store_with(*docs, n_bins=4093):
    store = CorpusStore(n_bins)
    for graphs in docs:
        store.insert_document(graphs)
    return store


def random_disjoint_rects(rng: random.Random, n: int,
                          page=(800.0, 1000.0)) -> dict[int, Rect]:
    """Up to n pairwise-disjoint random rectangles on the page."""
    rects: dict[int, Rect] = {}
    for _ in range(200):
        if len(rects) == n:
            break
        w = rng.uniform(20, 200)
        h = rng.uniform(20, 200)
        x = rng.uniform(0, page[0] - w)
        y = rng.uniform(0, page[1] - h)
        r = Rect(x, y, w, h)
        if all(not r.intersects(o) for o in rects.values()):
            rects[len(rects)] = r
    return rects


def guillotine_rects(rng: random.Random, n_target: int = 20,
                     page=(800.0, 1000.0)) -> dict[int, Rect]:
    """Roughly n_target disjoint rectangles from a recursive page split."""
    depth = 2
    while 2**depth < n_target:
        depth += 1
    cells = guillotine_cells(rng, Rect(0, 0, page[0], page[1]), depth, 60.0)
    return {i: _inset(c, 12.0) for i, c in enumerate(cells)}


DEFAULT_PARAMS = SynthParams()
