"""End-to-end acceptance criteria for the retrieval engine.

Each test prints a single PASS line with its measured figures; thresholds
are pinned in the assertions.
"""

import json
import random
import statistics
import time

import numpy as np
import pytest

from layoutsearch.blocks import NONTEXT, TEXT, Block
from layoutsearch.geometry import Rect, union_all
from layoutsearch.harness import (
    PlantSpec,
    SynthParams,
    brute_force_retrieve,
    graphs_for_blocks,
    guillotine_cells,
    query_layout_for_spec,
    random_layout_spec,
    random_page_blocks,
    store_from_docs,
    synth_corpus,
)
from layoutsearch.index import CorpusStore
from layoutsearch.ingestion import document_from_annotation
from layoutsearch.matching import evaluate_boolean, reference_descriptor, retrieve
from layoutsearch.query import QueryValidationError, build_layout, parse_query
from layoutsearch.raster import otsu_threshold
from layoutsearch.service import match_payload

from test_raster import oracle_otsu, random_hist


@pytest.fixture(scope="module")
def battery():
    """60 generated sketches, 10 per query type."""
    rng = random.Random(2024)
    return [
        random_layout_spec(rng, f"t{qtype}-{k}", qtype)
        for qtype in range(1, 7)
        for k in range(10)
    ]


def result_set(results):
    return {
        (m.doc_id, tuple(sorted(m.mapping.items())),
         tuple(sorted(m.dummy_mapping.items())))
        for m in results
    }


def test_hashed_retrieval_equals_brute_force(battery):
    sizes = [500, 450, 400, 300] + [100 + 25 * (i % 5) for i in range(196)]
    checks = 0
    t0 = time.perf_counter()
    for i, size in enumerate(sizes):
        specs = [battery[(12 * i + j) % len(battery)] for j in range(12)]
        # planting needs unique names within one corpus
        specs = list({s.name: s for s in specs}.values())
        docs, _ = synth_corpus(SynthParams(seed=9000 + i, docs=size), specs)
        store = store_from_docs(docs, n_bins=4093)
        for spec in specs:
            layout = query_layout_for_spec(spec)
            hashed = result_set(retrieve(store, layout))
            brute = result_set(brute_force_retrieve(store, layout))
            assert hashed == brute, (
                f"corpus {i} ({size} docs), query {spec.name}: "
                f"hashed != brute force"
            )
            checks += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 600.0
    print(f"PASS oracle equivalence: {checks} query/corpus checks over "
          f"{len(sizes)} corpora, 0 discrepancies, {elapsed:.0f}s")


def test_planted_recall_under_scale_and_translation():
    rng = random.Random(77)
    specs = [
        random_layout_spec(rng, f"r{qtype}-{k}", qtype, count=10)
        for qtype in range(1, 7)
        for k in range(10)
    ]
    docs, truth = synth_corpus(SynthParams(seed=4242, docs=150), specs)
    store = store_from_docs(docs, n_bins=4093)
    planted = retrieved = 0
    for spec in specs:
        relevant = truth.relevant(spec.name)
        got = {m.doc_id for m in retrieve(store, query_layout_for_spec(spec))}
        planted += len(relevant)
        retrieved += len(relevant & got)
    assert planted == 600
    assert retrieved == planted
    print(f"PASS planted recall: {retrieved}/{planted} scaled+translated "
          f"instances retrieved (100%)")


def test_pruning_on_53_block_document():
    params = SynthParams(depth_min=6, depth_max=6, min_cell=80.0, gutter=12.0)
    blocks = random_page_blocks(random.Random(84), params)
    assert len(blocks) == 53
    graphs = graphs_for_blocks(blocks, "news", params)
    h1 = graphs[0]
    store = store_from_docs({"news": graphs}, n_bins=4093, hypotheses=("H1",))
    # sketch: block 0 plus its full visible neighborhood
    sub = sorted({0} | {
        x for d in ("left", "right", "top", "bottom")
        for x in h1.neighbors[0][d]
    })
    rects = [h1.blocks[i].bbox for i in sub]
    x0 = min(r.x for r in rects)
    y0 = min(r.y for r in rects)
    raw = [
        {"x": r.x - x0, "y": r.y - y0, "w": r.w, "h": r.h,
         "kind": h1.blocks[i].kind}
        for i, r in zip(sub, rects)
    ]
    layout = build_layout(raw, max(r.right for r in rects) - x0,
                          max(r.bottom for r in rects) - y0)
    candidates = store.candidate_lookup(reference_descriptor(layout))
    assert len(candidates) <= 5
    results = retrieve(store, layout)
    assert results and results[0].mapping[layout.reference_block.block_id] == 0
    print(f"PASS pruning (53-block page): {len(candidates)} candidates "
          f"(<= 5) out of 53 blocks, true match found")


def test_pruning_median_candidate_fraction(battery):
    fractions = []
    for i in range(10):
        specs = [battery[(6 * i + j) % len(battery)] for j in range(6)]
        specs = list({s.name: s for s in specs}.values())
        docs, _ = synth_corpus(SynthParams(seed=300 + i, docs=100), specs)
        store = store_from_docs(docs, n_bins=4093)
        total = store.index.count
        for spec in specs:
            layout = query_layout_for_spec(spec)
            n = len(store.candidate_lookup(reference_descriptor(layout)))
            fractions.append(n / total)
    median = statistics.median(fractions)
    assert median <= 0.20
    print(f"PASS pruning (random corpora): median candidate fraction "
          f"{100 * median:.1f}% (<= 20%) over {len(fractions)} queries")


def test_query_latency_5000_documents():
    rng = random.Random(13)
    specs = [random_layout_spec(rng, f"l{qtype}", qtype, count=2)
             for qtype in range(1, 7)]
    docs, _ = synth_corpus(SynthParams(seed=1234, docs=5000), specs)
    store = store_from_docs(docs, n_bins=4093)
    worst = 0.0
    for spec in specs:
        layout = query_layout_for_spec(spec)
        times = []
        for _ in range(10):
            t0 = time.perf_counter()
            retrieve(store, layout)
            times.append(time.perf_counter() - t0)
        worst = max(worst, statistics.median(times))
    assert worst < 1.0
    print(f"PASS latency: worst per-type median {worst * 1000:.0f} ms "
          f"(< 1000 ms) over 5000 documents")


DECOY_QUERIES = [
    ("small", [
        {"x": 0, "y": 0, "w": 200, "h": 130, "kind": "text"},
        {"x": 0, "y": 160, "w": 92, "h": 140, "kind": "text"},
        {"x": 108, "y": 160, "w": 92, "h": 140, "kind": "text"},
    ], (200, 300)),
    ("caption", [
        {"x": 0, "y": 0, "w": 200, "h": 130, "kind": "nontext"},
        {"x": 0, "y": 160, "w": 92, "h": 140, "kind": "text"},
        {"x": 108, "y": 160, "w": 92, "h": 140, "kind": "text"},
    ], (200, 300)),
    ("cluster", [
        {"x": 0, "y": 0, "w": 90, "h": 200, "kind": "text"},
        {"x": 110, "y": 0, "w": 90, "h": 200, "kind": "nontext"},
    ], (200, 200)),
]


def test_hypothesis_ablation_recall_drops_precision_holds():
    params = SynthParams(seed=21, docs=60, small_block_rate=0.25,
                        caption_rate=0.25, nontext_cluster_rate=0.25)
    docs, _ = synth_corpus(params)
    full = store_from_docs(docs, n_bins=4093)
    h1_only = store_from_docs(docs, n_bins=4093, hypotheses=("H1",))

    def score(store):
        rel_ret = rel = ret = 0
        for name, raw, (cw, ch) in DECOY_QUERIES:
            layout = build_layout(raw, cw, ch)
            relevant = {m.doc_id for m in brute_force_retrieve(full, layout)}
            got = {m.doc_id for m in retrieve(store, layout)}
            rel += len(relevant)
            rel_ret += len(relevant & got)
            ret += len(got)
        recall = 100.0 * rel_ret / rel if rel else 100.0
        precision = 100.0 * rel_ret / ret if ret else 100.0
        return recall, precision, rel

    recall_full, prec_full, rel = score(full)
    recall_h1, prec_h1, _ = score(h1_only)
    assert rel > 0
    assert recall_h1 < recall_full
    assert abs(prec_full - prec_h1) <= 2.0
    print(f"PASS ablation: recall {recall_h1:.1f}% (H1 only) < "
          f"{recall_full:.1f}% (all hypotheses); precision delta "
          f"{abs(prec_full - prec_h1):.1f} points (<= 2)")


def _boolean_doc(doc_id, pair_y):
    """Text+image pair at the given height, text stack at the top left."""
    blocks = [
        {"x": 60, "y": 40, "w": 200, "h": 80, "kind": "text", "ach_block": 10},
        {"x": 60, "y": 140, "w": 200, "h": 80, "kind": "text", "ach_block": 10},
        {"x": 250, "y": pair_y, "w": 140, "h": 120, "kind": "text",
         "ach_block": 10},
        {"x": 420, "y": pair_y, "w": 140, "h": 120, "kind": "nontext"},
    ]
    return {"doc_id": doc_id, "page": {"w": 800, "h": 1000},
            "blocks": blocks, "ach_doc": 10}


def test_boolean_three_document_semantics():
    satisfies = _boolean_doc("ok", 840)
    violator = _boolean_doc("wrong-region", 300)
    with_c = _boolean_doc("has-c", 840)
    with_c["blocks"].extend([
        {"x": 560, "y": 40, "w": 150, "h": 90, "kind": "nontext"},
        {"x": 560, "y": 160, "w": 150, "h": 90, "kind": "nontext"},
    ])
    store = CorpusStore(4093)
    for doc in (satisfies, violator, with_c):
        store.insert_document(document_from_annotation(doc))
    query = {
        "canvas": {"w": 200, "h": 224},
        "expr": "(A, bottom) AND (B) AND (NOT C)",
        "layouts": {
            "A": {"blocks": [
                {"x": 0, "y": 0, "w": 85, "h": 224, "kind": "text"},
                {"x": 105, "y": 0, "w": 95, "h": 224, "kind": "nontext"},
            ]},
            "B": {"blocks": [
                {"x": 0, "y": 0, "w": 200, "h": 100, "kind": "text"},
                {"x": 0, "y": 124, "w": 200, "h": 100, "kind": "text"},
            ]},
            "C": {"blocks": [
                {"x": 0, "y": 0, "w": 200, "h": 100, "kind": "nontext"},
                {"x": 0, "y": 124, "w": 200, "h": 100, "kind": "nontext"},
            ]},
        },
    }
    results = evaluate_boolean(store, parse_query(query))
    assert [r.doc_id for r in results] == ["ok"]
    print("PASS boolean semantics: (A, bottom) AND (B) AND (NOT C) returns "
          "exactly the satisfying document out of 3")


def test_otsu_matches_exhaustive_search():
    rng = random.Random(99)
    for i in range(100):
        hist = random_hist(rng)
        t, _ = otsu_threshold(hist)
        assert t == oracle_otsu(hist), f"histogram {i}"
    print("PASS Otsu: threshold equals exhaustive optimum on 100/100 "
          "random histograms")


def _flush_spec(rng):
    """Guillotine sketch whose block union exactly equals its canvas, so a
    uniformly scaled instance scores 0."""
    while True:
        cells = guillotine_cells(rng, Rect(0, 0, 400, 400),
                                 rng.randint(1, 2), 130.0)
        if len(cells) < 2:
            continue
        g = 11.0
        rects = [Rect(c.x + g, c.y + g, c.w - 2 * g, c.h - 2 * g)
                 for c in cells]
        union = union_all(rects)
        rects = [Rect(r.x - union.x, r.y - union.y, r.w, r.h) for r in rects]
        kinds = [rng.choice((TEXT, NONTEXT)) for _ in rects]
        raw = [{"x": r.x, "y": r.y, "w": r.w, "h": r.h, "kind": k}
               for r, k in zip(rects, kinds)]
        try:
            layout = build_layout(raw, union.w, union.h)
        except QueryValidationError:
            continue
        if layout.dummies:
            continue
        return list(zip(rects, kinds)), (union.w, union.h), layout


def _instance(doc_id, blocks, sx, sy, tx, ty, params):
    out = []
    for i, (r, kind) in enumerate(blocks):
        bbox = Rect(tx + sx * r.x, ty + sy * r.y, sx * r.w, sy * r.h)
        ach = params.char_height if kind == TEXT else 0.0
        out.append(Block(i, bbox, kind, ach))
    return graphs_for_blocks(out, doc_id, params)


def test_exact_instance_ranks_first():
    params = SynthParams()
    rng = random.Random(31337)
    for trial in range(100):
        spec_blocks, (cw, ch), layout = _flush_spec(rng)
        docs = {}
        s = rng.uniform(0.6, 1.7)
        docs["exact"] = _instance("exact", spec_blocks, s, s,
                                  rng.uniform(0, 800 - s * cw),
                                  rng.uniform(0, 1000 - s * ch), params)
        for j in range(6):
            r = rng.uniform(1.3, 1.6)
            base = rng.uniform(0.6, 1.2)
            sx, sy = (base * r, base) if j % 2 else (base, base * r)
            docs[f"skew-{j}"] = _instance(
                f"skew-{j}", spec_blocks, sx, sy,
                rng.uniform(0, 800 - sx * cw),
                rng.uniform(0, 1000 - sy * ch), params)
        store = store_from_docs(docs, n_bins=509)
        results = retrieve(store, layout)
        ids = [m.doc_id for m in results]
        assert ids[0] == "exact", f"trial {trial}: {ids[:3]}"
        assert sum(1 for i in ids if i.startswith("skew-")) >= 5
        assert results[0].score < results[1].score
    print("PASS ranking: exact instance ranked first against >= 5 "
          "aspect-perturbed distractors in 100/100 trials")


def test_persistence_byte_identical_responses(battery, tmp_path):
    specs = [battery[3 * k] for k in range(20)]
    specs = [PlantSpec(s.name, s.canvas, s.blocks, s.query_ids, count=2)
             for s in specs]
    docs, _ = synth_corpus(SynthParams(seed=808, docs=60), specs)
    store = store_from_docs(docs, n_bins=4093)
    path = tmp_path / "corpus.jsonl"
    store.save(path)
    loaded = CorpusStore.load(path, 4093)

    def responses(st):
        out = []
        for spec in specs:
            raw = [{"x": r.x, "y": r.y, "w": r.w, "h": r.h, "kind": k}
                   for idx in spec.query_ids
                   for r, k in [spec.blocks[idx]]]
            bq = parse_query({
                "canvas": {"w": spec.canvas[0], "h": spec.canvas[1]},
                "layouts": {"A": {"blocks": raw}},
            })
            payload = match_payload(st, evaluate_boolean(st, bq), 20)
            out.append(json.dumps(payload, sort_keys=True).encode())
        return out

    before = responses(store)
    after = responses(loaded)
    assert before == after
    assert any(json.loads(b)["results"] for b in before)
    print("PASS persistence: byte-identical responses for a 20-query "
          "battery after save/load")
