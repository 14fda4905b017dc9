import random

import pytest

from layoutsearch.blocks import NONTEXT, TEXT
from layoutsearch.geometry import Rect
from layoutsearch.harness import (
    PlantSpec,
    SynthParams,
    ablate_hypotheses,
    brute_force_retrieve,
    evaluate,
    guillotine_cells,
    plant_blocks,
    query_layout_for_spec,
    random_layout_spec,
    random_page_blocks,
    render_page,
    store_from_docs,
    synth_corpus,
)
from layoutsearch.index import document_to_json
from layoutsearch.matching import retrieve
from layoutsearch.query import build_layout

DECOY_SMALL_QUERY = [
    {"x": 0, "y": 0, "w": 200, "h": 130, "kind": "text"},
    {"x": 0, "y": 160, "w": 92, "h": 140, "kind": "text"},
    {"x": 108, "y": 160, "w": 92, "h": 140, "kind": "text"},
]
DECOY_CAPTION_QUERY = [
    {"x": 0, "y": 0, "w": 200, "h": 130, "kind": "nontext"},
    {"x": 0, "y": 160, "w": 92, "h": 140, "kind": "text"},
    {"x": 108, "y": 160, "w": 92, "h": 140, "kind": "text"},
]
DECOY_CLUSTER_QUERY = [
    {"x": 0, "y": 0, "w": 90, "h": 200, "kind": "text"},
    {"x": 110, "y": 0, "w": 90, "h": 200, "kind": "nontext"},
]


def decoy_battery():
    return [
        ("small", build_layout(DECOY_SMALL_QUERY, 200, 300)),
        ("caption", build_layout(DECOY_CAPTION_QUERY, 200, 300)),
        ("cluster", build_layout(DECOY_CLUSTER_QUERY, 200, 200)),
    ]


# --- generators ------------------------------------------------------------


def test_guillotine_cells_tile_exactly():
    rng = random.Random(5)
    rect = Rect(0, 0, 800, 1000)
    cells = guillotine_cells(rng, rect, 3, 90)
    assert sum(c.area for c in cells) == pytest.approx(rect.area)
    for i, a in enumerate(cells):
        assert a.w >= 90 or a.h >= 90
        for b in cells[i + 1:]:
            assert not a.intersects(b)


def test_random_page_blocks_disjoint_in_page():
    rng = random.Random(1)
    params = SynthParams()
    for _ in range(10):
        blocks = random_page_blocks(rng, params)
        assert blocks
        for i, a in enumerate(blocks):
            assert 0 <= a.bbox.x and a.bbox.right <= params.page_w
            assert 0 <= a.bbox.y and a.bbox.bottom <= params.page_h
            for b in blocks[i + 1:]:
                assert not a.bbox.intersects(b.bbox)


def test_synth_corpus_deterministic():
    params = SynthParams(seed=9, docs=6)
    docs_a, _ = synth_corpus(params)
    docs_b, _ = synth_corpus(params)
    assert set(docs_a) == set(docs_b)
    for doc_id in docs_a:
        assert document_to_json(docs_a[doc_id]) == document_to_json(docs_b[doc_id])


def test_render_page_deterministic_and_binary():
    rng = random.Random(2)
    params = SynthParams()
    blocks = random_page_blocks(rng, params)
    img = render_page(blocks, params)
    assert img.shape == (1000, 800)
    assert set(img.ravel().tolist()) <= {0, 255}
    assert (img == render_page(blocks, params)).all()


def test_plant_blocks_transform_ranges():
    rng = random.Random(4)
    params = SynthParams()
    spec = random_layout_spec(rng, "p", 1)
    for _ in range(20):
        blocks, (sx, sy, tx, ty) = plant_blocks(rng, spec, params)
        assert 0.5 <= sx <= 2.0 and 0.5 <= sy <= 2.0
        for b in blocks:
            assert 0 <= b.bbox.x and b.bbox.right <= params.page_w + 1e-6
            assert 0 <= b.bbox.y and b.bbox.bottom <= params.page_h + 1e-6
        # geometry reproduces the spec under the reported transform
        for b, (r, _) in zip(blocks, spec.blocks):
            assert b.bbox.x == pytest.approx(tx + sx * r.x)
            assert b.bbox.w == pytest.approx(sx * r.w)


def test_plant_any_kind_concretized():
    rng = random.Random(4)
    spec = random_layout_spec(rng, "p", 2)  # all kinds "any"
    blocks, _ = plant_blocks(rng, spec, SynthParams())
    assert all(b.kind in (TEXT, NONTEXT) for b in blocks)


@pytest.mark.parametrize("qtype", range(1, 7))
def test_random_layout_spec_types(qtype):
    rng = random.Random(100 + qtype)
    spec = random_layout_spec(rng, f"t{qtype}", qtype)
    assert query_layout_for_spec(spec).query_type == qtype


def test_planted_instances_are_retrieved():
    rng = random.Random(0)
    specs = [random_layout_spec(rng, f"t{q}", q, count=3) for q in (1, 4)]
    params = SynthParams(seed=3, docs=10)
    docs, truth = synth_corpus(params, specs)
    store = store_from_docs(docs, n_bins=509)
    for spec in specs:
        lay = query_layout_for_spec(spec)
        got = {m.doc_id for m in retrieve(store, lay)}
        assert truth.relevant(spec.name) <= got


# --- evaluation ------------------------------------------------------------


def test_evaluate_arithmetic():
    rng = random.Random(0)
    spec = random_layout_spec(rng, "q", 1, count=4)
    docs, truth = synth_corpus(SynthParams(seed=1, docs=5), [spec])
    store = store_from_docs(docs, n_bins=509)
    lay = query_layout_for_spec(spec)
    planted = truth.relevant("q")
    retrieved = {m.doc_id for m in retrieve(store, lay)}
    # declare one extra phantom doc relevant: recall must dip accordingly
    relevant = retrieved | {"phantom"}
    report = evaluate(store, [("q", lay)], {"q": relevant}, runs=1)
    row = report.rows[lay.query_type]
    assert planted <= retrieved
    assert row.retrieved == len(retrieved)
    assert row.relevant == len(relevant)
    assert row.relevant_retrieved == len(retrieved)
    assert row.recall == pytest.approx(100.0 * len(retrieved) / len(relevant))
    assert row.precision == pytest.approx(100.0)


def test_evaluate_empty_retrieval_scores_hundred_precision():
    docs, _ = synth_corpus(SynthParams(seed=2, docs=2))
    store = store_from_docs(docs, n_bins=61)
    # a sketch nothing in this tiny corpus satisfies: 7 stacked columns
    raw = [{"x": 0, "y": 30 * i, "w": 200, "h": 20, "kind": "nontext"}
           for i in range(7)]
    lay = build_layout(raw, 200.0, 210.0)
    report = evaluate(store, [("none", lay)], {"none": set()}, runs=1)
    row = report.rows[lay.query_type]
    assert row.retrieved == 0
    assert row.precision == 100.0 and row.recall == 100.0


# --- hypothesis ablation ---------------------------------------------------


def test_decoy_pages_match_only_beyond_h1():
    params = SynthParams(seed=5, docs=9, small_block_rate=0.34,
                        caption_rate=0.33, nontext_cluster_rate=0.33)
    docs, _ = synth_corpus(params)
    full = store_from_docs(docs, n_bins=509)
    h1 = store_from_docs(docs, n_bins=509, hypotheses=("H1",))
    dropped = 0
    for name, lay in decoy_battery():
        rel = {m.doc_id for m in brute_force_retrieve(full, lay)}
        got_h1 = {m.doc_id for m in retrieve(h1, lay)}
        assert got_h1 <= rel  # H1 results are a subset of full-store results
        dropped += len(rel - got_h1)
    assert dropped > 0


def test_ablate_hypotheses_reports():
    params = SynthParams(seed=5, docs=9, small_block_rate=0.34,
                        caption_rate=0.33, nontext_cluster_rate=0.33)
    docs, _ = synth_corpus(params)
    report_h1, report_all = ablate_hypotheses(docs, decoy_battery(), n_bins=509)

    def totals(report):
        rel = sum(r.relevant for r in report.rows.values())
        rel_ret = sum(r.relevant_retrieved for r in report.rows.values())
        ret = sum(r.retrieved for r in report.rows.values())
        return rel, rel_ret, ret

    rel_a, rel_ret_a, ret_a = totals(report_all)
    rel_h, rel_ret_h, ret_h = totals(report_h1)
    assert rel_a == rel_h > 0
    assert rel_ret_a == rel_a  # full store retrieves everything it defines
    assert rel_ret_h < rel_ret_a
    assert ret_a and 100.0 * rel_ret_a / ret_a == pytest.approx(100.0)
    if ret_h:
        assert 100.0 * rel_ret_h / ret_h == pytest.approx(100.0)
