import io
import json
import random

import pytest
from fastapi.testclient import TestClient

from layoutsearch.harness import SynthParams, random_page_blocks, render_page
from layoutsearch.index import CorpusStore
from layoutsearch.service import ServiceConfig, create_app


def annotation(doc_id="d1", shift=0.0):
    return {
        "doc_id": doc_id,
        "page": {"w": 800, "h": 1000},
        "blocks": [
            {"x": 50 + shift, "y": 50, "w": 300, "h": 200, "kind": "text",
             "ach_block": 10},
            {"x": 400 + shift, "y": 50, "w": 300, "h": 200, "kind": "nontext"},
            {"x": 50 + shift, "y": 300, "w": 650, "h": 300, "kind": "text",
             "ach_block": 10},
        ],
        "ach_doc": 10,
    }


def query_doc():
    return {
        "canvas": {"w": 200, "h": 200},
        "layouts": {
            "A": {
                "blocks": [
                    {"x": 0, "y": 0, "w": 90, "h": 60, "kind": "text"},
                    {"x": 110, "y": 0, "w": 90, "h": 60, "kind": "nontext"},
                    {"x": 0, "y": 75, "w": 200, "h": 125, "kind": "text"},
                ]
            }
        },
    }


def pgm_bytes():
    rng = random.Random(7)
    params = SynthParams()
    img = render_page(random_page_blocks(rng, params), params)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    return header + img.tobytes()


@pytest.fixture
def client():
    return TestClient(create_app(ServiceConfig()))


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200 and r.json() == {"status": "ok"}


def test_post_annotation_and_query(client):
    r = client.post("/documents", json=annotation())
    assert r.status_code == 201 and r.json() == {"doc_id": "d1"}
    r = client.post("/query", content=json.dumps(query_doc()))
    assert r.status_code == 200
    results = r.json()["results"]
    assert [x["doc_id"] for x in results] == ["d1"]
    match = results[0]["matches"][0]
    assert match["hypothesis"] in ("H1", "H2", "H3", "H4")
    assert {m["query_block"] for m in match["mapping"]} == {0, 1, 2}
    for m in match["mapping"]:
        assert m["doc_blocks"] and all(
            d["kind"] in ("text", "nontext") for d in m["doc_blocks"]
        )


def test_post_empty_body_400(client):
    r = client.post("/documents", content=b"")
    assert r.status_code == 400


def test_post_undecodable_400(client):
    r = client.post("/documents", content=b"\x89PNG-but-not-really")
    assert r.status_code == 400
    assert "undecodable" in r.json()["error"]


def test_post_bad_annotation_400(client):
    doc = annotation()
    doc["blocks"][0]["kind"] = "figure"
    assert client.post("/documents", json=doc).status_code == 400


def test_duplicate_409_and_replace(client):
    assert client.post("/documents", json=annotation()).status_code == 201
    assert client.post("/documents", json=annotation()).status_code == 409
    r = client.post("/documents", params={"replace": "true"},
                    json=annotation(shift=5.0))
    assert r.status_code == 201
    stats = client.get("/index/stats").json()
    assert stats["entries"] > 0
    # replace did not duplicate entries: same count as a fresh single insert
    fresh = TestClient(create_app(ServiceConfig()))
    fresh.post("/documents", json=annotation(shift=5.0))
    assert stats["entries"] == fresh.get("/index/stats").json()["entries"]


def test_query_validation_422(client):
    r = client.post("/query", content=b"{not json")
    assert r.status_code == 422
    bad = query_doc()
    bad["layouts"] = {}
    assert client.post("/query", content=json.dumps(bad)).status_code == 422


def test_hypothesis_endpoint(client):
    client.post("/documents", json=annotation())
    r = client.get("/documents/d1/hypotheses/H3")
    assert r.status_code == 200
    doc = r.json()
    assert [h["id"] for h in doc["hypotheses"]] == ["H3"]
    assert doc["page"] == {"w": 800, "h": 1000}
    assert client.get("/documents/d1/hypotheses/H9").status_code == 404
    assert client.get("/documents/nope/hypotheses/H1").status_code == 404


def test_image_endpoint_round_trip(client):
    data = pgm_bytes()
    r = client.post("/documents", params={"doc_id": "page"}, content=data)
    assert r.status_code == 201, r.text
    got = client.get("/documents/page/image")
    assert got.status_code == 200 and got.content == data
    client.post("/documents", json=annotation())
    assert client.get("/documents/d1/image").status_code == 404
    assert client.get("/documents/nope/image").status_code == 404


def test_index_stats_shape(client):
    client.post("/documents", json=annotation())
    stats = client.get("/index/stats").json()
    assert stats["bins"] == 4093
    assert stats["entries"] == sum(
        [stats["entries"]]
    )  # sanity: present and integral
    assert 0 < stats["occupied_bins"] <= stats["entries"]
    assert stats["max_chain"] >= 1
    assert stats["load_factor"] == pytest.approx(stats["entries"] / 4093)


def test_repeated_queries_byte_identical(client):
    for i in range(4):
        client.post("/documents", json=annotation(f"d{i}", shift=float(i)))
    body = json.dumps(query_doc())
    first = client.post("/query", content=body).content
    for _ in range(3):
        assert client.post("/query", content=body).content == first


def test_top_parameter_limits_results(client):
    for i in range(4):
        client.post("/documents", json=annotation(f"d{i}", shift=float(i)))
    body = json.dumps(query_doc())
    all_results = client.post("/query", content=body).json()["results"]
    assert len(all_results) == 4
    top2 = client.post("/query", params={"top": 2}, content=body).json()["results"]
    assert top2 == all_results[:2]


def test_store_loaded_from_corpus_path(tmp_path):
    from layoutsearch.ingestion import document_from_annotation

    store = CorpusStore(61)
    store.insert_document(document_from_annotation(annotation()))
    p = tmp_path / "c.jsonl"
    store.save(p)
    client = TestClient(create_app(ServiceConfig(corpus_path=str(p), n_bins=61)))
    r = client.post("/query", content=json.dumps(query_doc()))
    assert [x["doc_id"] for x in r.json()["results"]] == ["d1"]


def test_service_config_validation():
    with pytest.raises(ValueError):
        ServiceConfig(n_bins=0)
    with pytest.raises(ValueError):
        ServiceConfig(top_k=0)
