"""HTTP facade over the corpus store and query engine."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .blocks import HYPOTHESIS_IDS
from .index import CorpusError, CorpusStore, document_to_json
from .ingestion import document_from_annotation, document_from_image_bytes
from .matching import evaluate_boolean
from .query import QueryValidationError, parse_query


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8000"
    corpus_path: str | None = None
    n_bins: int = 4093
    top_k: int = 20
    static_dir: str | None = None

    def __post_init__(self):
        if self.n_bins < 1:
            raise ValueError("n_bins must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


def _clone_with(
    store: CorpusStore, graphs, meta: dict, replace: bool
) -> CorpusStore:
    """Copy-on-write insert so readers keep a consistent snapshot."""
    new = CorpusStore(store.n_bins)
    doc_id = graphs[0].doc_id
    if doc_id in store.documents and not replace:
        raise CorpusError(f"doc_id already present: {doc_id}")
    for existing_id in sorted(store.documents):
        if existing_id == doc_id:
            continue
        new.insert_document(store.documents[existing_id],
                            meta=store.meta.get(existing_id))
    new.insert_document(graphs, meta=meta)
    return new


def match_payload(store: CorpusStore, results, top_k: int) -> dict:
    out = []
    for r in results[:top_k]:
        matches = []
        for m in r.matches:
            g = store.graph(m.doc_id, m.hypothesis_id)
            mapping = []
            for qid in sorted(m.mapping):
                b = g.blocks[m.mapping[qid]]
                mapping.append(
                    {
                        "query_block": qid,
                        "doc_blocks": [
                            {"x": b.bbox.x, "y": b.bbox.y, "w": b.bbox.w,
                             "h": b.bbox.h, "kind": b.kind}
                        ],
                    }
                )
            for did in sorted(m.dummy_mapping):
                docs = [
                    {"x": g.blocks[i].bbox.x, "y": g.blocks[i].bbox.y,
                     "w": g.blocks[i].bbox.w, "h": g.blocks[i].bbox.h,
                     "kind": g.blocks[i].kind}
                    for i in m.dummy_mapping[did]
                ]
                mapping.append({"query_block": did, "doc_blocks": docs})
            matches.append(
                {
                    "hypothesis": m.hypothesis_id,
                    "bbox": {"x": m.match_bbox.x, "y": m.match_bbox.y,
                             "w": m.match_bbox.w, "h": m.match_bbox.h},
                    "mapping": mapping,
                }
            )
        out.append({"doc_id": r.doc_id, "score": r.score, "matches": matches})
    return {"results": out}


def create_app(config: ServiceConfig | None = None,
               store: CorpusStore | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="layoutsearch")
    if store is None:
        if config.corpus_path:
            store = CorpusStore.load(config.corpus_path, config.n_bins)
        else:
            store = CorpusStore(config.n_bins)
    state = {"store": store, "images": {}}
    write_lock = threading.Lock()

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/documents", status_code=201)
    async def post_document(request: Request, doc_id: str | None = None,
                            replace: bool = False):
        body = await request.body()
        if not body:
            return JSONResponse({"error": "empty body"}, status_code=400)
        content_type = request.headers.get("content-type", "")
        image_bytes = None
        try:
            if "json" in content_type or body.lstrip()[:1] == b"{":
                graphs = document_from_annotation(json.loads(body), doc_id)
            else:
                graphs = document_from_image_bytes(body, doc_id)
                image_bytes = body
        except (ValueError, KeyError, TypeError) as exc:
            return JSONResponse({"error": f"undecodable input: {exc}"},
                                status_code=400)
        with write_lock:
            try:
                new_store = _clone_with(
                    state["store"], graphs,
                    {"source": "raster" if image_bytes else "annotation"},
                    replace,
                )
            except CorpusError as exc:
                return JSONResponse({"error": str(exc)}, status_code=409)
            if image_bytes is not None:
                state["images"][graphs[0].doc_id] = image_bytes
            state["store"] = new_store
        return {"doc_id": graphs[0].doc_id}

    @app.post("/query")
    async def post_query(request: Request, top: int | None = None):
        body = await request.body()
        try:
            bq = parse_query(body.decode("utf-8"))
        except QueryValidationError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        snapshot = state["store"]
        results = evaluate_boolean(snapshot, bq)
        return match_payload(snapshot, results, top or config.top_k)

    @app.get("/documents/{doc_id}/hypotheses/{hyp}")
    def get_hypothesis(doc_id: str, hyp: str):
        snapshot = state["store"]
        if doc_id not in snapshot.documents or hyp not in HYPOTHESIS_IDS:
            return JSONResponse({"error": "not found"}, status_code=404)
        graphs = snapshot.documents[doc_id]
        full = json.loads(document_to_json(graphs))
        full["hypotheses"] = [h for h in full["hypotheses"] if h["id"] == hyp]
        return full

    @app.get("/documents/{doc_id}/image")
    def get_image(doc_id: str):
        snapshot = state["store"]
        if doc_id not in snapshot.documents:
            return JSONResponse({"error": "not found"}, status_code=404)
        img = state["images"].get(doc_id)
        if img is None:
            return JSONResponse({"error": "no raster source"}, status_code=404)
        return Response(content=img, media_type="application/octet-stream")

    @app.get("/index/stats")
    def index_stats():
        snapshot = state["store"]
        hist = snapshot.index.bucket_histogram()
        return {
            "entries": snapshot.index.count,
            "bins": snapshot.index.n,
            "occupied_bins": len(hist),
            "max_chain": max(hist.values(), default=0),
            "load_factor": snapshot.index.count / snapshot.index.n,
        }

    if config.static_dir:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True),
                  name="ui")
    return app
