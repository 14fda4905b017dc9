"""Umbrella command line: ingest | index | query | synth | eval | serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .geometry import Rect
from .harness import (
    PlantSpec,
    SynthParams,
    brute_force_retrieve,
    evaluate,
    store_from_docs,
    synth_corpus,
)
from .index import CorpusError, CorpusStore, document_from_json, document_to_json
from .ingestion import document_from_annotation, document_from_image_bytes
from .matching import evaluate_boolean, retrieve
from .query import QueryValidationError, expression_atoms, parse_query
from .service import ServiceConfig, create_app, match_payload


def _default_corpus(args) -> str | None:
    return args.corpus or os.environ.get("LAYOUTSEARCH_CORPUS")


def cmd_ingest(args) -> int:
    if args.blocks:
        doc = json.loads(Path(args.blocks).read_text())
        graphs = document_from_annotation(doc, args.doc_id)
    else:
        data = Path(args.image).read_bytes()
        doc_id = args.doc_id or Path(args.image).stem
        graphs = document_from_image_bytes(data, doc_id, args.a, args.r)
    out = document_to_json(graphs)
    if args.out:
        Path(args.out).write_text(out + "\n")
    else:
        print(out)
    return 0


def cmd_index_build(args) -> int:
    paths = sorted(Path(args.corpus).glob("*.json"))
    if not paths:
        print(f"no document JSON files in {args.corpus}", file=sys.stderr)
        return 1
    with open(args.out, "w", encoding="utf-8") as f:
        for p in paths:
            graphs = document_from_json(p.read_text().strip())
            f.write(document_to_json(graphs))
            f.write("\n")
    print(f"wrote {len(paths)} documents to {args.out}")
    return 0


def cmd_index_stats(args) -> int:
    store = CorpusStore.load(args.corpus_file, args.bins)
    hist = store.index.bucket_histogram()
    chains = sorted(hist.values(), reverse=True)
    print(f"documents:     {len(store.documents)}")
    print(f"entries:       {store.index.count}")
    print(f"bins:          {store.index.n}")
    print(f"occupied bins: {len(hist)}")
    print(f"load factor:   {store.index.count / store.index.n:.3f}")
    print(f"longest chains: {chains[:10]}")
    return 0


def cmd_query(args) -> int:
    corpus = _default_corpus(args)
    if not corpus:
        print("no corpus given (--corpus or LAYOUTSEARCH_CORPUS)", file=sys.stderr)
        return 1
    store = CorpusStore.load(corpus, args.bins)
    try:
        bq = parse_query(Path(args.query).read_text())
    except QueryValidationError as exc:
        print(f"invalid query: {exc}", file=sys.stderr)
        return 2
    results = evaluate_boolean(store, bq, use_hash=not args.no_hash)
    if args.json:
        print(json.dumps(match_payload(store, results, args.top)))
        return 0
    types = ", ".join(f"{n}: type {t}" for n, t in sorted(bq.query_types.items()))
    print(f"# layouts -> {types}")
    for r in results[: args.top]:
        best = r.matches[0] if r.matches else None
        where = ""
        if best is not None:
            bb = best.match_bbox
            where = f"  @({bb.x:.0f},{bb.y:.0f} {bb.w:.0f}x{bb.h:.0f}) {best.hypothesis_id}"
        print(f"{r.doc_id}\tscore={r.score:.4f}{where}")
    return 0


def _plant_specs_from_query(path: str, count: int) -> list[PlantSpec]:
    bq = parse_query(Path(path).read_text())
    specs = []
    for name, layout in bq.layouts.items():
        blocks = [(b.bbox, b.kind) for b in layout.blocks]
        specs.append(
            PlantSpec(
                name=name,
                canvas=(layout.canvas_w, layout.canvas_h),
                blocks=blocks,
                query_ids=list(range(len(blocks))),
                count=count,
            )
        )
    return specs


def cmd_synth(args) -> int:
    params = SynthParams(
        seed=args.seed,
        docs=args.docs,
        raster=args.raster,
        small_block_rate=args.decoys,
        caption_rate=args.decoys / 2,
        nontext_cluster_rate=args.decoys / 2,
    )
    specs = _plant_specs_from_query(args.plant, args.plant_count) if args.plant else []
    docs, truth = synth_corpus(params, specs)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "corpus.jsonl", "w", encoding="utf-8") as f:
        for doc_id in sorted(docs):
            f.write(document_to_json(docs[doc_id]))
            f.write("\n")
    truth_obj = {
        spec.name: sorted(truth.relevant(spec.name)) for spec in specs
    }
    (outdir / "truth.json").write_text(json.dumps(truth_obj, indent=2))
    print(f"wrote {len(docs)} documents to {outdir / 'corpus.jsonl'}")
    return 0


def cmd_eval(args) -> int:
    store = CorpusStore.load(args.corpus, args.bins)
    battery = []
    battery_dir = Path(args.battery)
    truth_path = battery_dir / "truth.json"
    if not truth_path.exists():
        truth_path = Path(args.corpus).parent / "truth.json"
    planted = json.loads(truth_path.read_text()) if truth_path.exists() else {}
    for qf in sorted(battery_dir.glob("*.json")):
        if qf.name == "truth.json":
            continue
        bq = parse_query(qf.read_text())
        for atom, neg in expression_atoms(bq.expr):
            if not neg:
                battery.append((qf.stem, bq.layouts[atom.name]))
                break
    if not battery:
        print(f"no query files in {battery_dir}", file=sys.stderr)
        return 1
    relevant = {}
    for name, layout in battery:
        oracle = {m.doc_id for m in brute_force_retrieve(store, layout)}
        relevant[name] = oracle | set(planted.get(name, []))
    report = evaluate(store, battery, relevant, runs=args.runs)
    payload = report.to_dict()
    Path(args.report).write_text(json.dumps(payload, indent=2))
    print(f"{'type':>4} {'docs':>6} {'recall':>8} {'precision':>9} {'time(s)':>8}")
    for t, row in sorted(payload.items(), key=lambda kv: int(kv[0])):
        print(f"{t:>4} {row['documents']:>6} {row['recall']:>8.2f} "
              f"{row['precision']:>9.2f} {row['time']:>8.4f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    host, _, port = args.listen.rpartition(":")
    config = ServiceConfig(
        listen=args.listen,
        corpus_path=_default_corpus(args),
        n_bins=args.bins,
        top_k=args.top,
        static_dir=args.static,
    )
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="layoutsearch")
    p.add_argument("--config", help="JSON file with default option values")
    sub = p.add_subparsers(dest="command", required=True)

    ing = sub.add_parser("ingest", help="image or annotation -> document graph JSON")
    ing.add_argument("image", nargs="?", help="PGM (or PNG) page image")
    ing.add_argument("--blocks", help="pre-segmented block annotation JSON")
    ing.add_argument("--out")
    ing.add_argument("--doc-id")
    ing.add_argument("--a", type=float, default=3.0, help="ARLSA gap factor")
    ing.add_argument("--r", type=float, default=3.5, help="ARLSA height ratio")
    ing.set_defaults(func=cmd_ingest)

    idx = sub.add_parser("index", help="corpus file operations")
    idx_sub = idx.add_subparsers(dest="index_command", required=True)
    ib = idx_sub.add_parser("build")
    ib.add_argument("--corpus", required=True, help="directory of document JSON files")
    ib.add_argument("--out", required=True)
    ib.set_defaults(func=cmd_index_build)
    ist = idx_sub.add_parser("stats")
    ist.add_argument("corpus_file")
    ist.add_argument("--bins", type=int, default=4093)
    ist.set_defaults(func=cmd_index_stats)

    q = sub.add_parser("query", help="run a sketch query against a corpus")
    q.add_argument("--corpus")
    q.add_argument("--query", required=True)
    q.add_argument("--top", type=int, default=20)
    q.add_argument("--no-hash", action="store_true")
    q.add_argument("--json", action="store_true")
    q.add_argument("--bins", type=int, default=4093)
    q.set_defaults(func=cmd_query)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--docs", type=int, default=100)
    s.add_argument("--plant", help="query JSON whose layouts get planted")
    s.add_argument("--plant-count", type=int, default=5)
    s.add_argument("--decoys", type=float, default=0.0,
                   help="decoy-structure rate per page cell")
    s.add_argument("--out", required=True)
    s.add_argument("--raster", action="store_true")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="recall/precision/time report")
    e.add_argument("--corpus", required=True)
    e.add_argument("--battery", required=True, help="directory of query JSON files")
    e.add_argument("--report", required=True)
    e.add_argument("--runs", type=int, default=3)
    e.add_argument("--bins", type=int, default=4093)
    e.set_defaults(func=cmd_eval)

    srv = sub.add_parser("serve", help="HTTP API (and optional UI)")
    srv.add_argument("--corpus")
    srv.add_argument("--listen", default="127.0.0.1:8000")
    srv.add_argument("--bins", type=int, default=4093)
    srv.add_argument("--top", type=int, default=20)
    srv.add_argument("--static", help="static asset directory for the sketch UI")
    srv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        for key, value in overrides.items():
            if hasattr(args, key) and getattr(args, key) in (None, parser.get_default(key)):
                setattr(args, key, value)
    try:
        return args.func(args)
    except (CorpusError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
