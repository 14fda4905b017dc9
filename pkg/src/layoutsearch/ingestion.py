"""Document ingestion entry points shared by the CLI and the service:
raster images or pre-segmented block annotations in, hypothesis graphs out."""

from __future__ import annotations

import io

import numpy as np

from .blocks import Block, LayoutGraph
from .geometry import Rect
from .hypotheses import HorizontalLine, build_all_hypotheses
from .raster import ingest_page


def document_from_annotation(doc: dict, doc_id: str | None = None) -> list[LayoutGraph]:
    """Build the four hypothesis graphs from a block-annotation object:
    {doc_id, page:{w,h}, blocks:[{x,y,w,h,kind,ach_block?}], ach_doc?, lines?}.
    """
    doc_id = doc_id or doc.get("doc_id")
    if not doc_id:
        raise ValueError("doc_id required")
    page = doc["page"]
    page_dims = (float(page["w"]), float(page["h"]))
    blocks = []
    for i, b in enumerate(doc["blocks"]):
        kind = b["kind"]
        if kind not in ("text", "nontext"):
            raise ValueError(f"block {i}: bad kind {kind!r}")
        blocks.append(
            Block(
                block_id=i,
                bbox=Rect(float(b["x"]), float(b["y"]),
                          float(b["w"]), float(b["h"])),
                kind=kind,
                avg_char_height_block=float(b.get("ach_block", 0.0)),
            )
        )
    if not blocks:
        raise ValueError("annotation has no blocks")
    lines = [
        HorizontalLine(float(ln["y"]), float(ln["x0"]), float(ln["x1"]))
        for ln in doc.get("lines", [])
    ]
    ach = doc.get("ach_doc")
    return build_all_hypotheses(
        blocks, lines, page_dims, doc_id=doc_id,
        avg_char_height_doc=float(ach) if ach is not None else None,
    )


def decode_image_bytes(data: bytes) -> np.ndarray:
    if data[:2] == b"P5":
        import tempfile

        from .raster import read_pgm

        with tempfile.NamedTemporaryFile(suffix=".pgm") as f:
            f.write(data)
            f.flush()
            return read_pgm(f.name)
    try:
        from PIL import Image
    except ImportError as exc:
        raise ValueError("non-PGM input requires Pillow") from exc
    try:
        img = Image.open(io.BytesIO(data)).convert("L")
    except OSError as exc:
        raise ValueError(f"cannot decode image: {exc}") from exc
    return np.asarray(img, dtype=np.uint8)


def document_from_image_bytes(data: bytes, doc_id: str | None = None,
                              gap_factor: float = 3.0,
                              height_ratio: float = 3.5) -> list[LayoutGraph]:
    img = decode_image_bytes(data)
    res = ingest_page(img, gap_factor, height_ratio)
    if not res.blocks:
        raise ValueError("no blocks found in image")
    return build_all_hypotheses(
        res.blocks, res.lines, res.page_dims, doc_id=doc_id or "doc",
        avg_char_height_doc=res.avg_char_height_doc,
    )
