"""Page image processing: binarization, ruling removal, text/non-text
classification and block formation via adaptive run-length smoothing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .blocks import NONTEXT, TEXT, Block
from .geometry import Rect, h_overlap, v_overlap
from .hypotheses import HorizontalLine

# ARLSA linking constants; overridable per call.
ARLSA_GAP_FACTOR = 3.0
ARLSA_HEIGHT_RATIO = 3.5


class NoTextError(ValueError):
    """Raised when an operation needs text components and none exist."""


@dataclass
class BinarizeResult:
    mask: np.ndarray  # bool, True = foreground
    threshold: int
    degenerate: bool = False


@dataclass(frozen=True)
class Ruling:
    orientation: str  # "horizontal" | "vertical"
    bbox: Rect
    rows: np.ndarray = field(compare=False, repr=False, default=None)
    cols: np.ndarray = field(compare=False, repr=False, default=None)

    @property
    def pixel_count(self) -> int:
        return 0 if self.rows is None else len(self.rows)


@dataclass
class ConnectedComponent:
    bbox: Rect
    pixel_count: int
    label: str  # "text" | "nontext" | "unknown"


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit binary (P5) PGM into a uint8 array."""
    with open(path, "rb") as f:
        data = f.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        if data[i : i + 1] == b"#":
            while data[i : i + 1] not in (b"\n", b""):
                i += 1
        elif data[i : i + 1].isspace():
            i += 1
        else:
            j = i
            while not data[j : j + 1].isspace() and data[j : j + 1] != b"":
                j += 1
            tokens.append(data[i:j])
            i = j
    if tokens[0] != b"P5":
        raise ValueError(f"not a P5 PGM: magic {tokens[0]!r}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("16-bit PGM not supported")
    i += 1  # single whitespace after maxval
    pixels = np.frombuffer(data[i : i + w * h], dtype=np.uint8)
    if pixels.size != w * h:
        raise ValueError("truncated PGM payload")
    return pixels.reshape(h, w).copy()


def write_pgm(path, img: np.ndarray) -> None:
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def load_gray(path) -> np.ndarray:
    """Load a page image (PGM always; PNG when Pillow is available)."""
    p = str(path)
    if p.lower().endswith(".pgm"):
        return read_pgm(p)
    try:
        from PIL import Image
    except ImportError as exc:
        raise ValueError("non-PGM input requires Pillow") from exc
    return np.asarray(Image.open(p).convert("L"), dtype=np.uint8)


def otsu_threshold(hist: np.ndarray) -> tuple[int, bool]:
    """Smallest threshold maximizing between-class variance over a 256-bin
    histogram.  Returns (threshold, degenerate) where degenerate means the
    histogram has a single occupied bin."""
    hist = np.asarray(hist, dtype=np.float64)
    total = hist.sum()
    occupied = np.nonzero(hist)[0]
    if len(occupied) <= 1:
        t = int(occupied[0]) if len(occupied) else 0
        return t, True
    p = hist / total
    omega = np.cumsum(p)
    mu = np.cumsum(p * np.arange(256))
    mu_t = mu[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = (mu_t * omega - mu) ** 2 / (omega * (1.0 - omega))
    sigma_b = np.nan_to_num(sigma_b, nan=0.0, posinf=0.0)
    return int(np.argmax(sigma_b)), False


def binarize_otsu(img: np.ndarray) -> BinarizeResult:
    """Otsu binarization; dark pixels (<= threshold) become foreground."""
    if img.size == 0:
        raise ValueError("empty image")
    hist = np.bincount(img.ravel(), minlength=256)[:256]
    t, degenerate = otsu_threshold(hist)
    if degenerate:
        return BinarizeResult(np.zeros(img.shape, dtype=bool), t, True)
    return BinarizeResult(img <= t, t, False)


_STRUCT8 = np.ones((3, 3), dtype=bool)


def _component_slices(mask: np.ndarray):
    labels, n = ndimage.label(mask, structure=_STRUCT8)
    return labels, n, ndimage.find_objects(labels)


def _median(values) -> float:
    s = sorted(values)
    if not s:
        return 0.0
    m = len(s) // 2
    return float(s[m]) if len(s) % 2 else (s[m - 1] + s[m]) / 2.0


def detect_rulings(mask: np.ndarray) -> list[Ruling]:
    """Find long thin components and classify them as horizontal or vertical
    rulings by elongation and absolute length."""
    labels, n, slices = _component_slices(mask)
    if n == 0:
        return []
    heights = [sl[0].stop - sl[0].start for sl in slices]
    ach_est = _median(heights)
    rulings = []
    for idx, sl in enumerate(slices, start=1):
        h = sl[0].stop - sl[0].start
        w = sl[1].stop - sl[1].start
        orientation = None
        if w >= 20 * h and w >= 10 * ach_est:
            orientation = "horizontal"
        elif h >= 20 * w and h >= 10 * ach_est:
            orientation = "vertical"
        if orientation is None:
            continue
        rows, cols = np.nonzero(labels == idx)
        rulings.append(
            Ruling(
                orientation=orientation,
                bbox=Rect(sl[1].start, sl[0].start, w, h),
                rows=rows,
                cols=cols,
            )
        )
    return rulings


def remove_rulings(mask: np.ndarray, rulings: list[Ruling]) -> np.ndarray:
    out = mask.copy()
    for r in rulings:
        out[r.rows, r.cols] = False
    return out


def horizontal_lines(rulings: list[Ruling]) -> list[HorizontalLine]:
    return [
        HorizontalLine(y=r.bbox.cy, x0=r.bbox.x, x1=r.bbox.right)
        for r in rulings
        if r.orientation == "horizontal"
    ]


def classify_text_nontext(mask: np.ndarray) -> list[ConnectedComponent]:
    """Label every foreground component text or nontext.

    Non-text when any of: much taller than the character height, a dense
    large bbox, or part of a large solid region after closing at twice the
    character height.  Everything else is text.
    """
    labels, n, slices = _component_slices(mask)
    if n == 0:
        return []
    comps = []
    for sl in slices:
        h = sl[0].stop - sl[0].start
        w = sl[1].stop - sl[1].start
        count = int(np.count_nonzero(labels[sl] == len(comps) + 1))
        comps.append(
            ConnectedComponent(
                bbox=Rect(sl[1].start, sl[0].start, w, h),
                pixel_count=count,
                label="unknown",
            )
        )
    ach = _median([c.bbox.h for c in comps])

    # Large solid regions after closing with a 2*ach square element.
    side = max(1, int(round(2 * ach)))
    closed = ndimage.binary_closing(
        mask, structure=np.ones((side, side), dtype=bool)
    )
    closed_labels, cn = ndimage.label(closed, structure=_STRUCT8)
    solid_region = np.zeros(cn + 1, dtype=bool)
    if cn:
        idx = np.arange(1, cn + 1)
        sizes = ndimage.sum_labels(np.ones_like(closed, dtype=np.int64),
                                   closed_labels, index=idx)
        # Original ink inside the closed region separates solid art (~1.0)
        # from text that merely closed up (~0.4).
        ink = ndimage.sum_labels(mask.astype(np.int64), closed_labels, index=idx)
        for ridx in idx:
            size = float(sizes[ridx - 1])
            if size > (6 * ach) ** 2 and float(ink[ridx - 1]) / size > 0.9:
                solid_region[ridx] = True

    for comp in comps:
        b = comp.bbox
        if b.h > 4 * ach:
            comp.label = NONTEXT
            continue
        if comp.pixel_count / b.area > 0.9 and b.area > (4 * ach) ** 2:
            comp.label = NONTEXT
            continue
        ry = int(b.y + b.h // 2)
        rx = int(b.x + b.w // 2)
        ridx = closed_labels[min(ry, closed.shape[0] - 1),
                             min(rx, closed.shape[1] - 1)]
        if ridx and solid_region[ridx]:
            comp.label = NONTEXT
        else:
            comp.label = TEXT
    return comps


def avg_char_height(components: list[ConnectedComponent]) -> float:
    """Median bbox height of text components."""
    heights = [c.bbox.h for c in components if c.label == TEXT]
    if not heights:
        raise NoTextError("no text content")
    return _median(heights)


def _linkable(a: ConnectedComponent, b: ConnectedComponent,
              gap_factor: float, height_ratio: float) -> bool:
    h1, h2 = a.bbox.h, b.bbox.h
    if max(h1, h2) / min(h1, h2) > height_ratio:
        return False
    limit = gap_factor * min(h1, h2)
    if v_overlap(a.bbox, b.bbox) > 0:
        gap = max(a.bbox.x, b.bbox.x) - min(a.bbox.right, b.bbox.right)
        return gap <= limit
    if h_overlap(a.bbox, b.bbox) > 0:
        gap = max(a.bbox.y, b.bbox.y) - min(a.bbox.bottom, b.bbox.bottom)
        return gap <= limit
    return False


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def arlsa_blocks(
    components: list[ConnectedComponent],
    gap_factor: float = ARLSA_GAP_FACTOR,
    height_ratio: float = ARLSA_HEIGHT_RATIO,
) -> list[Block]:
    """Link text components whose gaps scale with their heights, then emit
    each group as a minimum-bounding-rectangle block.

    Non-text components become standalone blocks unless fully inside a text
    group's rectangle, in which case majority pixel mass decides the kind
    (ties go to nontext).
    """
    if not components:
        return []
    uf = _UnionFind(len(components))
    text_idx = [i for i, c in enumerate(components) if c.label == TEXT]
    for ii, i in enumerate(text_idx):
        for j in text_idx[ii + 1 :]:
            if _linkable(components[i], components[j], gap_factor, height_ratio):
                uf.union(i, j)

    groups: dict[int, list[int]] = {}
    for i in text_idx:
        groups.setdefault(uf.find(i), []).append(i)

    def group_bbox(members):
        b = components[members[0]].bbox
        for m in members[1:]:
            b = b.union(components[m].bbox)
        return b

    # Absorb nontext components fully inside a text group's rectangle.
    nontext_idx = [i for i, c in enumerate(components) if c.label == NONTEXT]
    bboxes = {root: group_bbox(ms) for root, ms in groups.items()}
    standalone = []
    for i in nontext_idx:
        cb = components[i].bbox
        for root, gb in bboxes.items():
            if (gb.x <= cb.x and cb.right <= gb.right
                    and gb.y <= cb.y and cb.bottom <= gb.bottom):
                groups[root].append(i)
                break
        else:
            standalone.append(i)

    blocks = []
    next_id = 0
    for root in sorted(groups):
        members = groups[root]
        bbox = group_bbox(members)
        text_mass = sum(components[m].pixel_count for m in members
                        if components[m].label == TEXT)
        nontext_mass = sum(components[m].pixel_count for m in members
                           if components[m].label == NONTEXT)
        kind = TEXT if text_mass > nontext_mass else NONTEXT
        ach = _median([components[m].bbox.h for m in members
                       if components[m].label == TEXT])
        blocks.append(Block(block_id=next_id, bbox=bbox, kind=kind,
                            avg_char_height_block=ach))
        next_id += 1
    for i in standalone:
        blocks.append(Block(block_id=next_id, bbox=components[i].bbox,
                            kind=NONTEXT, avg_char_height_block=0.0))
        next_id += 1
    blocks.sort(key=lambda b: (b.bbox.y, b.bbox.x))
    return [Block(block_id=k, bbox=b.bbox, kind=b.kind,
                  avg_char_height_block=b.avg_char_height_block)
            for k, b in enumerate(blocks)]


@dataclass
class IngestResult:
    blocks: list[Block]
    lines: list[HorizontalLine]
    avg_char_height_doc: float
    page_dims: tuple[int, int]
    threshold: int


def ingest_page(
    img: np.ndarray,
    gap_factor: float = ARLSA_GAP_FACTOR,
    height_ratio: float = ARLSA_HEIGHT_RATIO,
) -> IngestResult:
    """Full raster pipeline: image in, typed raw blocks out."""
    h, w = img.shape
    binr = binarize_otsu(img)
    rulings = detect_rulings(binr.mask)
    clean = remove_rulings(binr.mask, rulings)
    comps = classify_text_nontext(clean)
    try:
        ach = avg_char_height(comps)
    except NoTextError:
        ach = _median([c.bbox.h for c in comps]) or 10.0
    blocks = arlsa_blocks(comps, gap_factor, height_ratio)
    return IngestResult(
        blocks=blocks,
        lines=horizontal_lines(rulings),
        avg_char_height_doc=ach,
        page_dims=(w, h),
        threshold=binr.threshold,
    )
