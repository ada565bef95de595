# app/services/grid_recognize.py
"""
Table structure recognition for one detected region.

Bordered tables: ruling-line intersections are clustered into separators and
every edge between adjacent grid nodes is checked for line pixels; missing
edges merge the cells on either side.

Borderless tables: long rules are wiped, blank row runs give row separators,
vertically aligned blank column intervals give column separators, and text
crossing a column separator merges the cells it crosses.

Tables ruled on one axis only keep their rules on that axis and use the
whitespace procedure for the other.

Exports:
- classify_table, internal_segments
- bordered_structure
- borderless_preprocess, borderless_rows, borderless_cols
- merge_cells
- recognize_structure (the whole procedure for a grayscale crop)
- write_debug
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import cv2
import numpy as np

from app.core.config import Settings, settings
from app.core.errors import DegradeToBorderless, EmptyTableError
from app.models.geometry import Rect
from app.models.page import TextMetrics
from app.models.table import BinaryImage, CellSpan, GridModel, RulingLines, Segment, TableClass
from app.services.image_ops import binarize, extract_lines, ink_boxes, open_lines, text_mask

logger = logging.getLogger(__name__)

INTERSECT_TOL_PX = 2
PRUNE_RADIUS_PX = 3
CLUSTER_RADIUS_PX = 3
EDGE_SHRINK_PX = 3
EDGE_BAND_PX = 2
# ink closer than this to a rule belongs to the rule, not to a side
SIDE_MARGIN_PX = 3
DEFAULT_SPACING_PX = 10.0


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _runs(flags: np.ndarray) -> List[Tuple[int, int]]:
    """Inclusive (start, end) runs of True values."""
    padded = np.concatenate(([False], flags.astype(bool), [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(s), int(e) - 1) for s, e in zip(edges[::2], edges[1::2])]


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _tile(labels: np.ndarray) -> List[CellSpan]:
    """
    Turn a label grid into rectangular cells: a label whose bounding box
    contains other labels absorbs them, until every label is a rectangle.
    """
    labels = labels.copy()
    changed = True
    while changed:
        changed = False
        for lab in np.unique(labels):
            rs, cs = np.nonzero(labels == lab)
            block = labels[rs.min():rs.max() + 1, cs.min():cs.max() + 1]
            others = np.unique(block[block != lab])
            if others.size:
                labels[np.isin(labels, others)] = lab
                changed = True
                break
    cells = []
    for lab in np.unique(labels):
        rs, cs = np.nonzero(labels == lab)
        cells.append(CellSpan(row_start=int(rs.min()), row_end=int(rs.max()),
                              col_start=int(cs.min()), col_end=int(cs.max())))
    return cells


def _labels_of(grid: GridModel) -> np.ndarray:
    labels = np.zeros((grid.n_rows, grid.n_cols), dtype=np.int64)
    for i, cell in enumerate(grid.cells):
        labels[cell.row_start:cell.row_end + 1, cell.col_start:cell.col_end + 1] = i
    return labels


def _cluster(values: Iterable[float], radius: int = CLUSTER_RADIUS_PX) -> List[int]:
    out: List[int] = []
    group: List[float] = []
    for v in sorted(values):
        if group and v - group[-1] > radius:
            out.append(int(round(sum(group) / len(group))))
            group = []
        group.append(v)
    if group:
        out.append(int(round(sum(group) / len(group))))
    return out


def _spacing_px(metrics: Optional[TextMetrics], px_per_pt: float) -> float:
    if metrics is None:
        return DEFAULT_SPACING_PX
    return metrics.est_spacing_pt * px_per_pt


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def _has_ink_on_both_sides(tmask: np.ndarray, seg: Segment, horizontal: bool) -> bool:
    lo = max(0, seg.pos - SIDE_MARGIN_PX)
    hi = seg.pos + SIDE_MARGIN_PX + 1
    if horizontal:
        span = tmask[:, seg.start:seg.end + 1]
        return bool(span[:lo].any() and span[hi:].any())
    span = tmask[seg.start:seg.end + 1, :]
    return bool(span[:, :lo].any() and span[:, hi:].any())


def internal_segments(lines: RulingLines, bin_img: BinaryImage,
                      cfg: Optional[Settings] = None) -> Tuple[List[Segment], List[Segment]]:
    """
    Horizontal and vertical rules with enough support that have text on both
    sides. Frame rules and caption underlines do not qualify.
    """
    cfg = cfg or settings
    tmask = text_mask(bin_img, lines)
    w, h = lines.width_px, lines.height_px
    horiz = [s for s in lines.horizontal
             if s.support >= cfg.BORDERED_SUPPORT_RATIO * w and _has_ink_on_both_sides(tmask, s, True)]
    vert = [s for s in lines.vertical
            if s.support >= cfg.BORDERED_SUPPORT_RATIO * h and _has_ink_on_both_sides(tmask, s, False)]
    return horiz, vert


def classify_table(lines: RulingLines, bin_img: BinaryImage, cfg: Optional[Settings] = None) -> TableClass:
    horiz, vert = internal_segments(lines, bin_img, cfg)
    return TableClass.bordered if horiz and vert else TableClass.borderless


# ---------------------------------------------------------------------------
# bordered
# ---------------------------------------------------------------------------

def _disc(radius: int) -> List[Tuple[int, int]]:
    return [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)
            if dx * dx + dy * dy <= radius * radius]


_DISC = _disc(PRUNE_RADIUS_PX)


def _supported(mask: Optional[np.ndarray], x: int, y: int) -> bool:
    if mask is None:
        return True
    h, w = mask.shape
    for dy, dx in _DISC:
        yy, xx = y + dy, x + dx
        if 0 <= yy < h and 0 <= xx < w and mask[yy, xx]:
            return True
    return False


def _with_borders(seps: List[int], dim: int, ink_before: bool, ink_after: bool) -> List[int]:
    """
    Outermost separators become the region bounds, unless text lies beyond
    them; then the bound is added as an extra separator.
    """
    inner = sorted(seps)
    if not ink_before:
        inner = inner[1:]
    if not ink_after:
        inner = inner[:-1]
    inner = [s for s in inner if 0 < s < dim]
    return [0] + inner + [dim]


def _edge_bounds(seps: List[int], clustered: List[int], ink_before: bool, ink_after: bool) -> List[int]:
    bounds = list(seps)
    if not ink_before:
        bounds[0] = clustered[0]
    if not ink_after:
        bounds[-1] = clustered[-1]
    return bounds


def _edge_present(mask: Optional[np.ndarray], pos: int, a: int, b: int, horizontal: bool,
                  ratio: float) -> bool:
    if mask is None:
        return True
    a, b = a + EDGE_SHRINK_PX, b - EDGE_SHRINK_PX
    if b <= a:
        return True
    lo, hi = max(0, pos - EDGE_BAND_PX), pos + EDGE_BAND_PX + 1
    strip = mask[lo:hi, a:b] if horizontal else mask[a:b, lo:hi].T
    if strip.size == 0:
        return False
    covered = np.count_nonzero(strip.any(axis=0))
    return covered >= ratio * (b - a)


def bordered_structure(lines: RulingLines, bin_img: Optional[BinaryImage] = None,
                       cfg: Optional[Settings] = None) -> GridModel:
    """
    Grid of a ruled table from its line segments. Raises DegradeToBorderless
    when the intersections do not yield an internal separator on each axis.
    """
    cfg = cfg or settings
    w, h = lines.width_px, lines.height_px
    tol = INTERSECT_TOL_PX

    points = []
    for hs in lines.horizontal:
        for vs in lines.vertical:
            if vs.start - tol <= hs.pos <= vs.end + tol and hs.start - tol <= vs.pos <= hs.end + tol:
                if _supported(lines.h_mask, vs.pos, hs.pos) and _supported(lines.v_mask, vs.pos, hs.pos):
                    points.append((vs.pos, hs.pos))
    if not points:
        raise DegradeToBorderless("no supported ruling intersections")

    tmask = text_mask(bin_img, lines) if bin_img is not None else None
    row_c = _cluster(y for _, y in points)
    col_c = _cluster(x for x, _ in points)

    def beyond(axis_first: int, axis_last: int, along_rows: bool) -> Tuple[bool, bool]:
        if tmask is None:
            return False, False
        m = tmask if along_rows else tmask.T
        return (bool(m[:max(0, axis_first - SIDE_MARGIN_PX)].any()),
                bool(m[axis_last + SIDE_MARGIN_PX + 1:].any()))

    row_ink = beyond(row_c[0], row_c[-1], True)
    col_ink = beyond(col_c[0], col_c[-1], False)
    rows = _with_borders(row_c, h, *row_ink)
    cols = _with_borders(col_c, w, *col_ink)
    if len(rows) < 3 or len(cols) < 3:
        raise DegradeToBorderless(f"only {len(rows)} row and {len(cols)} column separators")

    # edges of the outer cells are measured between the ruled frame lines
    rb = _edge_bounds(rows, row_c, *row_ink)
    cb = _edge_bounds(cols, col_c, *col_ink)
    n_rows, n_cols = len(rows) - 1, len(cols) - 1
    uf = _UnionFind(n_rows * n_cols)
    ratio = cfg.EDGE_SUPPORT_RATIO
    for r in range(n_rows):
        for c in range(n_cols - 1):
            if not _edge_present(lines.v_mask, cols[c + 1], rb[r], rb[r + 1], False, ratio):
                uf.union(r * n_cols + c, r * n_cols + c + 1)
    for r in range(n_rows - 1):
        for c in range(n_cols):
            if not _edge_present(lines.h_mask, rows[r + 1], cb[c], cb[c + 1], True, ratio):
                uf.union(r * n_cols + c, (r + 1) * n_cols + c)

    labels = np.array([uf.find(i) for i in range(n_rows * n_cols)], dtype=np.int64).reshape(n_rows, n_cols)
    return GridModel(row_seps=rows, col_seps=cols, cells=_tile(labels), table_class=TableClass.bordered)


# ---------------------------------------------------------------------------
# borderless
# ---------------------------------------------------------------------------

def borderless_preprocess(bin_img: BinaryImage, metrics: Optional[TextMetrics] = None,
                          cfg: Optional[Settings] = None) -> BinaryImage:
    """Wipe horizontal and vertical runs longer than LONG_RULE_RATIO of the region side."""
    cfg = cfg or settings
    w, h = bin_img.width_px, bin_img.height_px
    char_px = 4 * metrics.avg_char_width_pt * bin_img.px_per_pt if metrics is not None else 0.0
    h_len = int(max(cfg.LONG_RULE_RATIO * w, char_px))
    v_len = int(max(cfg.LONG_RULE_RATIO * h, char_px))
    rules = (open_lines(bin_img.bits, h_len, True) > 0) | (open_lines(bin_img.bits, v_len, False) > 0)
    clean = np.where(bin_img.foreground & ~rules, 255, 0).astype(np.uint8)
    return bin_img.with_bits(clean)


def borderless_rows(bin_img: BinaryImage, cfg: Optional[Settings] = None) -> List[int]:
    cfg = cfg or settings
    inked = bin_img.foreground.any(axis=1)
    rows = np.flatnonzero(inked)
    if rows.size == 0:
        raise EmptyTableError("empty table")
    first, last = int(rows[0]), int(rows[-1])
    seps = [0]
    for start, end in _runs(~inked[first:last + 1]):
        if end - start + 1 >= cfg.MIN_GAP_PX:
            seps.append(first + (start + end) // 2)
    seps.append(bin_img.height_px)
    return seps


def borderless_cols(bin_img: BinaryImage, row_seps: Sequence[int], metrics: Optional[TextMetrics] = None,
                    cfg: Optional[Settings] = None) -> List[int]:
    cfg = cfg or settings
    w = bin_img.width_px
    fg = bin_img.foreground
    spacing = _spacing_px(metrics, bin_img.px_per_pt)

    # (band, x0, x1, ink height) of every usable blank column interval
    intervals: List[Tuple[int, int, int, int]] = []
    band_heights = []
    for band, (top, bottom) in enumerate(zip(row_seps, row_seps[1:])):
        region = fg[top:bottom]
        ink_rows = np.flatnonzero(region.any(axis=1))
        if ink_rows.size == 0:
            continue
        ink_h = int(ink_rows[-1] - ink_rows[0] + 1)
        band_heights.append(ink_h)
        for start, end in _runs(~region.any(axis=0)):
            if start == 0 or end == w - 1 or end - start + 1 < spacing:
                continue
            intervals.append((band, start, end, ink_h))
    if not intervals:
        return [0, w]

    if metrics is not None:
        line_px = metrics.median_line_height_pt * bin_img.px_per_pt
    else:
        line_px = float(np.median(band_heights))
    bands = sorted({iv[0] for iv in intervals})
    next_band = dict(zip(bands, bands[1:]))

    uf = _UnionFind(len(intervals))
    for i, (b1, s1, e1, _) in enumerate(intervals):
        for j, (b2, s2, e2, _) in enumerate(intervals):
            if next_band.get(b1) == b2 and min(e1, e2) - max(s1, s2) + 1 >= 1:
                uf.union(i, j)
    areas: Dict[int, List[Tuple[int, int, int, int]]] = {}
    for i, iv in enumerate(intervals):
        areas.setdefault(uf.find(i), []).append(iv)
    min_height = cfg.SINGLE_LINE_FACTOR * line_px
    remaining = areas
    picked: List[int] = []
    while True:
        # an area no taller than one text line is a gap between words, not a column gap
        remaining = {k: ivs for k, ivs in remaining.items() if sum(iv[3] for iv in ivs) > min_height}
        if not remaining:
            break
        # blank height a vertical line at each x would cross
        score = np.zeros(w, dtype=np.float64)
        for ivs in remaining.values():
            for _, s, e, ink_h in ivs:
                score[s:e + 1] += ink_h
        plateaus = _runs(score == score.max())
        start, end = max(plateaus, key=lambda p: (p[1] - p[0], -p[0]))
        x = (start + end) // 2
        picked.append(x)
        # the intervals this separator crosses are traversed
        remaining = {k: [iv for iv in ivs if not iv[1] <= x <= iv[2]] for k, ivs in remaining.items()}

    seps: List[int] = []
    for x in sorted(picked):
        if not seps or x - seps[-1] > spacing:
            seps.append(x)
    return [0] + [x for x in seps if 0 < x < w] + [w]


def merge_cells(grid: GridModel, boxes_px: Iterable[Rect]) -> GridModel:
    """
    Remove every internal column separator piece that a text box (region
    pixels, grown by 1 px) crosses, merging the flanking cells. A box counts
    in the band holding most of it and in any other band it covers by more
    than half of the smaller of the two heights.
    """
    boxes = list(boxes_px)
    if not boxes or grid.n_cols < 2:
        return grid
    labels = _labels_of(grid)
    n_rows, n_cols = grid.n_rows, grid.n_cols
    uf = _UnionFind(len(grid.cells))
    touched = False
    for box in boxes:
        crossed = [k for k in range(1, n_cols) if box.x0 - 1 <= grid.col_seps[k] <= box.x1 + 1]
        if not crossed:
            continue
        overlaps = [min(box.y1 + 1, grid.row_seps[r + 1]) - max(box.y0 - 1, grid.row_seps[r]) for r in range(n_rows)]
        home = int(np.argmax(overlaps))
        for r, overlap in enumerate(overlaps):
            band_h = grid.row_seps[r + 1] - grid.row_seps[r]
            if overlap <= 0 or (r != home and overlap <= 0.5 * min(box.height, band_h)):
                continue
            for k in crossed:
                uf.union(int(labels[r, k - 1]), int(labels[r, k]))
                touched = True
    if not touched:
        return grid
    merged = np.vectorize(uf.find)(labels)
    return GridModel(row_seps=grid.row_seps, col_seps=grid.col_seps, cells=_tile(merged),
                     table_class=grid.table_class)


# ---------------------------------------------------------------------------
# whole procedure
# ---------------------------------------------------------------------------

def _combine(ruled: Iterable[int], found: Sequence[int], dim: int, tol: float) -> List[int]:
    """Ruled positions plus whitespace separators not within `tol` of a rule."""
    rules = sorted({int(p) for p in ruled if tol < p < dim - tol})
    extra = [s for s in found[1:-1] if all(abs(s - p) > tol for p in rules)]
    inner = sorted(set(rules) | set(extra))
    return [0] + inner + [dim]


def recognize_structure(
    gray: np.ndarray,
    boxes_px: Sequence[Rect] = (),
    metrics: Optional[TextMetrics] = None,
    origin: Tuple[int, int] = (0, 0),
    px_per_pt: float = 300.0 / 72.0,
    cfg: Optional[Settings] = None,
) -> GridModel:
    """
    Grid of a grayscale table crop. `boxes_px` are text boxes in crop pixels;
    without them, ink boxes of the cleaned mask serve as text evidence.
    """
    cfg = cfg or settings
    bin_img = binarize(gray, origin=origin, px_per_pt=px_per_pt, cfg=cfg)
    lines = extract_lines(bin_img, cfg)
    horiz, vert = internal_segments(lines, bin_img, cfg)

    if horiz and vert:
        try:
            return bordered_structure(lines, bin_img, cfg)
        except DegradeToBorderless as exc:
            logger.warning("bordered recognition degraded to borderless: %s", exc)

    spacing = _spacing_px(metrics, px_per_pt)
    clean = borderless_preprocess(bin_img, metrics, cfg)
    rows = borderless_rows(clean, cfg)
    if horiz and not vert:
        rows = _combine((s.pos for s in horiz), rows, bin_img.height_px, spacing)
    cols = borderless_cols(clean, rows, metrics, cfg)
    if vert and not horiz:
        cols = _combine((s.pos for s in vert), cols, bin_img.width_px, spacing)

    grid = GridModel.unit(rows, cols, TableClass.borderless)
    evidence = list(boxes_px) if boxes_px else ink_boxes(clean.bits, int(round(spacing)))
    return merge_cells(grid, evidence)


def write_debug(grid: GridModel, gray: np.ndarray, stem: Path) -> Tuple[Path, Path]:
    """`<stem>.grid` description and `<stem>.png` separator overlay."""
    stem.parent.mkdir(parents=True, exist_ok=True)
    grid_path = stem.with_suffix(".grid")
    lines = [
        f"class: {grid.table_class.value}",
        "rows: " + " ".join(str(v) for v in grid.row_seps),
        "cols: " + " ".join(str(v) for v in grid.col_seps),
    ]
    lines += ["cell: " + ",".join(str(v) for v in c.as_tuple()) for c in grid.cells]
    grid_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    overlay = cv2.cvtColor(gray, cv2.COLOR_GRAY2BGR)
    h, w = gray.shape[:2]
    for y in grid.row_seps:
        cv2.line(overlay, (0, min(y, h - 1)), (w - 1, min(y, h - 1)), (0, 0, 255), 1)
    for x in grid.col_seps:
        cv2.line(overlay, (min(x, w - 1), 0), (min(x, w - 1), h - 1), (255, 0, 0), 1)
    png_path = stem.with_suffix(".png")
    cv2.imwrite(str(png_path), overlay)
    return grid_path, png_path
