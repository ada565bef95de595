# app/services/table_detect.py
"""
Table region detection.

Exports:
- scan_embedded_table_tags(doc, page_texts=None) -> sorted page indices with
  /Table structure elements or a "Table N" caption line
- tagged_table_boxes(doc) -> {page_index: [Rect in PDF points]} from /Table /BBox attributes
- detect_tables(raster, spans, ...) -> TableRegion list (heuristic or external adapter)
- merge_detections(regions) -> regions with pairwise IoU < 0.5, top-to-bottom
"""

import logging
import re
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from pdfminer.pdfdocument import PDFDocument
from pdfminer.pdfpage import PDFPage
from pdfminer.pdfparser import PDFParser
from pdfminer.pdftypes import PDFObjRef, resolve1
from pdfminer.psparser import PSLiteral

from app.core.config import Settings, settings
from app.core.errors import EmptyInventoryError
from app.models.corpus import DocumentEntry
from app.models.geometry import Rect, hull_of
from app.models.page import PageRaster, TextMetrics, TextSpan
from app.models.table import DetectionSource, TableRegion
from app.services.adapters import Adapter
from app.services.adapters.protocol import DetectResponse, detect_request, parse_response
from app.services.image_ops import binarize, line_segments, open_lines
from app.services.parse_utils import page_text
from app.services.rendering import write_png
from app.services.text_metrics import compute_text_metrics
from app.services.text_normalize import normalize_text

logger = logging.getLogger(__name__)

CAPTION_RE = re.compile(r"^table \w+")
PAD_PX = 5
MERGE_IOU = 0.5
MAX_EVIDENCE = 5
MAX_TREE_DEPTH = 64

# text-block candidates
MIN_BLOCK_LINES = 3
MIN_ALIGNED = 2
SHORT_SPAN_RATIO = 0.25
MAX_LINE_GAP_FACTOR = 3.0
# a text candidate this much inside a ruled candidate is the same table
ABSORB_RATIO = 0.8
# minimum non-rule ink pixels for a band between rules to count as text
BAND_INK_PX = 20


# ---------------------------------------------------------------------------
# structure tags
# ---------------------------------------------------------------------------

def _name(value) -> str:
    value = resolve1(value)
    if isinstance(value, PSLiteral):
        value = value.name
    if isinstance(value, bytes):
        value = value.decode("latin-1")
    return str(value) if value is not None else ""


def _bbox_attr(node: dict) -> Optional[Rect]:
    attrs = resolve1(node.get("A"))
    for attr in attrs if isinstance(attrs, list) else [attrs]:
        attr = resolve1(attr)
        if not isinstance(attr, dict):
            continue
        box = resolve1(attr.get("BBox"))
        if isinstance(box, list) and len(box) == 4:
            try:
                return Rect.from_corners(*(float(resolve1(v)) for v in box))
            except (TypeError, ValueError):
                return None
    return None


def _page_of(node, page_ids: Dict[int, int], seen: Set[int], depth: int = 0) -> Optional[int]:
    """Page of a structure element: its own /Pg, else the first /Pg among its descendants."""
    if depth > MAX_TREE_DEPTH:
        return None
    if isinstance(node, PDFObjRef):
        if node.objid in seen:
            return None
        seen.add(node.objid)
    node = resolve1(node)
    if isinstance(node, list):
        for kid in node:
            found = _page_of(kid, page_ids, seen, depth + 1)
            if found is not None:
                return found
        return None
    if not isinstance(node, dict):
        return None
    pg = node.get("Pg")
    if isinstance(pg, PDFObjRef) and pg.objid in page_ids:
        return page_ids[pg.objid]
    return _page_of(node.get("K"), page_ids, seen, depth + 1)


def _struct_tables(path: Path) -> List[Tuple[Optional[int], Optional[Rect]]]:
    with open(path, "rb") as fh:
        pdf = PDFDocument(PDFParser(fh))
        page_ids = {page.pageid: i for i, page in enumerate(PDFPage.create_pages(pdf))}
        root = resolve1(pdf.catalog.get("StructTreeRoot"))
        if not isinstance(root, dict):
            return []
        role_map = resolve1(root.get("RoleMap"))
        role_map = role_map if isinstance(role_map, dict) else {}

        found: List[Tuple[Optional[int], Optional[Rect]]] = []
        seen: Set[int] = set()
        stack = [(root.get("K"), None, 0)]
        while stack:
            node, inherited, depth = stack.pop()
            if depth > MAX_TREE_DEPTH:
                continue
            if isinstance(node, PDFObjRef):
                if node.objid in seen:
                    continue
                seen.add(node.objid)
            node = resolve1(node)
            if isinstance(node, list):
                stack.extend((kid, inherited, depth) for kid in reversed(node))
                continue
            if not isinstance(node, dict):
                continue
            page = inherited
            pg = node.get("Pg")
            if isinstance(pg, PDFObjRef) and pg.objid in page_ids:
                page = page_ids[pg.objid]
            role = _name(node.get("S"))
            role = _name(role_map.get(role, role)) if role in role_map else role
            if role == "Table":
                if page is None:
                    page = _page_of(node.get("K"), page_ids, set())
                found.append((page, _bbox_attr(node)))
                continue
            stack.append((node.get("K"), page, depth + 1))
        return found


def tagged_table_boxes(doc: DocumentEntry) -> Dict[int, List[Rect]]:
    """PDF-point boxes of tagged tables that carry a layout /BBox attribute."""
    boxes: Dict[int, List[Rect]] = {}
    try:
        tables = _struct_tables(doc.path)
    except Exception as exc:
        logger.warning("%s: structure tree unreadable: %s", doc.doc_id, exc)
        return boxes
    for page, box in tables:
        if page is not None and box is not None and box.area > 0:
            boxes.setdefault(page, []).append(box)
    return boxes


def has_caption(text: str) -> bool:
    return any(CAPTION_RE.match(" ".join(normalize_text(line))) for line in text.splitlines())


def scan_embedded_table_tags(doc: DocumentEntry, page_texts: Optional[Sequence[str]] = None) -> List[int]:
    """
    Pages with /Table structure elements, plus caption-hint pages.
    `page_texts` (one string per page) saves re-reading the text layer.
    """
    pages: Set[int] = set()
    try:
        pages.update(p for p, _ in _struct_tables(doc.path) if p is not None)
    except Exception as exc:
        logger.warning("%s: structure tree unreadable: %s", doc.doc_id, exc)

    for i in range(doc.page_count):
        if page_texts is not None:
            text = page_texts[i] if i < len(page_texts) else ""
        else:
            try:
                text = page_text(doc.path, i)
            except Exception as exc:
                logger.debug("%s p%d: no text for caption scan: %s", doc.doc_id, i, exc)
                continue
        if has_caption(text):
            pages.add(i)
    return sorted(pages)


# ---------------------------------------------------------------------------
# heuristic detector
# ---------------------------------------------------------------------------

def _confidence(evidence: int) -> float:
    return 0.5 + 0.1 * min(MAX_EVIDENCE, evidence)


def _ruled_candidates(raster: PageRaster, cfg: Settings) -> List[Tuple[Rect, int]]:
    """Clusters of >= 2 long horizontal rules with text between them."""
    mask = binarize(raster.pixels, px_per_pt=raster.px_per_pt, cfg=cfg).bits
    h, w = mask.shape
    min_len = max(1, int(cfg.LONG_RULE_RATIO * w))
    h_mask = open_lines(mask, min_len, horizontal=True)
    rules = line_segments(h_mask, True, min_len)
    if len(rules) < 2:
        return []
    text = mask.copy()
    text[h_mask > 0] = 0
    max_gap = cfg.MAX_RULE_GAP_RATIO * h

    clusters: List[List] = []
    for seg in rules:
        home = None
        for cluster in clusters:
            last = cluster[-1]
            overlap = min(last.end, seg.end) - max(last.start, seg.start) + 1
            if seg.pos - last.pos <= max_gap and overlap >= 0.5 * min(last.length, seg.length):
                home = cluster
                break
        if home is None:
            clusters.append([seg])
        else:
            home.append(seg)

    out: List[Tuple[Rect, int]] = []
    for cluster in clusters:
        if len(cluster) < 2:
            continue
        x0 = min(s.start for s in cluster)
        x1 = max(s.end for s in cluster) + 1
        bands_with_text = 0
        for top, bottom in zip(cluster, cluster[1:]):
            band = text[top.pos + 3:bottom.pos - 2, x0:x1]
            if band.size == 0:
                continue
            # vertical rules spanning the band are not text
            tall = max(1, int(0.8 * band.shape[0]))
            band = band.copy()
            band[open_lines(band, tall, horizontal=False) > 0] = 0
            if int(np.count_nonzero(band)) >= BAND_INK_PX:
                bands_with_text += 1
        if bands_with_text == 0:
            continue
        rect = Rect(x0=x0, y0=cluster[0].pos - 2, x1=x1, y1=cluster[-1].pos + 3)
        out.append((rect, len(cluster) + 1))
    return out


def _text_lines(boxes: List[Rect]) -> List[List[Rect]]:
    """Group pixel boxes into lines by vertical centre, top-down, each line left-to-right."""
    if not boxes:
        return []
    half = 0.5 * float(np.median([b.height for b in boxes]))
    lines: List[List[Rect]] = []
    for box in sorted(boxes, key=lambda b: (b.center[1], b.x0)):
        if lines and abs(box.center[1] - lines[-1][0].center[1]) <= half:
            lines[-1].append(box)
        else:
            lines.append([box])
    return [sorted(line, key=lambda b: b.x0) for line in lines]


def _aligned_count(line: List[Rect], prev: List[Rect], tol: float) -> int:
    count = 0
    for box in line:
        for other in prev:
            if (abs(box.x0 - other.x0) <= tol or abs(box.x1 - other.x1) <= tol
                    or abs(box.center[0] - other.center[0]) <= tol):
                count += 1
                break
    return count


def _text_candidates(raster: PageRaster, spans: Sequence[TextSpan], tol_px: float) -> List[Tuple[Rect, int]]:
    """Runs of >= 3 lines of short spans sharing >= 2 aligned column positions."""
    to_px = raster.to_pixel_transform()
    boxes = [to_px.apply_rect(s.bbox).clip(raster.bounds) for s in spans]
    boxes = [b for b in boxes if b.area > 0]
    lines = _text_lines(boxes)
    if len(lines) < MIN_BLOCK_LINES:
        return []
    max_gap = MAX_LINE_GAP_FACTOR * float(np.median([b.height for b in boxes]))
    short = SHORT_SPAN_RATIO * raster.width_px

    def tabular(line: List[Rect]) -> List[Rect]:
        cells = [b for b in line if b.width <= short]
        return cells if len(cells) >= 2 else []

    out: List[Tuple[Rect, int]] = []
    run: List[List[Rect]] = []

    def flush():
        if len(run) >= MIN_BLOCK_LINES:
            out.append((hull_of(b for line in run for b in line), len(run)))

    for line in lines:
        cells = tabular(line)
        if cells and run:
            prev = tabular(run[-1])
            gap = line[0].center[1] - run[-1][0].center[1]
            if gap <= max_gap and _aligned_count(cells, prev, tol_px) >= MIN_ALIGNED:
                run.append(line)
                continue
        flush()
        run = [line] if cells else []
    flush()
    return out


def _spacing_px(raster: PageRaster, spans: Sequence[TextSpan], metrics: Optional[TextMetrics]) -> float:
    if metrics is None:
        try:
            metrics = compute_text_metrics(spans)
        except EmptyInventoryError:
            return 0.0
    return metrics.est_spacing_pt * raster.px_per_pt


def _heuristic(raster: PageRaster, spans: Sequence[TextSpan], metrics: Optional[TextMetrics],
               cfg: Settings) -> List[TableRegion]:
    ruled = _ruled_candidates(raster, cfg)
    texty = _text_candidates(raster, spans, _spacing_px(raster, spans, metrics)) if spans else []
    texty = [
        (rect, ev) for rect, ev in texty
        if not any(rect.intersection_area(r) >= ABSORB_RATIO * rect.area for r, _ in ruled)
    ]
    regions = []
    for rect, evidence in ruled + texty:
        box = rect.expand(PAD_PX).clip(raster.bounds)
        regions.append(TableRegion(doc_id=raster.doc_id, page_index=raster.page_index, bbox_px=box,
                                   confidence=_confidence(evidence), source=DetectionSource.heuristic))
    return regions


def _external(raster: PageRaster, adapter: Adapter) -> List[TableRegion]:
    with tempfile.TemporaryDirectory(prefix="detect_") as tmp:
        image = write_png(raster, Path(tmp) / f"{raster.doc_id}_{raster.page_index}.png")
        resp = parse_response(DetectResponse, adapter.request(detect_request(str(image))), adapter.name)
    regions = []
    for box in resp.boxes:
        rect = Rect.from_corners(box.x0, box.y0, box.x1, box.y1).clip(raster.bounds)
        if rect.area <= 0:
            logger.debug("%s p%d: dropping zero-area detector box", raster.doc_id, raster.page_index)
            continue
        regions.append(TableRegion(doc_id=raster.doc_id, page_index=raster.page_index, bbox_px=rect,
                                   confidence=max(0.0, min(1.0, box.score)), source=DetectionSource.external))
    return regions


def _tagged(raster: PageRaster, boxes_pt: Iterable[Rect]) -> List[TableRegion]:
    to_px = raster.to_pixel_transform()
    regions = []
    for box in boxes_pt:
        rect = to_px.apply_rect(box).clip(raster.bounds)
        if rect.area > 0:
            regions.append(TableRegion(doc_id=raster.doc_id, page_index=raster.page_index, bbox_px=rect,
                                       confidence=1.0, source=DetectionSource.tag))
    return regions


def detect_tables(
    raster: PageRaster,
    spans: Sequence[TextSpan],
    metrics: Optional[TextMetrics] = None,
    adapter: Optional[Adapter] = None,
    tag_boxes_pt: Optional[Iterable[Rect]] = None,
    cfg: Optional[Settings] = None,
) -> List[TableRegion]:
    """
    Table regions of one page in raster pixels. The external adapter, when
    given, replaces the heuristic; tagged /BBox regions are added in both modes.
    """
    cfg = cfg or settings
    regions = _tagged(raster, tag_boxes_pt or [])
    if adapter is not None:
        regions += _external(raster, adapter)
    else:
        regions += _heuristic(raster, spans, metrics, cfg)
    min_area = cfg.MIN_TABLE_AREA_RATIO * raster.width_px * raster.height_px
    merged = [r for r in merge_detections(regions) if r.bbox_px.area >= min_area]
    logger.debug("%s p%d: %d table region(s)", raster.doc_id, raster.page_index, len(merged))
    return merged


def merge_detections(regions: Iterable[TableRegion]) -> List[TableRegion]:
    items = list(regions)
    changed = True
    while changed:
        changed = False
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                a, b = items[i], items[j]
                if a.bbox_px.iou(b.bbox_px) < MERGE_IOU:
                    continue
                keep = a if a.confidence >= b.confidence else b
                items[i] = keep.model_copy(update={
                    "bbox_px": a.bbox_px.hull(b.bbox_px),
                    "confidence": max(a.confidence, b.confidence),
                })
                del items[j]
                changed = True
                break
            if changed:
                break
    return sorted(items, key=lambda r: (r.bbox_px.y0, r.bbox_px.x0))
