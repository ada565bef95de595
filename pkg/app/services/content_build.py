# app/services/content_build.py
"""
Cell geometry back in PDF space, cell text from the text layer, and table export.

Output layout under the run directory:
    tables/<doc_id>/<page>_<region>.csv   (or .tsv)
    tables/<doc_id>/<page>_<region>.merges   one "r0,c0,r1,c1" line per merged cell
    tables/index.tsv
"""

import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from app.models.geometry import AffineTransform, Rect
from app.models.page import SpanSource, TextSpan
from app.models.table import CellSpan, GridModel, TableDocument, TableRegion, TextAssignment

logger = logging.getLogger(__name__)

TABLE_FORMATS = {"csv": ",", "tsv": "\t"}
INDEX_COLUMNS = ["doc_id", "page", "region", "rows", "cols", "class", "file"]


def map_cell_to_pdf(cell: CellSpan, grid: GridModel, transform: AffineTransform,
                    origin: Tuple[float, float] = (0.0, 0.0)) -> Rect:
    """PDF-point rectangle of a cell; `origin` is the region's offset in the page raster."""
    px = grid.cell_rect_px(cell).translate(origin[0], origin[1])
    return transform.apply_rect(px)


def _reading_order(spans: Sequence[TextSpan]) -> str:
    if not spans:
        return ""
    half = 0.5 * float(np.median([s.bbox.height for s in spans]))
    lines: List[List[TextSpan]] = []
    # PDF y grows upwards: top line first
    for span in sorted(spans, key=lambda s: (-s.bbox.center[1], s.bbox.x0)):
        if lines and abs(lines[-1][0].bbox.center[1] - span.bbox.center[1]) <= half:
            lines[-1].append(span)
        else:
            lines.append([span])
    text = " ".join(" ".join(s.text for s in sorted(line, key=lambda s: s.bbox.x0)) for line in lines)
    return " ".join(text.split())


def assign_text(spans: Iterable[TextSpan], grid: GridModel, transform: AffineTransform,
                origin: Tuple[float, float] = (0.0, 0.0), est_spacing_pt: float = 0.0) -> TextAssignment:
    """
    Each span goes to the cell it overlaps most (ties: topmost, then leftmost).
    A span touching no cell goes to the nearest one within `est_spacing_pt`,
    otherwise it is dropped with a warning.
    """
    rects = [map_cell_to_pdf(c, grid, transform, origin) for c in grid.cells]
    buckets: List[List[TextSpan]] = [[] for _ in rects]
    dropped: List[TextSpan] = []
    for span in spans:
        best, best_area = None, 0.0
        for i, rect in enumerate(rects):
            area = span.bbox.intersection_area(rect)
            if area > best_area:
                best, best_area = i, area
        if best is None:
            gaps = [span.bbox.gap(r) for r in rects]
            nearest = int(np.argmin(gaps))
            if gaps[nearest] <= est_spacing_pt:
                best = nearest
            else:
                logger.warning("span %r lies outside every cell (gap %.1f pt); dropped", span.text, gaps[nearest])
                dropped.append(span)
                continue
        buckets[best].append(span)
    return TextAssignment(
        cell_text=[_reading_order(b) for b in buckets],
        counts=[len(b) for b in buckets],
        dropped=dropped,
    )


def spans_in_region(spans: Iterable[TextSpan], region_pt: Rect, margin_pt: float = 0.0) -> List[TextSpan]:
    """Spans whose centre falls inside the region (PDF points), widened by `margin_pt`."""
    area = region_pt.expand(margin_pt)
    out = []
    for span in spans:
        cx, cy = span.bbox.center
        if area.x0 <= cx <= area.x1 and area.y0 <= cy <= area.y1:
            out.append(span)
    return out


def build_table(
    region: TableRegion,
    grid: GridModel,
    spans: Iterable[TextSpan],
    transform: AffineTransform,
    region_index: int = 0,
    est_spacing_pt: float = 0.0,
) -> TableDocument:
    """TableDocument for a recognised region whose grid is in region-crop pixels."""
    origin = (region.bbox_px.x0, region.bbox_px.y0)
    spans = list(spans)
    assigned = assign_text(spans, grid, transform, origin, est_spacing_pt)
    source = SpanSource.ocr if spans and all(s.source == SpanSource.ocr for s in spans) else SpanSource.embedded
    return TableDocument(
        doc_id=region.doc_id,
        page_index=region.page_index,
        region_index=region_index,
        region=region,
        grid=grid,
        cell_text=assigned.cell_text,
        provenance=[map_cell_to_pdf(c, grid, transform, origin) for c in grid.cells],
        text_source=source,
    )


def _delimiter(fmt: str) -> str:
    try:
        return TABLE_FORMATS[fmt]
    except KeyError:
        raise ValueError(f"unsupported table format {fmt!r}; expected one of {sorted(TABLE_FORMATS)}") from None


def export_table(table: TableDocument, fmt: str = "csv", out_dir: Path = Path("out")) -> List[Path]:
    """Write `<out>/tables/<doc_id>/<page>_<region>.<fmt>` and its `.merges` sidecar."""
    delimiter = _delimiter(fmt)
    folder = Path(out_dir) / "tables" / table.doc_id
    folder.mkdir(parents=True, exist_ok=True)
    data_path = folder / f"{table.name}.{fmt}"
    merges_path = folder / f"{table.name}.merges"

    with open(data_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerows(table.matrix())
    merges = [",".join(str(v) for v in c.as_tuple()) for c in table.grid.merged_cells()]
    merges_path.write_text("".join(line + "\n" for line in merges), encoding="utf-8")
    return [data_path, merges_path]


def write_table_index(tables: Sequence[TableDocument], out_dir: Path, fmt: str = "csv") -> Path:
    folder = Path(out_dir) / "tables"
    folder.mkdir(parents=True, exist_ok=True)
    path = folder / "index.tsv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(INDEX_COLUMNS)
        for t in tables:
            writer.writerow([t.doc_id, t.page_index, t.region_index, t.grid.n_rows, t.grid.n_cols,
                             t.grid.table_class.value, f"{t.doc_id}/{t.name}.{fmt}"])
    return path


def read_table(path: Path) -> Tuple[List[List[str]], List[Tuple[int, int, int, int]]]:
    """Matrix and merge spans of an exported table."""
    path = Path(path)
    delimiter = "\t" if path.suffix == ".tsv" else ","
    with open(path, encoding="utf-8", newline="") as fh:
        matrix = [row for row in csv.reader(fh, delimiter=delimiter)]
    merges: List[Tuple[int, int, int, int]] = []
    merges_path = path.with_suffix(".merges")
    if merges_path.exists():
        for line in merges_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                r0, c0, r1, c1 = (int(v) for v in line.split(","))
                merges.append((r0, c0, r1, c1))
    return matrix, merges


def text_map_from_export(matrix: List[List[str]],
                         merges: Sequence[Tuple[int, int, int, int]]) -> Dict[Tuple[int, int, int, int], str]:
    """Rebuild the cell -> text map that TableDocument.text_map() gives for the exported table."""
    covered = set()
    out: Dict[Tuple[int, int, int, int], str] = {}
    for r0, c0, r1, c1 in merges:
        out[(r0, c0, r1, c1)] = matrix[r0][c0]
        covered.update((r, c) for r in range(r0, r1 + 1) for c in range(c0, c1 + 1))
    for r, row in enumerate(matrix):
        for c, text in enumerate(row):
            if (r, c) not in covered:
                out[(r, c, r, c)] = text
    return out
