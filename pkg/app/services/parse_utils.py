# app/services/parse_utils.py
"""
Helpers to pull positioned text out of PDF pages.
- spans  -> pdfminer.six layout lines, bbox in PDF user space (points, y up)
- blocks -> text boxes as lists of line spans (metadata heuristics)
- count_pages / has_text_layer / page_box

pdfminer coordinates are relative to the page mediabox origin, with /Rotate
applied. A page layout is parsed once by page_layout; the layout_* helpers
work on that parsed page.
"""

import logging
from pathlib import Path
from typing import Iterator, List, Optional

from pdfminer.high_level import extract_pages
from pdfminer.layout import LAParams, LTChar, LTPage, LTTextBoxHorizontal, LTTextLineHorizontal
from pdfminer.pdfdocument import PDFDocument
from pdfminer.pdfpage import PDFPage
from pdfminer.pdfparser import PDFParser

from app.core.errors import PreconditionError
from app.models.geometry import Rect
from app.models.page import PageBox, SpanSource, TextSpan

logger = logging.getLogger(__name__)

# char_margin below the pdfminer default keeps table cells on one row apart
LAYOUT_PARAMS = LAParams(char_margin=1.0, line_margin=0.5, word_margin=0.1)


def count_pages(path: Path) -> int:
    """Number of pages; raises whatever pdfminer raises for unparseable files."""
    with open(path, "rb") as fh:
        parser = PDFParser(fh)
        doc = PDFDocument(parser)
        return sum(1 for _ in PDFPage.create_pages(doc))


def page_layout(path: Path, page_index: int) -> LTPage:
    if page_index < 0:
        raise PreconditionError(f"page index {page_index} is negative")
    for page in extract_pages(str(path), page_numbers=[page_index], laparams=LAYOUT_PARAMS):
        return page
    raise PreconditionError(f"{path} has no page {page_index}")


def _chars(obj) -> Iterator[LTChar]:
    if isinstance(obj, LTChar):
        yield obj
        return
    try:
        children = iter(obj)
    except TypeError:
        return
    for child in children:
        yield from _chars(child)


def _line_span(line: LTTextLineHorizontal) -> Optional[TextSpan]:
    text = " ".join(line.get_text().split())
    if not text:
        return None
    sizes = [c.size for c in line if isinstance(c, LTChar) and c.get_text().strip()]
    x0, y0, x1, y1 = line.bbox
    if x1 <= x0 or y1 <= y0:
        return None
    return TextSpan(
        text=text,
        bbox=Rect(x0=x0, y0=y0, x1=x1, y1=y1),
        font_size_pt=max(sizes) if sizes else 0.0,
        source=SpanSource.embedded,
    )


def _box(values) -> Rect:
    x0, y0, x1, y1 = (float(v) for v in values)
    return Rect.from_corners(x0, y0, x1, y1)


def page_box(path: Path, page_index: int) -> PageBox:
    """Media box, crop box and rotation of one page; no layout analysis."""
    if page_index < 0:
        raise PreconditionError(f"page index {page_index} is negative")
    with open(path, "rb") as fh:
        doc = PDFDocument(PDFParser(fh))
        for i, page in enumerate(PDFPage.create_pages(doc)):
            if i == page_index:
                mediabox = _box(page.mediabox)
                cropbox = _box(page.cropbox) if page.cropbox else mediabox
                return PageBox(mediabox=mediabox, cropbox=cropbox, rotation=page.rotate or 0)
    raise PreconditionError(f"{path} has no page {page_index}")


def layout_blocks(page: LTPage) -> List[List[TextSpan]]:
    """Text boxes top-to-bottom, each a list of its line spans."""
    blocks = []
    for element in page:
        if not isinstance(element, LTTextBoxHorizontal):
            continue
        lines = [s for s in (_line_span(ln) for ln in element if isinstance(ln, LTTextLineHorizontal)) if s]
        if lines:
            blocks.append(lines)
    blocks.sort(key=lambda b: (-round(b[0].bbox.y1, 1), b[0].bbox.x0))
    return blocks


def layout_spans(page: LTPage) -> List[TextSpan]:
    """Line-level spans, top-to-bottom then left-to-right."""
    spans = [s for block in layout_blocks(page) for s in block]
    spans.sort(key=lambda s: (-round(s.bbox.y1, 1), s.bbox.x0))
    return spans


def layout_has_text(page: LTPage) -> bool:
    return any(c.get_text().strip() for c in _chars(page))


def page_blocks(path: Path, page_index: int) -> List[List[TextSpan]]:
    return layout_blocks(page_layout(path, page_index))


def page_spans(path: Path, page_index: int) -> List[TextSpan]:
    return layout_spans(page_layout(path, page_index))


def page_text(path: Path, page_index: int) -> str:
    return "\n".join(s.text for s in page_spans(path, page_index))


def has_text_layer(path: Path, page_index: int) -> bool:
    return layout_has_text(page_layout(path, page_index))
