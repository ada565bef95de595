# app/services/ocr.py
import logging
import tempfile
from pathlib import Path
from typing import List, Optional

from app.models.corpus import Issue
from app.models.geometry import Rect
from app.models.page import PageRaster, SpanSource, TextSpan
from app.services.adapters import Adapter
from app.services.adapters.protocol import OcrResponse, ocr_request, parse_response
from app.services.rendering import write_png

logger = logging.getLogger(__name__)


def ocr_page(raster: PageRaster, adapter: Optional[Adapter] = None,
             issues: Optional[List[Issue]] = None) -> List[TextSpan]:
    """
    Text spans for an image-only page, bboxes mapped to PDF points through the
    raster transform. Without an adapter the page is flagged text-unavailable
    and no spans are returned. Adapter failures propagate as AdapterError.
    """
    if adapter is None:
        logger.warning("%s p%d: no text layer and no OCR adapter configured", raster.doc_id, raster.page_index)
        if issues is not None:
            issues.append(Issue(stage="ocr", doc_id=raster.doc_id, page_index=raster.page_index,
                                message="text unavailable: no OCR adapter configured"))
        return []

    with tempfile.TemporaryDirectory(prefix="ocr_") as tmp:
        image = write_png(raster, Path(tmp) / f"{raster.doc_id}_{raster.page_index}.png")
        resp = parse_response(OcrResponse, adapter.request(ocr_request(str(image), raster.dpi)), adapter.name)

    spans: List[TextSpan] = []
    for box in resp.spans:
        if not box.text.strip():
            continue
        px = Rect.from_corners(box.x0, box.y0, box.x1, box.y1).clip(raster.bounds)
        if px.area <= 0:
            continue
        spans.append(TextSpan(
            text=" ".join(box.text.split()),
            bbox=raster.to_pdf_transform.apply_rect(px),
            font_size_pt=px.height / raster.px_per_pt,
            source=SpanSource.ocr,
            confidence=max(0.0, min(1.0, box.conf)),
        ))
    logger.debug("%s p%d: OCR returned %d spans", raster.doc_id, raster.page_index, len(spans))
    return spans
