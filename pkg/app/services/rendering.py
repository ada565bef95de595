# app/services/rendering.py
import logging
import tempfile
import threading
from pathlib import Path
from typing import Optional

import cv2
import fitz  # PyMuPDF
import numpy as np

from app.core.errors import AdapterError, PreconditionError, RenderError
from app.models.corpus import DocumentEntry
from app.models.geometry import AffineTransform
from app.models.page import PageRaster
from app.services.adapters import Adapter
from app.services.adapters.protocol import RenderResponse, parse_response, render_request
from app.services.parse_utils import page_box

logger = logging.getLogger(__name__)

MIN_DPI = 72
MAX_DPI = 600

# PyMuPDF is not thread-safe; every fitz call in the process goes through this lock
FITZ_LOCK = threading.Lock()


def _render_pymupdf(path: Path, page_index: int, dpi: int):
    with FITZ_LOCK, fitz.open(str(path)) as pdf:
        page = pdf[page_index]
        pix = page.get_pixmap(dpi=dpi, colorspace=fitz.csGRAY, alpha=False)
        buf = np.frombuffer(pix.samples, dtype=np.uint8).reshape(pix.height, pix.stride)
        pixels = buf[:, : pix.width].copy()
        return pixels, page.rect.width, page.rect.height


def _render_external(adapter: Adapter, path: Path, page_index: int, dpi: int):
    with tempfile.TemporaryDirectory(prefix="render_") as tmp:
        out = Path(tmp) / f"page_{page_index}.png"
        data = adapter.request(render_request(str(path), page_index, dpi, str(out)))
        resp = parse_response(RenderResponse, data, adapter.name)
        pixels = cv2.imread(resp.image, cv2.IMREAD_GRAYSCALE)
        if pixels is None:
            raise RenderError(f"renderer answered with unreadable image {resp.image}")
        return pixels, resp.width_pt, resp.height_pt


def rasterize_page(doc: DocumentEntry, page_index: int, dpi: int = 300,
                   renderer: Optional[Adapter] = None) -> PageRaster:
    if not 0 <= page_index < doc.page_count:
        raise PreconditionError(f"{doc.doc_id}: page {page_index} outside 0..{doc.page_count - 1}")
    if not MIN_DPI <= dpi <= MAX_DPI:
        raise PreconditionError(f"dpi {dpi} outside [{MIN_DPI}, {MAX_DPI}]")
    try:
        if renderer is None:
            pixels, width_pt, height_pt = _render_pymupdf(doc.path, page_index, dpi)
        else:
            pixels, width_pt, height_pt = _render_external(renderer, doc.path, page_index, dpi)
        visible = page_box(doc.path, page_index).visible_area()
    except (RenderError, AdapterError):
        raise
    except Exception as exc:
        raise RenderError(f"{doc.doc_id}: page {page_index} failed to render: {exc}") from exc

    height_px, width_px = pixels.shape[:2]
    return PageRaster(
        doc_id=doc.doc_id,
        page_index=page_index,
        width_px=width_px,
        height_px=height_px,
        dpi=dpi,
        page_width_pt=width_pt,
        page_height_pt=height_pt,
        pixels=np.ascontiguousarray(pixels, dtype=np.uint8),
        to_pdf_transform=AffineTransform.pixel_to_pdf(dpi, height_pt, visible.x0, visible.y0),
    )


def write_png(raster: PageRaster, path: Path) -> Path:
    if not cv2.imwrite(str(path), raster.pixels):
        raise RenderError(f"cannot write {path}")
    return path
