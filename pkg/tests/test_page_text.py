# tests/test_page_text.py
import fitz  # PyMuPDF
import pytest

import app.services.parse_utils as parse_utils
from app.core.errors import AdapterError, EmptyInventoryError, PreconditionError
from app.models.geometry import AffineTransform, Rect
from app.models.page import PageBox, SpanSource
from app.services.adapters import AdapterSet
from app.services.ocr import ocr_page
from app.services.parse_utils import has_text_layer, page_box, page_spans
from app.services.pipeline import RunContext, document_spans
from app.services.rendering import rasterize_page
from app.services.text_metrics import compute_text_metrics
from tests.conftest import PAGE_H, PAGE_W, entry_for, span, write_pdf


class FakeOcr:
    name = "ocr"

    def __init__(self, answer):
        self.answer = answer
        self.requests = []

    def request(self, payload):
        self.requests.append(payload)
        return self.answer

    def close(self):
        pass


@pytest.fixture
def two_pages(tmp_path):
    return entry_for(write_pdf(tmp_path / "p.pdf", [
        [("text", 72, 100, "Upper line", 12), ("text", 300, 100, "right", 12), ("text", 72, 200, "Lower line", 12)],
        [("line", 72, 300, 500, 300)],
    ]))


def test_page_spans_in_reading_order(two_pages):
    spans = page_spans(two_pages.path, 0)
    assert [s.text for s in spans] == ["Upper line", "right", "Lower line"]
    upper = spans[0]
    # y grows upwards: baseline at 100 pt from the top sits near PAGE_H - 100
    assert PAGE_H - 115 < upper.bbox.y0 < upper.bbox.y1 < PAGE_H - 80
    assert upper.font_size_pt == pytest.approx(12, abs=0.5)
    assert all(s.source == SpanSource.embedded for s in spans)


def test_text_layer_detection(two_pages):
    assert has_text_layer(two_pages.path, 0)
    assert not has_text_layer(two_pages.path, 1)
    assert page_spans(two_pages.path, 1) == []


def test_rasterize_page_size_and_transform(two_pages):
    raster = rasterize_page(two_pages, 0, dpi=150)
    assert raster.width_px == round(PAGE_W * 150 / 72)
    assert raster.height_px == round(PAGE_H * 150 / 72)
    assert raster.pixels.shape == (raster.height_px, raster.width_px)
    x, y = raster.to_pdf_transform.apply(0, raster.height_px)
    assert x == pytest.approx(0.0)
    assert y == pytest.approx(0.0, abs=0.5)
    # the rule on page 2 is dark pixels on a white page
    line_page = rasterize_page(two_pages, 1, dpi=144)
    assert line_page.pixels[595:606, 400].min() < 100
    assert line_page.pixels[200, 400] > 200


def test_rasterize_preconditions(two_pages):
    with pytest.raises(PreconditionError):
        rasterize_page(two_pages, 2)
    with pytest.raises(PreconditionError):
        rasterize_page(two_pages, 0, dpi=1200)


def test_ocr_without_adapter_flags_page(two_pages):
    raster = rasterize_page(two_pages, 1, dpi=72)
    issues = []
    assert ocr_page(raster, None, issues) == []
    assert issues[0].stage == "ocr"
    assert issues[0].page_index == 1


def test_ocr_boxes_map_to_pdf_points(two_pages):
    raster = rasterize_page(two_pages, 1, dpi=72)
    adapter = FakeOcr({"spans": [
        {"text": "  0.512 ", "x0": 72, "y0": 72, "x1": 172, "y1": 92, "conf": 0.9},
        {"text": "   ", "x0": 0, "y0": 0, "x1": 5, "y1": 5},
    ]})
    spans = ocr_page(raster, adapter)
    assert len(spans) == 1
    assert spans[0].text == "0.512"
    assert spans[0].source == SpanSource.ocr
    assert spans[0].bbox.x0 == pytest.approx(72)
    assert spans[0].bbox.y0 == pytest.approx(raster.page_height_pt - 92)
    assert spans[0].font_size_pt == pytest.approx(20)
    assert adapter.requests[0]["op"] == "ocr"


def test_ocr_adapter_error_propagates(two_pages):
    raster = rasterize_page(two_pages, 1, dpi=72)
    with pytest.raises(AdapterError):
        ocr_page(raster, FakeOcr({"error": "engine crashed"}))


def test_text_metrics():
    spans = [
        span("0.5120", 0, 0, 30, 10),
        span("Sample", 0, 20, 30, 32),
        span("GR-1", 0, 40, 20, 50),
    ]
    metrics = compute_text_metrics(spans, spacing_multiplier=2.0)
    assert metrics.avg_char_width_pt == pytest.approx(80 / 16)
    assert metrics.median_line_height_pt == pytest.approx(10)
    assert metrics.est_spacing_pt == pytest.approx(10)


def test_text_metrics_empty_inventory():
    with pytest.raises(EmptyInventoryError):
        compute_text_metrics([])
    with pytest.raises(EmptyInventoryError):
        compute_text_metrics([span("x", 1, 1, 1, 1)])


def test_rect_transform_round_trip():
    raster_to_pdf = Rect(x0=10, y0=20, x1=110, y1=60)
    t = AffineTransform.pixel_to_pdf(300, 792)
    back = t.inverse().apply_rect(t.apply_rect(raster_to_pdf))
    assert back.as_tuple() == pytest.approx(raster_to_pdf.as_tuple())


def test_document_spans_lays_out_each_page_once(two_pages, settings_for, monkeypatch):
    real = parse_utils.extract_pages
    calls = []

    def counting(path, page_numbers=None, **kwargs):
        calls.append(tuple(page_numbers))
        return real(path, page_numbers=page_numbers, **kwargs)

    monkeypatch.setattr(parse_utils, "extract_pages", counting)
    cfg = settings_for()
    issues = []
    with AdapterSet(cfg) as adapters:
        spans = document_spans(two_pages, RunContext(cfg=cfg, adapters=adapters), issues)
    assert [s.text for s in spans[0]] == ["Upper line", "right", "Lower line"]
    assert spans[1] == []
    assert calls == [(0,), (1,)]


@pytest.mark.parametrize("rotation,expected", [
    (0, (50, 60, 500, 700)),
    (90, (60, 112, 700, 562)),
    (180, (112, 92, 562, 732)),
    (270, (92, 50, 732, 500)),
])
def test_visible_area_in_text_frame(rotation, expected):
    box = PageBox(mediabox=Rect(x0=0, y0=0, x1=612, y1=792), cropbox=Rect(x0=50, y0=60, x1=500, y1=700),
                  rotation=rotation)
    assert box.visible_area().as_tuple() == pytest.approx(expected)


def test_visible_area_with_shifted_mediabox():
    box = PageBox(mediabox=Rect(x0=10, y0=20, x1=622, y1=812), cropbox=Rect(x0=0, y0=0, x1=900, y1=900))
    assert box.visible_area().as_tuple() == pytest.approx((0, 0, 612, 792))
    with pytest.raises(ValueError):
        PageBox(mediabox=box.mediabox, cropbox=box.cropbox, rotation=45)


def test_cropped_page_spans_land_on_their_ink(tmp_path):
    path = tmp_path / "cropped.pdf"
    doc = fitz.open()
    page = doc.new_page(width=PAGE_W, height=PAGE_H)
    page.insert_text((100, 300), "Cropped marker", fontsize=14)
    page.set_cropbox(fitz.Rect(50, 50, PAGE_W - 50, PAGE_H - 50))
    doc.save(str(path))
    doc.close()
    entry = entry_for(path)

    assert page_box(path, 0).visible_area().as_tuple() == pytest.approx((50, 50, PAGE_W - 50, PAGE_H - 50))
    raster = rasterize_page(entry, 0, dpi=144)
    assert raster.width_px == (PAGE_W - 100) * 2
    assert raster.to_pdf_transform.apply(0, raster.height_px) == pytest.approx((50, 50))

    spans = page_spans(path, 0)
    assert [s.text for s in spans] == ["Cropped marker"]
    box = raster.to_pixel_transform().apply_rect(spans[0].bbox).clip(raster.bounds)
    ink = raster.pixels[int(box.y0):int(box.y1) + 1, int(box.x0):int(box.x1) + 1]
    assert ink.size and ink.min() < 128
