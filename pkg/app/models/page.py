# app/models/page.py
from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.geometry import AffineTransform, Rect


class SpanSource(str, Enum):
    embedded = "embedded"
    ocr = "ocr"


class PageBox(BaseModel):
    """Media box and crop box in PDF user space plus the page /Rotate."""

    model_config = ConfigDict(frozen=True)

    mediabox: Rect
    cropbox: Rect
    rotation: int = 0

    @field_validator("rotation")
    @classmethod
    def _quarter_turn(cls, v: int) -> int:
        v %= 360
        if v not in (0, 90, 180, 270):
            raise ValueError(f"page rotation must be a multiple of 90, got {v}")
        return v

    def to_frame(self, x: float, y: float) -> Tuple[float, float]:
        """User space -> text-layer frame (media box origin, rotation applied, y up)."""
        m = self.mediabox
        if self.rotation == 90:
            return y - m.y0, m.x1 - x
        if self.rotation == 180:
            return m.x1 - x, m.y1 - y
        if self.rotation == 270:
            return m.y1 - y, x - m.x0
        return x - m.x0, y - m.y0

    def visible_area(self) -> Rect:
        """The displayed crop box in the text-layer frame; renderers rasterize exactly this area."""
        crop = self.cropbox.clip(self.mediabox)
        ax, ay = self.to_frame(crop.x0, crop.y0)
        bx, by = self.to_frame(crop.x1, crop.y1)
        return Rect.from_corners(ax, ay, bx, by)


class PageRaster(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    doc_id: str
    page_index: int = Field(ge=0)
    width_px: int = Field(gt=0)
    height_px: int = Field(gt=0)
    dpi: int
    page_width_pt: float
    page_height_pt: float
    pixels: np.ndarray
    to_pdf_transform: AffineTransform

    @field_validator("pixels")
    @classmethod
    def _gray8(cls, v: np.ndarray) -> np.ndarray:
        if v.ndim != 2 or v.dtype != np.uint8:
            raise ValueError("pixels must be a 2-D uint8 grayscale buffer")
        return v

    @model_validator(mode="after")
    def _shape_matches(self) -> "PageRaster":
        if self.pixels.shape != (self.height_px, self.width_px):
            raise ValueError("pixel buffer shape does not match width_px/height_px")
        return self

    @property
    def bounds(self) -> Rect:
        return Rect(x0=0, y0=0, x1=self.width_px, y1=self.height_px)

    @property
    def px_per_pt(self) -> float:
        return self.dpi / 72.0

    def to_pixel_transform(self) -> AffineTransform:
        return self.to_pdf_transform.inverse()


class TextSpan(BaseModel):
    """Positioned text fragment; bbox in PDF user-space points (y grows upwards)."""

    text: str = Field(min_length=1)
    bbox: Rect
    font_size_pt: float = 0.0
    source: SpanSource = SpanSource.embedded
    confidence: float = 1.0

    @field_validator("text")
    @classmethod
    def _non_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("span text is blank")
        return v


class TextMetrics(BaseModel):
    avg_char_width_pt: float = Field(gt=0)
    median_line_height_pt: float = Field(gt=0)
    est_spacing_pt: float = Field(gt=0)
    spacing_multiplier: float = 1.5
