# app/models/geometry.py
import math
from typing import Iterable, Tuple

from pydantic import BaseModel, ConfigDict, model_validator


class Rect(BaseModel):
    """Axis-aligned rectangle; (x0, y0) is the minimum corner."""

    model_config = ConfigDict(frozen=True)

    x0: float
    y0: float
    x1: float
    y1: float

    @model_validator(mode="after")
    def _ordered(self) -> "Rect":
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"rectangle corners out of order: {self.as_tuple()}")
        return self

    @classmethod
    def from_corners(cls, ax: float, ay: float, bx: float, by: float) -> "Rect":
        return cls(x0=min(ax, bx), y0=min(ay, by), x1=max(ax, bx), y1=max(ay, by))

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def intersection_area(self, other: "Rect") -> float:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        if w <= 0 or h <= 0:
            return 0.0
        return w * h

    def iou(self, other: "Rect") -> float:
        inter = self.intersection_area(other)
        if inter == 0.0:
            return 0.0
        return inter / (self.area + other.area - inter)

    def hull(self, other: "Rect") -> "Rect":
        return Rect(
            x0=min(self.x0, other.x0),
            y0=min(self.y0, other.y0),
            x1=max(self.x1, other.x1),
            y1=max(self.y1, other.y1),
        )

    def expand(self, d: float) -> "Rect":
        return Rect(x0=self.x0 - d, y0=self.y0 - d, x1=self.x1 + d, y1=self.y1 + d)

    def clip(self, bounds: "Rect") -> "Rect":
        x0 = min(max(self.x0, bounds.x0), bounds.x1)
        y0 = min(max(self.y0, bounds.y0), bounds.y1)
        x1 = min(max(self.x1, bounds.x0), bounds.x1)
        y1 = min(max(self.y1, bounds.y0), bounds.y1)
        return Rect(x0=x0, y0=y0, x1=x1, y1=y1)

    def contains(self, other: "Rect", tol: float = 0.0) -> bool:
        return (
            other.x0 >= self.x0 - tol
            and other.y0 >= self.y0 - tol
            and other.x1 <= self.x1 + tol
            and other.y1 <= self.y1 + tol
        )

    def gap(self, other: "Rect") -> float:
        """Euclidean distance between the two rectangles (0 when they touch)."""
        dx = max(other.x0 - self.x1, self.x0 - other.x1, 0.0)
        dy = max(other.y0 - self.y1, self.y0 - other.y1, 0.0)
        return math.hypot(dx, dy)

    def translate(self, dx: float, dy: float) -> "Rect":
        return Rect(x0=self.x0 + dx, y0=self.y0 + dy, x1=self.x1 + dx, y1=self.y1 + dy)


def hull_of(rects: Iterable[Rect]) -> Rect:
    it = iter(rects)
    try:
        out = next(it)
    except StopIteration:
        raise ValueError("hull of an empty collection") from None
    for r in it:
        out = out.hull(r)
    return out


class AffineTransform(BaseModel):
    """
    x' = a*x + b*y + c
    y' = d*x + e*y + f
    """

    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    @model_validator(mode="after")
    def _invertible(self) -> "AffineTransform":
        if abs(self.determinant) < 1e-12:
            raise ValueError("affine transform is not invertible")
        return self

    @property
    def determinant(self) -> float:
        return self.a * self.e - self.b * self.d

    @classmethod
    def pixel_to_pdf(cls, dpi: float, page_height_pt: float, x_offset_pt: float = 0.0,
                     y_offset_pt: float = 0.0) -> "AffineTransform":
        """
        Raster rows grow downwards, PDF user space grows upwards. The offsets
        place the raster's lower-left corner in the text-layer frame (a crop
        box that does not start at the media box origin).
        """
        s = 72.0 / float(dpi)
        return cls(a=s, b=0.0, c=x_offset_pt, d=0.0, e=-s, f=y_offset_pt + page_height_pt)

    def apply(self, x: float, y: float) -> Tuple[float, float]:
        return (self.a * x + self.b * y + self.c, self.d * x + self.e * y + self.f)

    def inverse(self) -> "AffineTransform":
        det = self.determinant
        a, b, d, e = self.e / det, -self.b / det, -self.d / det, self.a / det
        return AffineTransform(
            a=a, b=b, c=-(a * self.c + b * self.f),
            d=d, e=e, f=-(d * self.c + e * self.f),
        )

    def apply_rect(self, r: Rect) -> Rect:
        ax, ay = self.apply(r.x0, r.y0)
        bx, by = self.apply(r.x1, r.y1)
        return Rect.from_corners(ax, ay, bx, by)
