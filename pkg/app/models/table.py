# app/models/table.py
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.geometry import Rect
from app.models.page import SpanSource, TextSpan


class DetectionSource(str, Enum):
    tag = "tag"
    heuristic = "heuristic"
    external = "external"


class TableClass(str, Enum):
    bordered = "bordered"
    borderless = "borderless"


class TableRegion(BaseModel):
    doc_id: str
    page_index: int = Field(ge=0)
    bbox_px: Rect
    confidence: float = Field(ge=0.0, le=1.0)
    source: DetectionSource


class BinaryImage(BaseModel):
    """Ink mask of a region: 255 where text or rules are, 0 where blank."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    width_px: int = Field(gt=0)
    height_px: int = Field(gt=0)
    bits: np.ndarray
    origin: Tuple[int, int] = (0, 0)
    px_per_pt: float = 300.0 / 72.0

    @model_validator(mode="after")
    def _mask(self) -> "BinaryImage":
        if self.bits.shape != (self.height_px, self.width_px) or self.bits.dtype != np.uint8:
            raise ValueError("bits must be a uint8 mask of shape (height_px, width_px)")
        return self

    @property
    def foreground(self) -> np.ndarray:
        return self.bits > 0

    def with_bits(self, bits: np.ndarray) -> "BinaryImage":
        return self.model_copy(update={"bits": bits})


class Segment(BaseModel):
    """Axis-aligned ruling segment: `pos` is y (horizontal) or x (vertical)."""

    pos: int
    start: int
    end: int
    support: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


class RulingLines(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    width_px: int
    height_px: int
    horizontal: List[Segment] = Field(default_factory=list)
    vertical: List[Segment] = Field(default_factory=list)
    h_mask: Optional[np.ndarray] = None
    v_mask: Optional[np.ndarray] = None


class CellSpan(BaseModel):
    """Inclusive index rectangle of a (possibly merged) cell."""

    model_config = ConfigDict(frozen=True)

    row_start: int = Field(ge=0)
    row_end: int = Field(ge=0)
    col_start: int = Field(ge=0)
    col_end: int = Field(ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "CellSpan":
        if self.row_end < self.row_start or self.col_end < self.col_start:
            raise ValueError("cell span end precedes start")
        return self

    @property
    def is_merged(self) -> bool:
        return self.row_end > self.row_start or self.col_end > self.col_start

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.row_start, self.col_start, self.row_end, self.col_end)

    def covers(self, row: int, col: int) -> bool:
        return self.row_start <= row <= self.row_end and self.col_start <= col <= self.col_end


class GridModel(BaseModel):
    row_seps: List[int]
    col_seps: List[int]
    cells: List[CellSpan]
    table_class: TableClass

    @model_validator(mode="after")
    def _tiles(self) -> "GridModel":
        for name, seps in (("row_seps", self.row_seps), ("col_seps", self.col_seps)):
            if len(seps) < 2:
                raise ValueError(f"{name} needs at least two separators")
            if any(b <= a for a, b in zip(seps, seps[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        n_rows, n_cols = self.n_rows, self.n_cols
        owner = np.full((n_rows, n_cols), -1, dtype=np.int64)
        for i, c in enumerate(self.cells):
            if c.row_end >= n_rows or c.col_end >= n_cols:
                raise ValueError(f"cell {c.as_tuple()} outside a {n_rows}x{n_cols} grid")
            block = owner[c.row_start:c.row_end + 1, c.col_start:c.col_end + 1]
            if (block != -1).any():
                raise ValueError(f"cell {c.as_tuple()} overlaps another cell")
            block[...] = i
        if (owner == -1).any():
            raise ValueError("cells do not cover the grid")
        # canonical order: row-major by top-left slot
        self.cells = sorted(self.cells, key=lambda c: (c.row_start, c.col_start))
        return self

    @property
    def n_rows(self) -> int:
        return len(self.row_seps) - 1

    @property
    def n_cols(self) -> int:
        return len(self.col_seps) - 1

    @classmethod
    def unit(cls, row_seps: List[int], col_seps: List[int], table_class: TableClass) -> "GridModel":
        cells = [
            CellSpan(row_start=r, row_end=r, col_start=c, col_end=c)
            for r in range(len(row_seps) - 1)
            for c in range(len(col_seps) - 1)
        ]
        return cls(row_seps=list(row_seps), col_seps=list(col_seps), cells=cells, table_class=table_class)

    def cell_at(self, row: int, col: int) -> CellSpan:
        for c in self.cells:
            if c.covers(row, col):
                return c
        raise KeyError((row, col))

    def cell_rect_px(self, cell: CellSpan) -> Rect:
        return Rect(
            x0=self.col_seps[cell.col_start],
            y0=self.row_seps[cell.row_start],
            x1=self.col_seps[cell.col_end + 1],
            y1=self.row_seps[cell.row_end + 1],
        )

    def merged_cells(self) -> List[CellSpan]:
        return [c for c in self.cells if c.is_merged]


class TableDocument(BaseModel):
    doc_id: str
    page_index: int
    region_index: int = 0
    region: TableRegion
    grid: GridModel
    # aligned with grid.cells
    cell_text: List[str]
    provenance: List[Rect]
    text_source: SpanSource = SpanSource.embedded

    @model_validator(mode="after")
    def _aligned(self) -> "TableDocument":
        if len(self.cell_text) != len(self.grid.cells) or len(self.provenance) != len(self.grid.cells):
            raise ValueError("cell_text/provenance must have one entry per grid cell")
        return self

    @property
    def name(self) -> str:
        return f"{self.page_index}_{self.region_index}"

    def text_map(self) -> Dict[Tuple[int, int, int, int], str]:
        return {c.as_tuple(): t for c, t in zip(self.grid.cells, self.cell_text)}

    def text_of(self, cell: CellSpan) -> str:
        return self.cell_text[self.grid.cells.index(cell)]

    def matrix(self, fill_down: bool = False) -> List[List[str]]:
        """
        Row-major text slots. A merged cell's text sits in its top-left slot;
        with fill_down, vertically merged cells repeat their text on every row
        they cover (leftmost column only).
        """
        out = [["" for _ in range(self.grid.n_cols)] for _ in range(self.grid.n_rows)]
        for cell, text in zip(self.grid.cells, self.cell_text):
            last_row = cell.row_end if fill_down else cell.row_start
            for r in range(cell.row_start, last_row + 1):
                out[r][cell.col_start] = text
        return out


class TextAssignment(BaseModel):
    """Cell texts aligned with grid.cells, plus the spans no cell could take."""

    cell_text: List[str]
    counts: List[int]
    dropped: List[TextSpan] = Field(default_factory=list)
