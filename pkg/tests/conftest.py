# tests/conftest.py
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Set, Tuple

import cv2
import fitz  # PyMuPDF
import numpy as np
import pytest

from app.core.config import Settings
from app.models.corpus import ArticleMetadata, DocumentEntry, QueryCriteria
from app.models.dataset import DatasetRow
from app.models.geometry import Rect
from app.models.page import TextSpan
from app.services.corpus import make_doc_id
from app.services.parse_utils import count_pages
from app.utils.hashing import sha256_file

FONT = cv2.FONT_HERSHEY_SIMPLEX
FONT_SCALE = 0.5


# ---------------------------------------------------------------------------
# synthetic raster tables
# ---------------------------------------------------------------------------

@dataclass
class SyntheticTable:
    gray: np.ndarray
    bordered: bool
    # inner separator positions (rule centres / cell boundaries)
    row_seps: List[float]
    col_seps: List[float]
    cells: Set[Tuple[int, int, int, int]]
    spans: List[Tuple[int, int, int]] = field(default_factory=list)


def _put_centered(img: np.ndarray, text: str, cx: int, cy: int) -> None:
    (tw, th), _ = cv2.getTextSize(text, FONT, FONT_SCALE, 1)
    cv2.putText(img, text, (cx - tw // 2, cy + th // 2), FONT, FONT_SCALE, 0, 1, cv2.LINE_8)


def render_table(n_rows: int, n_cols: int, bordered: bool, spans: Sequence[Tuple[int, int, int]] = (),
                 cell_w: int = 110, cell_h: int = 40, margin: int = 4) -> SyntheticTable:
    """
    White table image with black 2-px rules (when bordered) and one centred
    label per cell. `spans` are (row, first col, last col) horizontal merges.
    """
    width = 2 * margin + n_cols * cell_w + 2
    height = 2 * margin + n_rows * cell_h + 2
    img = np.full((height, width), 255, dtype=np.uint8)
    xs = [margin + k * cell_w for k in range(n_cols + 1)]
    ys = [margin + k * cell_h for k in range(n_rows + 1)]

    merged = {}
    for r, c0, c1 in spans:
        merged[(r, c0)] = c1

    if bordered:
        for y in ys:
            cv2.rectangle(img, (xs[0], y), (xs[-1] + 1, y + 1), 0, -1)
        for k, x in enumerate(xs):
            for r in range(n_rows):
                if any(sr == r and c0 < k <= c1 for sr, c0, c1 in spans):
                    continue
                cv2.rectangle(img, (x, ys[r]), (x + 1, ys[r + 1] + 1), 0, -1)

    cells = set()
    for r in range(n_rows):
        c = 0
        while c < n_cols:
            last = merged.get((r, c), c)
            cx = (xs[c] + xs[last + 1]) // 2 + 1
            cy = (ys[r] + ys[r + 1]) // 2 + 1
            label = f"GROUPHD{c}" if last > c else f"R{r}C{c}"
            _put_centered(img, label, cx, cy)
            cells.add((r, c, r, last))
            c = last + 1

    return SyntheticTable(
        gray=img,
        bordered=bordered,
        row_seps=[y + 0.5 for y in ys[1:-1]],
        col_seps=[x + 0.5 for x in xs[1:-1]],
        cells=cells,
        spans=list(spans),
    )


def random_tables(n: int, seed: int = 7) -> List[SyntheticTable]:
    """Half bordered, half borderless; about 20% carry a spanning header."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        n_rows, n_cols = rng.randint(2, 10), rng.randint(2, 8)
        spans = []
        if n_rows >= 3 and n_cols >= 3 and rng.random() < 0.2:
            c0 = rng.randint(0, n_cols - 2)
            spans.append((0, c0, c0 + 1))
        out.append(render_table(n_rows, n_cols, bordered=(i % 2 == 0), spans=spans))
    return out


@pytest.fixture
def synthetic_table():
    return render_table


# ---------------------------------------------------------------------------
# PDFs
# ---------------------------------------------------------------------------

PAGE_W, PAGE_H = 612, 792


def draw_ruled_table(page, x0: float, y0: float, cells: Sequence[Sequence[str]],
                     col_w: float = 100, row_h: float = 20, fontsize: float = 9) -> fitz.Rect:
    """Fully ruled table in page coordinates (y down); returns its frame."""
    n_rows, n_cols = len(cells), len(cells[0])
    x1, y1 = x0 + n_cols * col_w, y0 + n_rows * row_h
    for r in range(n_rows + 1):
        page.draw_line((x0, y0 + r * row_h), (x1, y0 + r * row_h), color=(0, 0, 0), width=1)
    for c in range(n_cols + 1):
        page.draw_line((x0 + c * col_w, y0), (x0 + c * col_w, y1), color=(0, 0, 0), width=1)
    for r, row in enumerate(cells):
        for c, text in enumerate(row):
            if text:
                page.insert_text((x0 + c * col_w + 6, y0 + r * row_h + 14), text, fontsize=fontsize, fontname="helv")
    return fitz.Rect(x0, y0, x1, y1)


def write_pdf(path: Path, pages: Sequence[Sequence[Tuple]]) -> Path:
    """
    Each page is a list of drawing commands:
    ("text", x, y, text, size) | ("line", x0, y0, x1, y1) | ("table", x, y, cells)
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = fitz.open()
    for commands in pages:
        page = doc.new_page(width=PAGE_W, height=PAGE_H)
        for cmd in commands:
            if cmd[0] == "text":
                _, x, y, text, size = cmd
                page.insert_text((x, y), text, fontsize=size, fontname="helv")
            elif cmd[0] == "line":
                _, ax, ay, bx, by = cmd
                page.draw_line((ax, ay), (bx, by), color=(0, 0, 0), width=1)
            elif cmd[0] == "table":
                _, x, y, cells = cmd
                draw_ruled_table(page, x, y, cells)
    doc.save(str(path))
    doc.close()
    return path


def article_page(title: str, abstract: str, doi: str = "", year: int = 2020) -> List[Tuple]:
    page = [
        ("text", 72, 90, title, 16),
        ("text", 72, 130, f"Journal of Test Petrology {year}", 9),
        ("text", 72, 160, "Abstract", 10),
        ("text", 72, 175, abstract, 9),
        ("text", 72, 200, "Keywords", 10),
    ]
    if doi:
        page.append(("text", 72, 740, f"doi:{doi}", 8))
    return page


SMND_CELLS = [
    ["Sample", "147Sm/144Nd", "143Nd/144Nd", "Age(Ma)"],
    ["GR-1", "0.1200", "0.512000", "400"],
    ["GR-2", "0.1100", "0.512100", "410"],
    ["GR-3", "0.1300", "0.512200", "420"],
]


def smnd_article(path: Path, title: str, abstract: str, doi: str, cells=SMND_CELLS) -> Path:
    return write_pdf(path, [
        article_page(title, abstract, doi),
        [("text", 72, 80, "Table 1 Sm-Nd isotope data", 10), ("table", 100, 100, cells)],
    ])


def write_sidecar(pdf_path: Path, **fields) -> Path:
    lines = []
    for key, value in fields.items():
        if key == "authors":
            lines += [f"author: {a}" for a in value]
        else:
            lines.append(f"{key}: {value}")
    path = pdf_path.with_name(pdf_path.stem + ".meta.kv")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def entry_for(path: Path, root: Optional[Path] = None) -> DocumentEntry:
    rel = path.relative_to(root) if root else Path(path.name)
    return DocumentEntry(doc_id=make_doc_id(rel), path=path, page_count=count_pages(path), sha256=sha256_file(path))


@pytest.fixture
def corpus(tmp_path):
    """
    Three Sm-Nd granite articles with sidecars, one seawater article that
    fails the lithology criterion, and one corrupt file.
    """
    root = tmp_path / "corpus"
    root.mkdir()
    docs = [
        ("a_granite.pdf", "Sm-Nd isotopic constraints on a granite suite", "10.1000/test.0001", "Smith, J."),
        ("b_pluton.pdf", "Nd isotope evidence for pluton emplacement", "10.1000/test.0002", "B. Jones"),
        ("c_rhyolite.pdf", "Sm-Nd systematics of rhyolite flows", "10.1000/test.0003", "Lee CK"),
    ]
    for name, title, doi, author in docs:
        pdf = smnd_article(root / name, title, "Granite samples were analysed for Sm-Nd isotopes.", doi)
        write_sidecar(pdf, title=title, doi=doi, year=2020, journal="Test Petrology", volume="12",
                      page="1-10", authors=[author])
    write_pdf(root / "d_seawater.pdf", [article_page("Sm-Nd systematics of seawater",
                                                     "Dissolved Nd in ocean water masses.")])
    (root / "e_corrupt.pdf").write_bytes(b"%PDF-1.4\nthis is not a pdf\n")
    return root


@pytest.fixture
def criteria() -> QueryCriteria:
    return QueryCriteria(
        isotope_terms={"sm nd", "epsilon nd", "143nd 144nd", "nd isotope", "tdm"},
        lithology_terms={"granite", "granitic", "pluton", "rhyolite", "felsic"},
        stop_words={"the", "of", "a", "on", "for"},
        abbreviation_map={"tdm": ["depleted", "mantle", "model", "age"]},
    )


@pytest.fixture
def settings_for(tmp_path):
    def make(**overrides) -> Settings:
        values = {"OUTPUT_DIR": tmp_path / "out", "MAX_WORKERS": 2}
        values.update(overrides)
        return Settings(**values)
    return make


# ---------------------------------------------------------------------------
# text spans and dataset rows
# ---------------------------------------------------------------------------

def span(text: str, x0: float, y0: float, x1: float, y1: float, size: float = 9.0) -> TextSpan:
    return TextSpan(text=text, bbox=Rect(x0=x0, y0=y0, x1=x1, y1=y1), font_size_pt=size)


def dataset_row(**values) -> DatasetRow:
    return DatasetRow(values={k: str(v) for k, v in values.items() if v is not None})


@pytest.fixture
def dataset_rows() -> List[DatasetRow]:
    """20 rows over two regions, each with the inputs a recalculation needs."""
    rng = random.Random(11)
    rows = []
    for i in range(20):
        region = "Altai" if i % 2 else "Tianshan"
        r147 = round(rng.uniform(0.09, 0.14), 4)
        r143 = round(rng.uniform(0.5120, 0.5126), 6)
        age = rng.randint(250, 500)
        rows.append(DatasetRow(values={
            "Sample": f"S{i:02d}",
            "Nation/Region/GeoTectonic unit/Groups": region,
            "Longitude": str(85.0 + i * 0.1),
            "Latitude": str(45.0 + i * 0.05),
            "Age (Ma)": str(age),
            "147Sm/144Nd": str(r147),
            "143Nd/144Nd": str(r143),
            "DOI": f"10.1000/test.{i // 5:04d}",
            "Ref. Author": "Smith",
        }))
    return rows


@pytest.fixture
def article() -> ArticleMetadata:
    return ArticleMetadata(
        title="Sm-Nd isotopic constraints on a granite suite",
        abstract="Granite samples from the Altai orogen.",
        authors=["Smith, J.", "Jones, B."],
        journal="Test Petrology",
        volume="12",
        page="1-10",
        doi="10.1000/test.0001",
        year=2020,
    )
