# app/services/dataset.py
"""
Dataset assembly: records + article metadata -> schema rows, csv in and out,
dedupe/sort and the recalculated dataset.

Exports:
- integrate_metadata(records, meta, issues=None) -> List[DatasetRow]
- first_author_surname(authors) -> str
- format_number(value) -> str / format_rounded(value) for exported derived values
- dedupe_and_sort(rows) -> (rows, n_duplicates)
- recalc_row / recalc_dataset
- write_dataset(path, rows, columns) / read_dataset(path)
"""

import csv
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from app.core.config import Settings, settings
from app.core.errors import ConfigError
from app.models.corpus import ArticleMetadata, Issue
from app.models.dataset import DATASET_SCHEMA, RECALC_COLUMNS, DatasetRow, RegionExtent
from app.models.geochem import IsotopeConstants, SmNdRecord
from app.services.reports import recalculate_row, row_flags

logger = logging.getLogger(__name__)

INITIALS_RE = re.compile(r"(?:[A-Z]\.?[\s-]*)+")

RECALC_SCHEMA: List[str] = DATASET_SCHEMA + RECALC_COLUMNS


def format_number(value: Optional[float]) -> str:
    """Shortest round-trip repr with '.' decimals; integral values lose the '.0'."""
    if value is None:
        return ""
    value = float(value)
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


EXPORT_DECIMALS = 2


def format_rounded(value: Optional[float], ndigits: int = EXPORT_DECIMALS) -> str:
    """Export form of a derived value; the value itself stays at full precision."""
    return "" if value is None else format_number(round(value, ndigits))


def _flag(value: Optional[bool]) -> str:
    return "" if value is None else str(value).lower()


def first_author_surname(authors: Sequence[str]) -> str:
    """
    "A. Smith, B. Jones" -> "Smith"; "Smith, A." -> "Smith"; "Jones BC" -> "Jones".
    """
    if not authors:
        return ""
    parts = [p.strip() for p in authors[0].split(",") if p.strip()]
    if not parts:
        return ""
    if len(parts) >= 2 and INITIALS_RE.fullmatch(parts[1]):
        return parts[0]
    tokens = parts[0].split()
    while len(tokens) > 1 and INITIALS_RE.fullmatch(tokens[-1]):
        tokens.pop()
    return tokens[-1] if tokens else ""


def _bibliography(meta: ArticleMetadata) -> Dict[str, str]:
    return {
        "Ref. Author": first_author_surname(meta.authors),
        "Ref. Year": "" if meta.year is None else str(meta.year),
        "Ref. Journal": meta.journal,
        "Title": meta.title,
        "Volume": meta.volume,
        "Page": meta.page,
        "DOI": meta.doi,
    }


def record_to_row(rec: SmNdRecord, meta: Optional[ArticleMetadata] = None) -> DatasetRow:
    """Published values only; recalculated ones go to the Calc. columns."""
    m, o = rec.measurement, rec.original
    values = {
        "Sample": rec.sample_id,
        "Nation/Region/GeoTectonic unit/Groups": rec.geotectonic_unit or "",
        "Tectonic unit": rec.tectonic_unit or "",
        "Subtectonic unit/Sub groups": rec.subtectonic_unit or "",
        "Longitude": format_number(rec.longitude),
        "Latitude": format_number(rec.latitude),
        "Lithology": rec.lithology or "",
        "Pluton": rec.pluton or rec.formation or "",
        "Age (Ma)": format_number(m.age_ma),
        "Sm": format_number(m.sm_ppm),
        "Nd": format_number(m.nd_ppm),
        "147Sm/144Nd": format_number(m.r147),
        "143Nd/144Nd": format_number(m.r143),
        "2σ": format_number(m.two_sigma),
        "fSm/Nd": format_number(o.f_sm_nd),
        "εNd(t)": format_number(o.eps_nd_t),
        "TDM1": format_number(o.t_dm1_ma),
        "TDM2": format_number(o.t_dm2_ma),
    }
    values.update(_bibliography(meta or rec.source))
    return DatasetRow(values={k: v for k, v in values.items() if v != ""})


def integrate_metadata(records: Sequence[SmNdRecord], meta: ArticleMetadata,
                       issues: Optional[List[Issue]] = None, doc_id: Optional[str] = None) -> List[DatasetRow]:
    """One row per record of a single document, all sharing its bibliographic block."""
    if records and not meta.doi:
        logger.warning("%s: article has no DOI; DOI column left empty", doc_id or "document")
        if issues is not None:
            issues.append(Issue(stage="assembly", doc_id=doc_id, message="no DOI in article metadata"))
    return [record_to_row(rec, meta) for rec in records]


def dedupe_and_sort(rows: Sequence[DatasetRow]) -> Tuple[List[DatasetRow], int]:
    """First row per (Sample, DOI) kept; output ordered by (DOI, Sample)."""
    seen = set()
    kept: List[DatasetRow] = []
    for row in rows:
        if row.dedup_key in seen:
            continue
        seen.add(row.dedup_key)
        kept.append(row)
    kept.sort(key=lambda r: (r.get("DOI"), r.get("Sample")))
    return kept, len(rows) - len(kept)


def recalc_row(row: DatasetRow, constants: IsotopeConstants,
               extents: Optional[Dict[str, RegionExtent]] = None, cfg: Optional[Settings] = None) -> DatasetRow:
    derived = recalculate_row(row, constants)
    flags = row_flags(row, constants, extents, cfg or settings, derived)
    values = {c: row.get(c) for c in DATASET_SCHEMA if row.get(c)}
    values.update({
        "Calc. fSm/Nd": format_number(derived.f_sm_nd),
        "Calc. εNd(0)": format_rounded(derived.eps_nd_0),
        "Calc. εNd(t)": format_rounded(derived.eps_nd_t),
        "Calc. TDM1 (Ga)": format_rounded(derived.t_dm1_ga),
        "Calc. TDM2 (Ga)": format_rounded(derived.t_dm2_ga),
        "Recalc match": _flag(flags.recalc_match),
        "Spatial OK": _flag(flags.spatial_ok),
    })
    return DatasetRow(values={k: v for k, v in values.items() if v != ""})


def recalc_dataset(rows: Sequence[DatasetRow], constants: IsotopeConstants,
                   extents: Optional[Dict[str, RegionExtent]] = None,
                   cfg: Optional[Settings] = None) -> List[DatasetRow]:
    return [recalc_row(r, constants, extents, cfg) for r in rows]


def write_dataset(path: Path, rows: Sequence[DatasetRow], columns: Sequence[str] = DATASET_SCHEMA) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(columns))
        for row in rows:
            writer.writerow(row.as_list(list(columns)))
    logger.info("Wrote %d rows to %s", len(rows), path)
    return path


def read_dataset(path: Path) -> List[DatasetRow]:
    """
    Rows of a dataset csv. All 25 schema columns must be in the header;
    Calc. columns are kept and any other column is ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"dataset file not found: {path}")
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in DATASET_SCHEMA if c not in header]
        if missing:
            raise ConfigError(f"{path}: missing dataset columns {missing}")
        known = [c for c in header if c in DATASET_SCHEMA or c in RECALC_COLUMNS]
        rows = []
        for raw in reader:
            values = {c: (raw.get(c) or "").strip() for c in known}
            rows.append(DatasetRow(values={k: v for k, v in values.items() if v}))
    return rows
