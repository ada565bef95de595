# app/services/smnd_tables.py
"""
Sm-Nd tables: header matching, table location, record building and
augmentation from sibling tables and article prose.

Exports:
- normalize_header(text) -> str
- load_header_dictionary(path) -> HeaderDictionary
- match_headers(header_row, dictionary, fuzzy=False) -> {field: column}
- find_header_row(table, dictionary, fuzzy) -> (row index, {field: column})
- locate_smnd_tables(tables, dictionary) -> [(table, {field: column})]
- parse_number(text), parse_coordinate(text)
- build_records(table, columns, ...) -> [SmNdRecord]
- augment_record(rec, siblings, meta, criteria) -> SmNdRecord
"""

import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError
from rapidfuzz import fuzz, process

from app.core.config import Settings, settings
from app.core.errors import ConfigError
from app.models.corpus import ArticleMetadata, Issue, QueryCriteria
from app.models.geochem import CANONICAL_FIELDS, HeaderDictionary, SmNdRecord
from app.models.page import SpanSource
from app.models.table import TableDocument
from app.services.text_normalize import DASHES, find_terms, normalize_text, transliterate
from app.utils.ini import read_ini

logger = logging.getLogger(__name__)

_HEADER_STRIP_RE = re.compile(r"[^a-z0-9]")
_NUMBER_RE = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?")
_PAREN_ERROR_RE = re.compile(r"\(\s*\d+\s*\)$")
_HEMISPHERE_RE = re.compile(r"^\s*([NSEW])(?=[\s\d])|([NSEW])\s*$", re.IGNORECASE)
_DMS_PART_RE = re.compile(r"\d+(?:[.,]\d+)?")
_PLUS_MINUS = ("±", "+/-", "+-")

Located = Tuple[TableDocument, Dict[str, int]]

# canonical field -> (record section, attribute); None = top-level
FIELD_PATHS: Dict[str, Tuple[Optional[str], str]] = {
    "geotectonic_unit": (None, "geotectonic_unit"),
    "tectonic_unit": (None, "tectonic_unit"),
    "subtectonic_unit": (None, "subtectonic_unit"),
    "longitude": (None, "longitude"),
    "latitude": (None, "latitude"),
    "lithology": (None, "lithology"),
    "pluton": (None, "pluton"),
    "formation": (None, "formation"),
    "sm": ("measurement", "sm_ppm"),
    "nd": ("measurement", "nd_ppm"),
    "r147": ("measurement", "r147"),
    "r143": ("measurement", "r143"),
    "two_sigma": ("measurement", "two_sigma"),
    "age": ("measurement", "age_ma"),
    "f_sm_nd": ("original", "f_sm_nd"),
    "eps_nd_0": ("original", "eps_nd_0"),
    "eps_nd_t": ("original", "eps_nd_t"),
    "t_dm1": ("original", "t_dm1_ma"),
    "t_dm2": ("original", "t_dm2_ma"),
}
TEXT_FIELDS = {"geotectonic_unit", "tectonic_unit", "subtectonic_unit", "lithology", "pluton", "formation"}
COORD_FIELDS = {"longitude": 180.0, "latitude": 90.0}
MODEL_AGE_FIELDS = {"t_dm1", "t_dm2"}


# ---------------------------------------------------------------------------
# headers
# ---------------------------------------------------------------------------

def normalize_header(text: str) -> str:
    """'¹⁴⁷Sm/¹⁴⁴Nd' -> '147sm144nd', 'εNd(t)' -> 'epsilonndt'."""
    return _HEADER_STRIP_RE.sub("", transliterate(text or "").lower())


def load_header_dictionary(path: Path) -> HeaderDictionary:
    parser = read_ini(Path(path))
    aliases: Dict[str, List[str]] = {}
    for section in parser.sections():
        if section not in CANONICAL_FIELDS:
            raise ConfigError(f"header dictionary {path}: unknown field [{section}]")
        names = [normalize_header(k) for k in parser.options(section)]
        aliases[section] = sorted({n for n in names if n})
    if "r147" not in aliases or "sample" not in aliases:
        raise ConfigError(f"header dictionary {path} must define [sample] and [r147]")
    try:
        return HeaderDictionary(aliases=aliases)
    except ValidationError as exc:
        raise ConfigError(f"header dictionary {path}: {exc}") from exc


def match_headers(header_row: Sequence[str], dictionary: HeaderDictionary, fuzzy: bool = False,
                  cutoff: Optional[float] = None) -> Dict[str, int]:
    """
    Column index per canonical field. Exact alias match after normalization;
    with `fuzzy` (OCR text), unmatched cells fall back to the closest alias
    scoring at least `cutoff`. The first column claiming a field keeps it.
    """
    lookup = dictionary.lookup()
    cutoff = settings.HEADER_FUZZY_CUTOFF if cutoff is None else cutoff
    columns: Dict[str, int] = {}
    for idx, cell in enumerate(header_row):
        key = normalize_header(cell)
        if not key:
            continue
        field = lookup.get(key)
        if field is None and fuzzy:
            hit = process.extractOne(key, list(lookup), scorer=fuzz.ratio, score_cutoff=cutoff)
            if hit is not None:
                field = lookup[hit[0]]
                logger.debug("header %r fuzzily matched alias %r (%.0f)", cell, hit[0], hit[1])
        if field is None:
            continue
        if field in columns:
            logger.warning("header %r repeats field %s (column %d kept)", cell, field, columns[field])
            continue
        columns[field] = idx
    return columns


def find_header_row(table: TableDocument, dictionary: HeaderDictionary,
                    cfg: Optional[Settings] = None) -> Tuple[Optional[int], Dict[str, int]]:
    """
    First non-empty row, unless it lacks 147Sm/144Nd and one of the next
    rows has it; header fields from the rows above that one are kept when
    their columns are still free.
    """
    cfg = cfg or settings
    fuzzy = table.text_source == SpanSource.ocr
    rows = table.matrix()
    first = next((i for i, row in enumerate(rows) if any(c.strip() for c in row)), None)
    if first is None:
        return None, {}

    def match(i: int) -> Dict[str, int]:
        return match_headers(rows[i], dictionary, fuzzy, cfg.HEADER_FUZZY_CUTOFF)

    columns = match(first)
    if "r147" in columns:
        return first, columns
    for i in range(first + 1, min(len(rows), first + cfg.HEADER_SCAN_ROWS)):
        found = match(i)
        if "r147" not in found:
            continue
        for j in range(first, i):
            for field, col in match(j).items():
                if field not in found and col not in found.values():
                    found[field] = col
        return i, found
    return first, columns


def locate_smnd_tables(tables: Sequence[TableDocument], dictionary: HeaderDictionary,
                       cfg: Optional[Settings] = None) -> List[Located]:
    """The tables whose header maps a 147Sm/144Nd column."""
    located = []
    for table in tables:
        _, columns = find_header_row(table, dictionary, cfg)
        if "r147" in columns:
            located.append((table, columns))
    return located


# ---------------------------------------------------------------------------
# cell values
# ---------------------------------------------------------------------------

def _split_plus_minus(text: str) -> Tuple[str, str]:
    for sep in _PLUS_MINUS:
        if sep in text:
            left, _, right = text.partition(sep)
            return left, right
    return text, ""


def parse_number(text: str) -> Optional[float]:
    """
    Accepts unicode minus signs, decimal commas, '0.512345 ± 12' (left part),
    '0.512345(12)' and trailing footnote marks. Anything else -> None.
    """
    if not text:
        return None
    s = "".join(DASHES.get(ch, ch) for ch in text)
    s, _ = _split_plus_minus(s)
    s = s.strip().rstrip("*†‡§").strip()
    s = _PAREN_ERROR_RE.sub("", s)
    s = s.replace(" ", "").replace("\u00a0", "")
    if "," in s:
        s = s.replace(",", "") if "." in s else s.replace(",", ".")
    if not _NUMBER_RE.fullmatch(s):
        return None
    return float(s)


def parse_coordinate(text: str) -> Optional[float]:
    """Decimal degrees from '102.5', '-33.2', '102°30′E' or '33 15 30 S'."""
    if not text or not text.strip():
        return None
    s = "".join(DASHES.get(ch, ch) for ch in text).strip()
    hemisphere = None
    m = _HEMISPHERE_RE.search(s)
    if m:
        hemisphere = (m.group(1) or m.group(2)).upper()
        s = (s[:m.start()] + s[m.end():]).strip()
    parts = [float(p.replace(",", ".")) for p in _DMS_PART_RE.findall(s)]
    # more than one number means degrees, minutes and seconds
    value = parse_number(s) if len(parts) == 1 else None
    if value is None:
        if not 1 <= len(parts) <= 3 or any(p >= 60 for p in parts[1:]):
            return None
        value = parts[0] + sum(p / 60.0 ** (k + 1) for k, p in enumerate(parts[1:]))
        if s.startswith("-"):
            value = -value
    if hemisphere in ("S", "W"):
        value = -abs(value)
    return value


def _model_age_ma(value: float, header: str) -> float:
    key = normalize_header(header)
    if key.endswith("ga"):
        return value * 1000.0
    if key.endswith("ma"):
        return value
    # unlabelled: values below 10 can only be Ga
    return value * 1000.0 if value < 10 else value


def _field_value(field: str, raw: str, header: str, cfg: Settings, where: str,
                 issues: Optional[List[Issue]], doc_id: str) -> Any:
    raw = " ".join(raw.split())
    if not raw:
        return None

    def reject(reason: str) -> None:
        logger.warning("%s: %s %r rejected: %s", where, field, raw, reason)
        if issues is not None:
            issues.append(Issue(stage="records", doc_id=doc_id, message=f"{where}: {field} {raw!r} {reason}"))

    if field in TEXT_FIELDS:
        return raw
    if field in COORD_FIELDS:
        value = parse_coordinate(raw)
        if value is not None and abs(value) > COORD_FIELDS[field]:
            reject("out of range")
            return None
        return value
    value = parse_number(raw)
    if value is None:
        return None
    if field == "r147" and not 0.0 < value < 1.0:
        reject("outside (0, 1)")
        return None
    if field == "r143" and not cfg.R143_MIN < value < cfg.R143_MAX:
        reject(f"outside ({cfg.R143_MIN}, {cfg.R143_MAX})")
        return None
    if field == "age" and not 0.0 <= value <= 4600.0:
        reject("outside [0, 4600] Ma")
        return None
    if field in ("sm", "nd") and value < 0:
        reject("negative concentration")
        return None
    if field in MODEL_AGE_FIELDS:
        return _model_age_ma(value, header)
    return value


def _get(rec: SmNdRecord, field: str) -> Any:
    section, attr = FIELD_PATHS[field]
    return getattr(getattr(rec, section) if section else rec, attr)


def _set(rec: SmNdRecord, field: str, value: Any) -> None:
    section, attr = FIELD_PATHS[field]
    setattr(getattr(rec, section) if section else rec, attr, value)


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

def build_records(
    table: TableDocument,
    columns: Dict[str, int],
    header_row: Optional[int] = None,
    dictionary: Optional[HeaderDictionary] = None,
    issues: Optional[List[Issue]] = None,
    cfg: Optional[Settings] = None,
) -> List[SmNdRecord]:
    """
    One record per data row below the header. Rows without a sample id are
    kept under a locator id when their 147Sm/144Nd parses, otherwise skipped.
    """
    cfg = cfg or settings
    rows = table.matrix(fill_down=True)
    if header_row is None:
        if dictionary is None:
            raise ValueError("build_records needs header_row or a dictionary to find it")
        header_row, _ = find_header_row(table, dictionary, cfg)
    if header_row is None:
        logger.warning("%s/%s: table is empty", table.doc_id, table.name)
        return []
    headers = rows[header_row]

    def cell(row: List[str], field: str) -> str:
        col = columns.get(field)
        return row[col] if col is not None and col < len(row) else ""

    header_r147 = normalize_header(cell(headers, "r147"))
    records: List[SmNdRecord] = []
    for i in range(header_row + 1, len(rows)):
        row = rows[i]
        if not any(c.strip() for c in row):
            continue
        if header_r147 and normalize_header(cell(row, "r147")) == header_r147:
            # header repeated after a page break or sub-heading
            continue
        locator = f"{table.doc_id}/{table.name}#{i}"
        sample = " ".join(cell(row, "sample").split())
        r147 = parse_number(cell(row, "r147"))
        if not sample:
            if r147 is None:
                continue
            logger.warning("%s: no sample id; using the row locator", locator)
            if issues is not None:
                issues.append(Issue(stage="records", doc_id=table.doc_id, message=f"{locator}: sample id missing"))
            sample = locator

        rec = SmNdRecord(sample_id=sample, locator=locator)
        for field in FIELD_PATHS:
            if field not in columns:
                continue
            value = _field_value(field, cell(row, field), cell(headers, field), cfg, locator, issues, table.doc_id)
            if value is not None:
                _set(rec, field, value)
        if rec.measurement.two_sigma is None and "two_sigma" not in columns:
            _, error = _split_plus_minus(cell(row, "r143"))
            rec.measurement.two_sigma = parse_number(error)
        records.append(rec)

    if not records:
        logger.warning("%s/%s: Sm-Nd table has no data rows", table.doc_id, table.name)
    return records


def _sibling_row(table: TableDocument, columns: Dict[str, int], sample_id: str) -> Optional[Tuple[int, List[str]]]:
    col = columns["sample"]
    for i, row in enumerate(table.matrix(fill_down=True)):
        if col < len(row) and " ".join(row[col].split()) == sample_id:
            return i, row
    return None


def _header_of(table: TableDocument, columns: Dict[str, int], before: int) -> List[str]:
    """Nearest row above `before` that names the sample column like a header does."""
    rows = table.matrix()
    col = columns["sample"]
    for i in range(before - 1, -1, -1):
        if col < len(rows[i]) and rows[i][col].strip() and normalize_header(rows[i][col]).startswith("sample"):
            return rows[i]
    return rows[0] if rows else []


def augment_record(
    rec: SmNdRecord,
    siblings: Sequence[Located],
    meta: Optional[ArticleMetadata] = None,
    criteria: Optional[QueryCriteria] = None,
    issues: Optional[List[Issue]] = None,
    cfg: Optional[Settings] = None,
) -> SmNdRecord:
    """
    Fill absent fields from sibling tables (rows whose sample cell equals the
    record's sample id); then lithology from title and abstract when exactly
    one lithology term occurs there. Coordinates only ever come from tables.
    """
    cfg = cfg or settings
    filled_from: Dict[str, str] = {}
    for table, columns in siblings:
        if "sample" not in columns:
            continue
        hit = _sibling_row(table, columns, rec.sample_id)
        if hit is None:
            continue
        index, row = hit
        headers = _header_of(table, columns, index)
        where = f"{table.doc_id}/{table.name}#{index}"
        for field, col in columns.items():
            if field not in FIELD_PATHS or col >= len(row):
                continue
            header = headers[col] if col < len(headers) else ""
            value = _field_value(field, row[col], header, cfg, where, issues, table.doc_id)
            if value is None:
                continue
            current = _get(rec, field)
            if current is None:
                _set(rec, field, value)
                filled_from[field] = where
            elif field in filled_from and current != value:
                logger.warning("%s: conflicting %s from %s (%r) and %s (%r); keeping the first",
                               rec.sample_id, field, filled_from[field], current, where, value)
                if issues is not None:
                    issues.append(Issue(stage="records", doc_id=table.doc_id,
                                        message=f"{rec.sample_id}: conflicting {field} in {where}"))

    if meta is not None:
        rec.source = meta
        if rec.lithology is None and criteria is not None:
            terms = set()
            for text in (meta.title, meta.abstract):
                terms |= find_terms(normalize_text(text, criteria), criteria.lithology_terms)
            if len(terms) == 1:
                rec.lithology = terms.pop()
    # values set above bypassed validation
    return SmNdRecord.model_validate(rec.model_dump())
