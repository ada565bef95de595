# tests/test_smnd_tables.py
import pytest

from app.core.config import DEFAULT_HEADERS_FILE
from app.core.errors import ConfigError
from app.models.geochem import SmNdRecord
from app.models.geometry import Rect
from app.models.page import SpanSource
from app.models.table import CellSpan, DetectionSource, GridModel, TableClass, TableDocument, TableRegion
from app.services.smnd_tables import (
    augment_record,
    build_records,
    find_header_row,
    load_header_dictionary,
    locate_smnd_tables,
    match_headers,
    normalize_header,
    parse_coordinate,
    parse_number,
)
from tests.conftest import SMND_CELLS


@pytest.fixture(scope="module")
def headers():
    return load_header_dictionary(DEFAULT_HEADERS_FILE)


def make_table(rows, merges=(), source=SpanSource.embedded, region_index=0, doc_id="doc-1"):
    """TableDocument from a row-major matrix; `merges` are (r0, c0, r1, c1) spans."""
    n_rows, n_cols = len(rows), len(rows[0])
    covered = {(r, c) for r0, c0, r1, c1 in merges for r in range(r0, r1 + 1) for c in range(c0, c1 + 1)}
    spans = [CellSpan(row_start=r0, col_start=c0, row_end=r1, col_end=c1) for r0, c0, r1, c1 in merges]
    spans += [CellSpan(row_start=r, col_start=c, row_end=r, col_end=c)
              for r in range(n_rows) for c in range(n_cols) if (r, c) not in covered]
    grid = GridModel(row_seps=list(range(0, 10 * n_rows + 1, 10)), col_seps=list(range(0, 10 * n_cols + 1, 10)),
                     cells=spans, table_class=TableClass.bordered)
    region = TableRegion(doc_id=doc_id, page_index=2, bbox_px=Rect(x0=0, y0=0, x1=10 * n_cols, y1=10 * n_rows),
                         confidence=0.9, source=DetectionSource.heuristic)
    return TableDocument(doc_id=doc_id, page_index=2, region_index=region_index, region=region, grid=grid,
                         cell_text=[rows[c.row_start][c.col_start] for c in grid.cells],
                         provenance=[grid.cell_rect_px(c) for c in grid.cells], text_source=source)


# ---------------------------------------------------------------------------
# headers
# ---------------------------------------------------------------------------

def test_normalize_header():
    assert normalize_header("¹⁴⁷Sm/¹⁴⁴Nd") == "147sm144nd"
    assert normalize_header("εNd(t)") == "epsilonndt"
    assert normalize_header("T_DM (Ga)") == "tdmga"
    assert normalize_header("") == ""


def test_default_dictionary(headers):
    lookup = headers.lookup()
    assert lookup["147sm144nd"] == "r147"
    assert lookup["agema"] == "age"
    assert lookup["region"] == "geotectonic_unit"
    assert lookup["subgroups"] == "subtectonic_unit"


def test_dictionary_errors(tmp_path):
    unknown = tmp_path / "unknown.ini"
    unknown.write_text("[sample]\nsample\n[r147]\n147sm144nd\n[colour]\nred\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_header_dictionary(unknown)

    no_r147 = tmp_path / "no_r147.ini"
    no_r147.write_text("[sample]\nsample\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_header_dictionary(no_r147)

    shared = tmp_path / "shared.ini"
    shared.write_text("[sample]\nsample\n[r147]\n147sm144nd\n[r143]\nSample\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_header_dictionary(shared)


def test_match_headers_exact(headers):
    assert match_headers(SMND_CELLS[0], headers) == {"sample": 0, "r147": 1, "r143": 2, "age": 3}
    assert match_headers(["Sample", "¹⁴⁷Sm/¹⁴⁴Nd", "εNd(t)", "TDM2 (Ga)"], headers) == {
        "sample": 0, "r147": 1, "eps_nd_t": 2, "t_dm2": 3,
    }


def test_match_headers_first_column_wins(headers):
    assert match_headers(["Sample", "Sample No.", "147Sm/144Nd"], headers) == {"sample": 0, "r147": 2}


def test_fuzzy_match_only_for_ocr_text(headers):
    row = ["Sample", "147Sm/l44Nd"]
    assert "r147" not in match_headers(row, headers)
    assert match_headers(row, headers, fuzzy=True, cutoff=85)["r147"] == 1
    assert "r147" not in match_headers(["Sample", "Rb/Sr"], headers, fuzzy=True, cutoff=85)


def test_header_row_below_caption(headers):
    table = make_table([
        ["Whole-rock data", "", "", ""],
        SMND_CELLS[0],
        SMND_CELLS[1],
    ])
    row, columns = find_header_row(table, headers)
    assert row == 1
    assert columns["r147"] == 1


def test_two_row_header(headers):
    table = make_table([
        ["Sample", "Age (Ma)", "", ""],
        ["", "", "147Sm/144Nd", "143Nd/144Nd"],
        ["GR-1", "400", "0.12", "0.512"],
    ])
    row, columns = find_header_row(table, headers)
    assert row == 1
    assert columns == {"r147": 2, "r143": 3, "sample": 0, "age": 1}


def test_empty_table_has_no_header(headers):
    assert find_header_row(make_table([["", ""], ["", ""]]), headers) == (None, {})


def test_locate_smnd_tables(headers):
    smnd = make_table(SMND_CELLS)
    majors = make_table([["Sample", "SiO2", "Al2O3"], ["GR-1", "72.1", "14.0"]], region_index=1)
    located = locate_smnd_tables([majors, smnd], headers)
    assert [t.name for t, _ in located] == ["2_0"]


# ---------------------------------------------------------------------------
# cell values
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("text,expected", [
    ("0.512345", 0.512345),
    ("−0.39", -0.39),
    ("1,234", 1.234),
    ("1,234.5", 1234.5),
    ("0.512345 ± 12", 0.512345),
    ("0.512345(12)", 0.512345),
    ("0.1200*", 0.12),
    ("1.2e-3", 0.0012),
])
def test_parse_number(text, expected):
    assert parse_number(text) == pytest.approx(expected)


@pytest.mark.parametrize("text", ["", "n.d.", "—", "bdl", "0.51 0.52x"])
def test_parse_number_rejects(text):
    assert parse_number(text) is None


@pytest.mark.parametrize("text,expected", [
    ("102.5", 102.5),
    ("-33.2", -33.2),
    ("102°30′E", 102.5),
    ("33 15 30 S", -(33 + 15 / 60 + 30 / 3600)),
    ("N 45.5", 45.5),
    ("86°W", -86.0),
])
def test_parse_coordinate(text, expected):
    assert parse_coordinate(text) == pytest.approx(expected)


def test_parse_coordinate_rejects():
    assert parse_coordinate("") is None
    assert parse_coordinate("near the river") is None
    assert parse_coordinate("45 75") is None


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

def test_build_records_from_clean_table(headers):
    table = make_table(SMND_CELLS)
    row, columns = find_header_row(table, headers)
    records = build_records(table, columns, row)
    assert [r.sample_id for r in records] == ["GR-1", "GR-2", "GR-3"]
    first = records[0]
    assert first.measurement.r147 == 0.12
    assert first.measurement.r143 == 0.512
    assert first.measurement.age_ma == 400
    assert first.locator == "doc-1/2_0#1"


def test_build_records_skips_and_flags_rows(headers):
    table = make_table([
        SMND_CELLS[0],
        ["GR-1", "0.1200", "0.512000 ± 8", "400"],
        ["", "", "", ""],
        ["Sample", "147Sm/144Nd", "143Nd/144Nd", "Age(Ma)"],
        ["", "0.1100", "0.512100", "410"],
        ["", "", "note: duplicates", ""],
        ["GR-9", "0.1300", "0.6000", "420"],
    ])
    issues = []
    records = build_records(table, match_headers(SMND_CELLS[0], headers), 0, issues=issues)
    assert [r.sample_id for r in records] == ["GR-1", "doc-1/2_0#4", "GR-9"]
    assert records[0].measurement.two_sigma == 8.0
    assert records[2].measurement.r143 is None
    messages = " ".join(i.message for i in issues)
    assert "sample id missing" in messages
    assert "outside (0.5, 0.52)" in messages


def test_build_records_model_age_units(headers):
    table = make_table([
        ["Sample", "147Sm/144Nd", "TDM1 (Ga)", "TDM2 (Ma)"],
        ["A", "0.11", "1.2", "1350"],
    ])
    rec = build_records(table, match_headers(table.matrix()[0], headers), 0)[0]
    assert rec.original.t_dm1_ma == pytest.approx(1200.0)
    assert rec.original.t_dm2_ma == pytest.approx(1350.0)

    unlabelled = make_table([["Sample", "147Sm/144Nd", "TDM"], ["A", "0.11", "1.5"]])
    rec = build_records(unlabelled, match_headers(unlabelled.matrix()[0], headers), 0)[0]
    assert rec.original.t_dm1_ma == pytest.approx(1500.0)


def test_build_records_fills_merged_cells_down(headers):
    table = make_table([
        ["Sample", "147Sm/144Nd", "Lithology"],
        ["A", "0.11", "granodiorite"],
        ["B", "0.12", ""],
    ], merges=[(1, 2, 2, 2)])
    records = build_records(table, match_headers(table.matrix()[0], headers), dictionary=headers)
    assert [r.lithology for r in records] == ["granodiorite", "granodiorite"]


def test_build_records_needs_header_source():
    with pytest.raises(ValueError):
        build_records(make_table(SMND_CELLS), {"sample": 0, "r147": 1})


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------

def _located(table, headers):
    return table, find_header_row(table, headers)[1]


def test_augment_from_sibling_tables(headers, article, criteria):
    rec = SmNdRecord(sample_id="GR-1")
    rec.measurement.r147 = 0.12
    locations = make_table([
        ["Sample", "Longitude", "Latitude", "Lithology"],
        ["GR-0", "100.0", "40.0", "diorite"],
        ["GR-1", "102°30′E", "45.5", "monzogranite"],
    ], region_index=1)
    out = augment_record(rec, [_located(locations, headers)], meta=article, criteria=criteria)
    assert out.longitude == pytest.approx(102.5)
    assert out.latitude == pytest.approx(45.5)
    assert out.lithology == "monzogranite"
    assert out.source.doi == "10.1000/test.0001"
    assert out.measurement.r147 == 0.12


def test_augment_keeps_first_conflicting_value(headers):
    first = make_table([["Sample", "Latitude"], ["GR-1", "45.5"]], region_index=1)
    second = make_table([["Sample", "Latitude"], ["GR-1", "46.0"]], region_index=2)
    issues = []
    out = augment_record(SmNdRecord(sample_id="GR-1"),
                         [_located(first, headers), _located(second, headers)], issues=issues)
    assert out.latitude == 45.5
    assert any("conflicting latitude" in i.message for i in issues)


def test_augment_never_overwrites_table_values(headers):
    rec = SmNdRecord(sample_id="GR-1", latitude=10.0)
    sibling = make_table([["Sample", "Latitude"], ["GR-1", "45.5"]])
    assert augment_record(rec, [_located(sibling, headers)]).latitude == 10.0


def test_lithology_from_prose_only_when_unambiguous(article, criteria):
    single = augment_record(SmNdRecord(sample_id="GR-1"), [], meta=article, criteria=criteria)
    assert single.lithology == "granite"
    assert single.longitude is None and single.latitude is None

    mixed = article.model_copy(update={"abstract": "Granite and rhyolite samples."})
    ambiguous = augment_record(SmNdRecord(sample_id="GR-1"), [], meta=mixed, criteria=criteria)
    assert ambiguous.lithology is None
