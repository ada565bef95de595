# tests/test_pipeline.py
import csv
from pathlib import Path

import threading
from contextlib import contextmanager

import fitz  # PyMuPDF
import pytest

import app.services.pipeline as pipeline
from app.core.config import DATA_DIR
from app.core.errors import ConfigError
from app.models.dataset import DATASET_SCHEMA
from app.services.corpus import make_doc_id
from app.services.dataset import RECALC_SCHEMA
from app.services.adapters import AdapterSet
from app.services.pipeline import RunContext, extract_tables, process_documents, run_pipeline, scan_corpus
from tests.conftest import SMND_CELLS, entry_for, smnd_article


def _csv(path: Path):
    with open(path, encoding="utf-8-sig", newline="") as fh:
        return list(csv.reader(fh))


def test_scan_selects_matching_documents(corpus, settings_for):
    issues = []
    n_found, selected = scan_corpus(settings_for(CORPUS_DIR=corpus), issues)
    assert n_found == 4
    assert [e.path.name for e, _, _ in selected] == ["a_granite.pdf", "b_pluton.pdf", "c_rhyolite.pdf"]
    assert selected[0][2].doi == "10.1000/test.0001"
    assert any(i.stage == "ingest" and "e_corrupt" in (i.path or "") for i in issues)


async def test_run_pipeline(corpus, settings_for, tmp_path):
    cfg = settings_for(CORPUS_DIR=corpus, EXTENTS_FILE=DATA_DIR / "extents.example.ini")
    outcome = await run_pipeline(cfg)

    assert outcome.exit_code == 0
    assert (outcome.n_found, outcome.n_selected, outcome.n_ok, outcome.n_failed) == (4, 3, 3, 0)
    assert outcome.n_tables == 3
    assert outcome.n_rows == 9
    assert outcome.n_duplicates == 0

    out = tmp_path / "out"
    assert set(outcome.outputs) == {"index", "dataset", "recalculated", "report", "log"}
    dataset = _csv(out / "dataset.csv")
    assert dataset[0] == DATASET_SCHEMA
    first = dict(zip(dataset[0], dataset[1]))
    assert first["Sample"] == "GR-1"
    assert first["DOI"] == "10.1000/test.0001"
    assert first["143Nd/144Nd"] == "0.512"
    assert first["Ref. Author"] == "Smith"

    recalculated = _csv(out / "dataset_recalculated.csv")
    assert recalculated[0] == RECALC_SCHEMA
    assert len(recalculated) == 10

    doc_id = make_doc_id(Path("a_granite.pdf"))
    assert (out / "tables" / doc_id / "1_0.csv").is_file()
    report = (out / "report.txt").read_text(encoding="utf-8")
    assert "rows: 9" in report
    # the tables publish only ratios and ages, so εNd(t) and T_DM2 come from the recalculated rows
    assert "pearson r (εNd(t) vs T_DM2): n/a" not in report
    assert "over 9 pairs" in report
    log = (out / "run.log").read_text(encoding="utf-8")
    assert "config hash" in log
    assert "constant f_cc" in log
    assert "e_corrupt.pdf" in log


async def test_run_is_deterministic(corpus, settings_for, tmp_path):
    first = await run_pipeline(settings_for(CORPUS_DIR=corpus, OUTPUT_DIR=tmp_path / "one"))
    second = await run_pipeline(settings_for(CORPUS_DIR=corpus, OUTPUT_DIR=tmp_path / "two", MAX_WORKERS=1))
    for name in ("dataset", "recalculated", "report", "index"):
        assert first.outputs[name].read_bytes() == second.outputs[name].read_bytes(), name


async def test_empty_corpus_is_zero_yield(settings_for, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    outcome = await run_pipeline(settings_for(CORPUS_DIR=empty))
    assert outcome.exit_code == 2
    assert outcome.n_rows == 0
    assert _csv(outcome.outputs["dataset"]) == [DATASET_SCHEMA]
    assert "no rows" in outcome.outputs["report"].read_text(encoding="utf-8")


async def test_failed_document_is_isolated(corpus, settings_for, monkeypatch):
    real = pipeline.document_tables

    def flaky(entry, ctx, issues):
        if entry.path.name == "b_pluton.pdf":
            raise RuntimeError("boom")
        return real(entry, ctx, issues)

    monkeypatch.setattr(pipeline, "document_tables", flaky)
    outcome = await run_pipeline(settings_for(CORPUS_DIR=corpus))
    assert (outcome.n_ok, outcome.n_failed) == (2, 1)
    assert outcome.n_rows == 6
    assert outcome.exit_code == 0
    failed = [i for i in outcome.issues if i.stage == "document"]
    assert len(failed) == 1
    assert failed[0].message == "boom"


async def test_config_errors_come_first(corpus, settings_for, tmp_path):
    cfg = settings_for(CORPUS_DIR=corpus, CONSTANTS_FILE=tmp_path / "missing.ini")
    with pytest.raises(ConfigError):
        await run_pipeline(cfg)
    assert not (tmp_path / "out").exists()


async def test_extract_tables_without_gate(corpus, settings_for, tmp_path):
    outcome = await extract_tables(settings_for(CORPUS_DIR=corpus, TABLE_FORMAT="tsv"))
    assert (outcome.n_found, outcome.n_ok) == (4, 4)
    assert outcome.n_tables == 3
    index = (tmp_path / "out" / "tables" / "index.tsv").read_text(encoding="utf-8").splitlines()
    assert len(index) == 4
    assert all(line.endswith(".tsv") for line in index[1:])
    assert not (tmp_path / "out" / "dataset.csv").exists()


async def test_parallel_documents_match_serial_run(tmp_path, settings_for, monkeypatch):
    entries = []
    for k in range(6):
        cells = [SMND_CELLS[0]] + [[f"D{k}-{i}", *row[1:]] for i, row in enumerate(SMND_CELLS[1:])]
        pdf = smnd_article(tmp_path / "docs" / f"doc{k}.pdf", f"Sm-Nd data of granite {k}", "Granite.",
                           f"10.1000/par.{k}", cells=cells)
        entries.append(entry_for(pdf))

    real_open = fitz.open
    guard = threading.Lock()
    state = {"active": 0, "peak": 0}

    @contextmanager
    def tracked_open(*args, **kwargs):
        with guard:
            state["active"] += 1
            state["peak"] = max(state["peak"], state["active"])
        try:
            with real_open(*args, **kwargs) as pdf:
                yield pdf
        finally:
            with guard:
                state["active"] -= 1

    monkeypatch.setattr(fitz, "open", tracked_open)

    async def tables(workers):
        cfg = settings_for(MAX_WORKERS=workers)
        with AdapterSet(cfg) as adapters:
            results = await process_documents([(e, None) for e in entries], RunContext(cfg=cfg, adapters=adapters),
                                              with_records=False)
        assert all(r.ok for r in results)
        return [[t.matrix() for t in r.tables] for r in results]

    parallel = await tables(4)
    assert parallel == await tables(1)
    assert any("D3-0" in row for row in parallel[3][0])
    assert state["peak"] == 1
