# tests/test_corpus.py
from pathlib import Path

import pytest

from app.core.errors import ConfigError
from app.models.corpus import ArticleMetadata, Issue, QueryCriteria
from app.services.corpus import filter_corpus, ingest_corpus, make_doc_id
from app.services.metadata import load_metadata


def test_doc_id_is_stable_and_path_sensitive():
    a = make_doc_id(Path("x/granite paper.pdf"))
    assert a == make_doc_id(Path("x/granite paper.pdf"))
    assert a.startswith("granite_paper-")
    assert a != make_doc_id(Path("y/granite paper.pdf"))


def test_ingest_skips_corrupt_files(corpus):
    issues = []
    entries = ingest_corpus(corpus, issues)
    assert [e.path.name for e in entries] == ["a_granite.pdf", "b_pluton.pdf", "c_rhyolite.pdf", "d_seawater.pdf"]
    assert [e.page_count for e in entries] == [2, 2, 2, 1]
    assert all(len(e.sha256) == 64 for e in entries)
    assert len(issues) == 1
    assert issues[0].stage == "ingest"
    assert issues[0].path == "e_corrupt.pdf"


def test_ingest_is_deterministic(corpus):
    first = ingest_corpus(corpus)
    second = ingest_corpus(corpus)
    assert [e.model_dump() for e in first] == [e.model_dump() for e in second]


def test_ingest_walks_subdirectories(corpus):
    nested = corpus / "nested"
    nested.mkdir()
    (corpus / "a_granite.pdf").rename(nested / "a_granite.pdf")
    names = [e.path.relative_to(corpus).as_posix() for e in ingest_corpus(corpus)]
    assert names == ["b_pluton.pdf", "c_rhyolite.pdf", "d_seawater.pdf", "nested/a_granite.pdf"]


def test_ingest_empty_and_missing(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert ingest_corpus(empty) == []
    with pytest.raises(ConfigError):
        ingest_corpus(tmp_path / "nowhere")


def test_filter_keeps_documents_matching_both_groups(corpus, criteria):
    entries = ingest_corpus(corpus)
    selected = filter_corpus(entries, lambda e: load_metadata(e), criteria)
    assert [e.path.name for e, _ in selected] == ["a_granite.pdf", "b_pluton.pdf", "c_rhyolite.pdf"]
    assert all(decision.included for _, decision in selected)


def test_filter_records_metadata_failures(corpus, criteria):
    entries = ingest_corpus(corpus)

    def load(entry):
        if entry.path.name == "b_pluton.pdf":
            raise RuntimeError("sidecar exploded")
        return ArticleMetadata(title="Sm-Nd data for granite")

    issues: list[Issue] = []
    selected = filter_corpus(entries, load, criteria, issues)
    assert [e.path.name for e, _ in selected] == ["a_granite.pdf", "c_rhyolite.pdf", "d_seawater.pdf"]
    assert [i.stage for i in issues] == ["metadata"]


def test_filter_rejects_empty_group(corpus):
    bad = QueryCriteria(isotope_terms={"sm nd"}, lithology_terms=set())
    with pytest.raises(ConfigError):
        filter_corpus(ingest_corpus(corpus), lambda e: ArticleMetadata(), bad)
