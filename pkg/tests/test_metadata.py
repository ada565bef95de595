# tests/test_metadata.py
from app.services.metadata import clean_doi, find_sidecar, heuristic_doi, heuristic_year, load_metadata, read_sidecar
from tests.conftest import article_page, entry_for, write_pdf, write_sidecar

JATS = """<?xml version="1.0"?>
<article xmlns:xlink="http://www.w3.org/1999/xlink">
  <front>
    <journal-meta><journal-title-group><journal-title>Test Petrology</journal-title></journal-title-group></journal-meta>
    <article-meta>
      <article-id pub-id-type="doi">10.1000/jats.7</article-id>
      <title-group><article-title>Nd isotopes of <italic>felsic</italic> dykes</article-title></title-group>
      <contrib-group>
        <contrib contrib-type="author"><name><surname>Zhang</surname><given-names>Wei</given-names></name></contrib>
        <contrib contrib-type="editor"><name><surname>Nobody</surname></name></contrib>
      </contrib-group>
      <pub-date><year>2015</year></pub-date>
      <volume>33</volume><issue>2</issue><fpage>101</fpage><lpage>120</lpage>
      <abstract><p>Sm-Nd data.</p></abstract>
    </article-meta>
  </front>
</article>
"""


def test_clean_doi():
    assert clean_doi("https://doi.org/10.1016/j.lithos.2019.01.001.") == "10.1016/j.lithos.2019.01.001"
    assert clean_doi("doi: 10.1000/abc)") == "10.1000/abc"
    assert clean_doi("not a doi") == ""


def test_heuristic_doi_and_year():
    assert heuristic_doi("Received 2019\nDOI 10.1000/xyz.12, accepted") == "10.1000/xyz.12"
    assert heuristic_doi("no identifier here") == ""
    assert heuristic_year("Vol 12 (1899) printed 2004") == 2004
    assert heuristic_year("page 12") is None


def test_sidecar_fields_take_precedence(tmp_path):
    pdf = write_pdf(tmp_path / "paper.pdf", [article_page("Heuristic title", "Heuristic abstract.", "10.1000/page.1")])
    write_sidecar(pdf, title="Sidecar title", doi="10.1000/side.1", year=2018, authors=["Smith, J.", "Jones, B."])
    meta = load_metadata(entry_for(pdf))
    assert meta.title == "Sidecar title"
    assert meta.doi == "10.1000/side.1"
    assert meta.year == 2018
    assert meta.authors == ["Smith, J.", "Jones, B."]
    # the sidecar has no abstract, so the first page supplies it
    assert "Heuristic abstract" in meta.abstract


def test_first_page_heuristics(tmp_path):
    pdf = write_pdf(tmp_path / "bare.pdf", [article_page("Sm-Nd systematics of seawater",
                                                          "Dissolved Nd in ocean water masses.",
                                                          "10.1000/test.0009", year=2011)])
    meta = load_metadata(entry_for(pdf))
    assert meta.title == "Sm-Nd systematics of seawater"
    assert meta.doi == "10.1000/test.0009"
    assert meta.year == 2011
    assert "Dissolved Nd" in meta.abstract
    assert "Keywords" not in meta.abstract


def test_missing_abstract_is_empty(tmp_path):
    pdf = write_pdf(tmp_path / "short.pdf", [[("text", 72, 90, "A title without abstract", 16)]])
    meta = load_metadata(entry_for(pdf))
    assert meta.abstract == ""
    assert meta.doi == ""


def test_malformed_sidecar_doi_is_dropped(tmp_path):
    pdf = write_pdf(tmp_path / "p.pdf", [article_page("Title", "Abstract text.")])
    write_sidecar(pdf, title="Title", doi="doi-unknown")
    issues = []
    meta = load_metadata(entry_for(pdf), issues=issues)
    assert meta.doi == ""
    assert any("malformed DOI" in i.message for i in issues)


def test_jats_sidecar(tmp_path):
    pdf = write_pdf(tmp_path / "j.pdf", [article_page("Ignored", "Ignored.")])
    meta_dir = tmp_path / "meta"
    meta_dir.mkdir()
    (meta_dir / "j.meta.xml").write_text(JATS, encoding="utf-8")
    assert find_sidecar(pdf, meta_dir) == meta_dir / "j.meta.xml"

    fields = read_sidecar(meta_dir / "j.meta.xml")
    assert fields["authors"] == ["Wei Zhang"]
    assert fields["page"] == "101-120"

    meta = load_metadata(entry_for(pdf), meta_dir=meta_dir)
    assert meta.title == "Nd isotopes of felsic dykes"
    assert meta.doi == "10.1000/jats.7"
    assert meta.year == 2015
    assert meta.journal == "Test Petrology"
    assert meta.abstract == "Sm-Nd data."


def test_flat_xml_sidecar(tmp_path):
    pdf = write_pdf(tmp_path / "f.pdf", [article_page("Ignored", "Ignored.")])
    (tmp_path / "f.meta.xml").write_text(
        "<meta><title>Flat title</title><author>A. One</author><author>B. Two</author>"
        "<doi>10.1000/flat.2</doi><year>2009</year><abstract>Flat abstract.</abstract></meta>",
        encoding="utf-8",
    )
    meta = load_metadata(entry_for(pdf))
    assert meta.title == "Flat title"
    assert meta.authors == ["A. One", "B. Two"]
    assert meta.year == 2009


def test_unreadable_sidecar_falls_back(tmp_path):
    pdf = write_pdf(tmp_path / "u.pdf", [article_page("Fallback title", "Some abstract.")])
    (tmp_path / "u.meta.xml").write_text("<meta><title>broken", encoding="utf-8")
    issues = []
    meta = load_metadata(entry_for(pdf), issues=issues)
    assert meta.title == "Fallback title"
    assert issues and issues[0].stage == "metadata"
