# app/services/metadata.py
"""
Article metadata: sidecar files first, first-page heuristics for whatever the
sidecar leaves empty.

Sidecars sit next to the PDF (or in a metadata directory) with the same
basename and extension `.meta.xml` or `.meta.kv`. XML sidecars are either a
flat list of key elements or a JATS/NLM article front matter block.
"""

import logging
import re
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from app.models.corpus import DOI_GRAMMAR_RE, ArticleMetadata, DocumentEntry, Issue
from app.models.page import TextSpan
from app.services.parse_utils import page_blocks, page_text
from app.services.text_normalize import normalize_text

logger = logging.getLogger(__name__)

SIDECAR_SUFFIXES = (".meta.xml", ".meta.kv")

DOI_RE = re.compile(r"\b(10\.\d{4,9}/[^\s\"<>]+)", re.IGNORECASE)
YEAR_RE = re.compile(r"\b((?:19|20)\d{2})\b")
KV_LINE_RE = re.compile(r"^\s*([A-Za-z_]+)\s*[:=]\s*(.*?)\s*$")

SCALAR_KEYS = ("title", "abstract", "journal", "volume", "issue", "page", "doi", "year")
LIST_KEYS = {"author": "authors", "keyword": "keywords"}

# lines that end an abstract block when it runs into the body
_ABSTRACT_STOP = {("keywords",), ("key", "words"), ("introduction",), ("1", "introduction")}


def find_sidecar(pdf_path: Path, meta_dir: Optional[Path] = None) -> Optional[Path]:
    base = pdf_path.name[: -len(pdf_path.suffix)] if pdf_path.suffix else pdf_path.name
    for folder in (pdf_path.parent, meta_dir):
        if folder is None:
            continue
        for suffix in SIDECAR_SUFFIXES:
            candidate = Path(folder) / f"{base}{suffix}"
            if candidate.is_file():
                return candidate
    return None


def clean_doi(raw: str) -> str:
    s = (raw or "").strip()
    s = re.sub(r"^(?:https?://(?:dx\.)?doi\.org/|doi:\s*)", "", s, flags=re.IGNORECASE)
    s = s.rstrip(".,;:)]}'\"")
    return s if DOI_GRAMMAR_RE.match(s) else ""


def _xml_text(el: Optional[ET.Element]) -> str:
    if el is None:
        return ""
    return " ".join("".join(el.itertext()).split())


def _strip_ns(root: ET.Element) -> None:
    for el in root.iter():
        if isinstance(el.tag, str) and "}" in el.tag:
            el.tag = el.tag.split("}", 1)[1]


def _parse_jats(root: ET.Element) -> Dict:
    out: Dict = {
        "title": _xml_text(root.find(".//article-title")),
        "abstract": _xml_text(root.find(".//abstract")),
        "journal": _xml_text(root.find(".//journal-title")),
        "volume": _xml_text(root.find(".//volume")),
        "issue": _xml_text(root.find(".//issue")),
        "keywords": [_xml_text(k) for k in root.iter("kwd") if _xml_text(k)],
    }
    authors: List[str] = []
    for contrib in root.iter("contrib"):
        if contrib.get("contrib-type", "author") != "author":
            continue
        name = contrib.find(".//string-name")
        if name is None:
            name = contrib.find(".//name")
        if name is None:
            continue
        surname = _xml_text(name.find("surname"))
        given = _xml_text(name.find("given-names"))
        full = " ".join(p for p in (given, surname) if p) or _xml_text(name)
        if full:
            authors.append(full)
    out["authors"] = authors
    fpage, lpage = _xml_text(root.find(".//fpage")), _xml_text(root.find(".//lpage"))
    out["page"] = f"{fpage}-{lpage}" if fpage and lpage else fpage
    for aid in root.iter("article-id"):
        if (aid.get("pub-id-type") or "").lower() == "doi":
            out["doi"] = _xml_text(aid)
            break
    out["year"] = _xml_text(root.find(".//pub-date/year"))
    return out


def _parse_flat_xml(root: ET.Element) -> Dict:
    out: Dict = {"authors": [], "keywords": []}
    for el in root.iter():
        tag = str(el.tag).lower()
        if tag in LIST_KEYS:
            value = _xml_text(el)
            if value:
                out[LIST_KEYS[tag]].append(value)
        elif tag in SCALAR_KEYS and tag not in out:
            out[tag] = _xml_text(el)
    return out


def _parse_kv(text: str) -> Dict:
    out: Dict = {"authors": [], "keywords": []}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = KV_LINE_RE.match(line)
        if not m:
            continue
        key, value = m.group(1).lower(), m.group(2)
        if key in LIST_KEYS:
            out[LIST_KEYS[key]].append(value)
        elif key in SCALAR_KEYS:
            out[key] = value
    return out


def read_sidecar(path: Path) -> Dict:
    """Raw field dict from a sidecar; raises on unreadable files."""
    text = Path(path).read_text(encoding="utf-8")
    if path.name.endswith(".meta.kv"):
        return _parse_kv(text)
    root = ET.fromstring(text)
    _strip_ns(root)
    if root.find(".//article-title") is not None or root.tag == "article":
        return _parse_jats(root)
    return _parse_flat_xml(root)


def _coerce(fields: Dict, doc_id: str, issues: Optional[List[Issue]]) -> Dict:
    """Drop sidecar values that would violate ArticleMetadata's invariants."""
    out = {k: v for k, v in fields.items() if v not in (None, "", [])}
    if "doi" in out:
        doi = clean_doi(out["doi"])
        if not doi:
            logger.warning("%s: sidecar DOI %r is malformed, ignoring it", doc_id, out["doi"])
            if issues is not None:
                issues.append(Issue(stage="metadata", doc_id=doc_id, message=f"malformed DOI {out['doi']!r}"))
            del out["doi"]
        else:
            out["doi"] = doi
    if "year" in out:
        m = YEAR_RE.search(str(out["year"]))
        if m:
            out["year"] = int(m.group(1))
        else:
            del out["year"]
    return out


def _heading(span: TextSpan) -> tuple:
    return tuple(normalize_text(span.text))


def heuristic_title(blocks: List[List[TextSpan]]) -> str:
    lines = [s for block in blocks for s in block if s.font_size_pt > 0]
    if not lines:
        return ""
    top = max(s.font_size_pt for s in lines)
    picked = [s for s in lines if abs(s.font_size_pt - top) <= 0.5]
    picked.sort(key=lambda s: (-s.bbox.y1, s.bbox.x0))
    return " ".join(s.text for s in picked)


def heuristic_abstract(blocks: List[List[TextSpan]]) -> str:
    for bi, block in enumerate(blocks):
        for li, line in enumerate(block):
            if _heading(line) != ("abstract",):
                continue
            rest = block[li + 1:]
            if not rest and bi + 1 < len(blocks):
                rest = blocks[bi + 1]
            kept = []
            for span in rest:
                if _heading(span) in _ABSTRACT_STOP:
                    break
                kept.append(span.text)
            return " ".join(" ".join(kept).split())
    return ""


def heuristic_doi(text: str) -> str:
    for m in DOI_RE.finditer(text):
        doi = clean_doi(m.group(1))
        if doi:
            return doi
    return ""


def heuristic_year(text: str) -> Optional[int]:
    for m in YEAR_RE.finditer(text):
        year = int(m.group(1))
        if 1900 <= year <= 2100:
            return year
    return None


def extract_heuristic(doc: DocumentEntry) -> Dict:
    blocks = page_blocks(doc.path, 0)
    first = "\n".join(s.text for block in blocks for s in block)
    second = page_text(doc.path, 1) if doc.page_count > 1 else ""
    return {
        "title": heuristic_title(blocks),
        "abstract": heuristic_abstract(blocks),
        "doi": heuristic_doi(first + "\n" + second),
        "year": heuristic_year(first),
    }


def load_metadata(
    doc: DocumentEntry,
    sidecar: Optional[Path] = None,
    meta_dir: Optional[Path] = None,
    issues: Optional[List[Issue]] = None,
) -> ArticleMetadata:
    if sidecar is None:
        sidecar = find_sidecar(doc.path, meta_dir)

    from_sidecar: Dict = {}
    if sidecar is not None:
        try:
            from_sidecar = _coerce(read_sidecar(sidecar), doc.doc_id, issues)
            logger.debug("%s: sidecar %s supplied %s", doc.doc_id, sidecar, sorted(from_sidecar))
        except Exception as exc:
            logger.warning("%s: unreadable sidecar %s, using heuristics: %s", doc.doc_id, sidecar, exc)
            if issues is not None:
                issues.append(Issue(stage="metadata", doc_id=doc.doc_id, message=f"unreadable sidecar: {exc}"))

    fields: Dict = {}
    if any(not from_sidecar.get(k) for k in ("title", "abstract", "doi", "year")):
        try:
            fields = {k: v for k, v in extract_heuristic(doc).items() if v}
        except Exception as exc:
            logger.warning("%s: first-page heuristics failed: %s", doc.doc_id, exc)
    fields.update(from_sidecar)

    try:
        return ArticleMetadata(**fields)
    except ValidationError as exc:
        logger.warning("%s: metadata rejected (%s), keeping title and abstract only", doc.doc_id, exc)
        return ArticleMetadata(title=fields.get("title", ""), abstract=fields.get("abstract", ""))
