# app/services/corpus.py
import logging
import re
from pathlib import Path
from typing import Callable, List, Optional, Tuple

from app.core.errors import ConfigError
from app.models.corpus import ArticleMetadata, DocumentEntry, Issue, MatchDecision, QueryCriteria
from app.services.parse_utils import count_pages
from app.services.text_normalize import matches_criteria
from app.utils.hashing import sha256_file, sha256_text

logger = logging.getLogger(__name__)

_ID_UNSAFE_RE = re.compile(r"[^A-Za-z0-9_.-]+")

MetadataLoader = Callable[[DocumentEntry], ArticleMetadata]


def make_doc_id(relative_path: Path) -> str:
    stem = _ID_UNSAFE_RE.sub("_", relative_path.stem).strip("_") or "doc"
    return f"{stem}-{sha256_text(relative_path.as_posix())[:8]}"


def ingest_corpus(root: Path, issues: Optional[List[Issue]] = None) -> List[DocumentEntry]:
    """
    One DocumentEntry per parseable PDF under `root`, ordered by relative path.
    Unparseable files are logged and recorded in `issues`.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"corpus directory not found: {root}")

    paths = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix.lower() == ".pdf"),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    entries: List[DocumentEntry] = []
    for path in paths:
        rel = path.relative_to(root)
        try:
            pages = count_pages(path)
            if pages < 1:
                raise ValueError("document has no pages")
            entries.append(
                DocumentEntry(doc_id=make_doc_id(rel), path=path, page_count=pages, sha256=sha256_file(path))
            )
        except Exception as exc:
            logger.warning("Skipping unparseable PDF %s: %s", rel, exc)
            if issues is not None:
                issues.append(Issue(stage="ingest", path=rel.as_posix(), message=f"unparseable PDF: {exc}"))
    logger.info("Corpus %s: %d parseable PDFs of %d found", root, len(entries), len(paths))
    return entries


def filter_corpus(
    entries: List[DocumentEntry],
    load: MetadataLoader,
    criteria: QueryCriteria,
    issues: Optional[List[Issue]] = None,
) -> List[Tuple[DocumentEntry, MatchDecision]]:
    criteria.ensure_valid()
    selected: List[Tuple[DocumentEntry, MatchDecision]] = []
    for entry in entries:
        try:
            meta = load(entry)
        except Exception as exc:
            logger.warning("Metadata failed for %s, excluding it: %s", entry.doc_id, exc)
            if issues is not None:
                issues.append(Issue(stage="metadata", doc_id=entry.doc_id, message=str(exc)))
            continue
        decision = matches_criteria(meta, criteria)
        logger.debug(
            "%s included=%s group1=%s group2=%s",
            entry.doc_id, decision.included, sorted(decision.matched_group1), sorted(decision.matched_group2),
        )
        if decision.included:
            selected.append((entry, decision))
    logger.info("Criteria kept %d of %d documents", len(selected), len(entries))
    return selected
