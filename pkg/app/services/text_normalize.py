# app/services/text_normalize.py
"""
Token normalization and the two-group inclusion test used to gate the corpus.

Exports:
- transliterate(raw) -> str
- normalize_text(raw, criteria) -> list of tokens
- matches_criteria(meta, criteria) -> MatchDecision
- load_criteria(path) -> QueryCriteria
"""

import logging
import re
import unicodedata
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Set, Tuple

from app.core.errors import ConfigError
from app.models.corpus import ArticleMetadata, MatchDecision, QueryCriteria
from app.utils.ini import read_ini

logger = logging.getLogger(__name__)

NON_ALNUM_RE = re.compile(r"[^a-z0-9]+")

# Greek letters spelled out; padded so "εNd" splits into two tokens
GREEK = {
    "ε": " epsilon ",
    "ϵ": " epsilon ",
    "Ɛ": " epsilon ",
    "σ": " sigma ",
    "Σ": " sigma ",
    "λ": " lambda ",
    "δ": " delta ",
    "Δ": " delta ",
}

# unicode dashes and minus signs seen in extracted text
DASHES = {"−": "-", "–": "-", "—": "-", "‐": "-", "‑": "-"}

CRITERIA_SECTIONS = ("isotope_terms", "lithology_terms", "stop_words", "abbreviations")


def transliterate(raw: str) -> str:
    """Spell out Greek letters, fold superscript/subscript digits and strip accents."""
    if not raw:
        return ""
    s = "".join(GREEK.get(ch, DASHES.get(ch, ch)) for ch in raw)
    # NFKD maps ¹⁴⁷ -> 147 and splits accented letters from their marks
    s = unicodedata.normalize("NFKD", s)
    return "".join(ch for ch in s if not unicodedata.combining(ch))


def normalize_text(raw: str, criteria: Optional[QueryCriteria] = None) -> List[str]:
    if not raw:
        return []
    stop_words: Set[str] = criteria.stop_words if criteria else set()
    abbreviations = criteria.abbreviation_map if criteria else {}

    text = NON_ALNUM_RE.sub(" ", transliterate(raw).lower())
    tokens: List[str] = []
    for tok in text.split():
        if tok in stop_words:
            continue
        tokens.append(tok)
        tokens.extend(abbreviations.get(tok, ()))
    return tokens


def _ngrams(tokens: Sequence[str], sizes: Iterable[int]) -> Set[Tuple[str, ...]]:
    out: Set[Tuple[str, ...]] = set()
    for n in sizes:
        for i in range(len(tokens) - n + 1):
            out.add(tuple(tokens[i:i + n]))
    return out


def find_terms(tokens: Sequence[str], terms: Iterable[str]) -> Set[str]:
    """Terms occurring as contiguous token n-grams of `tokens`."""
    split = {t: tuple(t.split()) for t in terms}
    grams = _ngrams(tokens, {len(v) for v in split.values()})
    return {t for t, key in split.items() if key in grams}


def matches_criteria(meta: ArticleMetadata, criteria: QueryCriteria) -> MatchDecision:
    group1: Set[str] = set()
    group2: Set[str] = set()
    # fields are searched separately so an n-gram never spans title and abstract
    for field in ("title", "abstract"):
        tokens = normalize_text(getattr(meta, field), criteria)
        if not tokens:
            continue
        group1 |= find_terms(tokens, criteria.isotope_terms)
        group2 |= find_terms(tokens, criteria.lithology_terms)
    return MatchDecision(
        included=bool(group1 and group2),
        matched_group1=group1,
        matched_group2=group2,
    )


def load_criteria(path: Path) -> QueryCriteria:
    parser = read_ini(Path(path))
    missing = [s for s in CRITERIA_SECTIONS[:2] if not parser.has_section(s)]
    if missing:
        raise ConfigError(f"criteria file {path} lacks sections: {', '.join(missing)}")

    def _terms(section: str) -> Set[str]:
        if not parser.has_section(section):
            return set()
        return {" ".join(k.split()) for k in parser.options(section)}

    abbreviations = {}
    if parser.has_section("abbreviations"):
        for key, value in parser.items("abbreviations"):
            abbreviations[key.strip()] = (value or "").lower().split()

    criteria = QueryCriteria(
        isotope_terms=_terms("isotope_terms"),
        lithology_terms=_terms("lithology_terms"),
        stop_words=_terms("stop_words"),
        abbreviation_map=abbreviations,
    )
    criteria.ensure_valid()
    logger.debug(
        "Loaded criteria from %s: %d isotope terms, %d lithology terms, %d stop words",
        path, len(criteria.isotope_terms), len(criteria.lithology_terms), len(criteria.stop_words),
    )
    return criteria
