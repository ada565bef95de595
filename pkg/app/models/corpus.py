# app/models/corpus.py
import re
from pathlib import Path
from typing import Dict, List, Optional, Set

from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.errors import ConfigError

DOI_GRAMMAR_RE = re.compile(r"^10\.\d{4,9}/\S+$")
_NORMALIZED_TERM_RE = re.compile(r"^[a-z0-9]+( [a-z0-9]+)*$")


class Issue(BaseModel):
    """A non-fatal problem recorded during a run."""

    stage: str
    message: str
    doc_id: Optional[str] = None
    path: Optional[str] = None
    page_index: Optional[int] = None


class DocumentEntry(BaseModel):
    doc_id: str
    path: Path
    page_count: int = Field(ge=1)
    sha256: str


class ArticleMetadata(BaseModel):
    title: str = ""
    abstract: str = ""
    authors: List[str] = Field(default_factory=list)
    journal: str = ""
    volume: str = ""
    issue: str = ""
    page: str = ""
    doi: str = ""
    year: Optional[int] = None
    keywords: List[str] = Field(default_factory=list)

    @field_validator("doi")
    @classmethod
    def _doi_grammar(cls, v: str) -> str:
        v = (v or "").strip()
        if v and not DOI_GRAMMAR_RE.match(v):
            raise ValueError(f"not a DOI: {v!r}")
        return v

    @field_validator("year")
    @classmethod
    def _year_range(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and not 1900 <= v <= 2100:
            raise ValueError(f"year out of range: {v}")
        return v


class QueryCriteria(BaseModel):
    isotope_terms: Set[str]
    lithology_terms: Set[str]
    stop_words: Set[str] = Field(default_factory=set)
    abbreviation_map: Dict[str, List[str]] = Field(default_factory=dict)

    def ensure_valid(self) -> "QueryCriteria":
        if not self.isotope_terms:
            raise ConfigError("criteria: isotope_terms (group 1) is empty")
        if not self.lithology_terms:
            raise ConfigError("criteria: lithology_terms (group 2) is empty")
        for term in (*self.isotope_terms, *self.lithology_terms):
            if not _NORMALIZED_TERM_RE.match(term):
                raise ConfigError(f"criteria: term {term!r} is not normalized")
        for key, expansions in self.abbreviation_map.items():
            if not re.fullmatch(r"[a-z0-9]+", key):
                raise ConfigError(f"criteria: abbreviation key {key!r} is not a single normalized token")
            if any(not re.fullmatch(r"[a-z0-9]+", tok) for tok in expansions):
                raise ConfigError(f"criteria: expansion of {key!r} is not normalized")
        return self


class MatchDecision(BaseModel):
    included: bool
    matched_group1: Set[str] = Field(default_factory=set)
    matched_group2: Set[str] = Field(default_factory=set)
    searched_fields: List[str] = Field(default_factory=lambda: ["title", "abstract"])

    @model_validator(mode="after")
    def _both_groups(self) -> "MatchDecision":
        if self.included != bool(self.matched_group1 and self.matched_group2):
            raise ValueError("included must equal (group 1 matched AND group 2 matched)")
        return self
