# app/models/geochem.py
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.models.corpus import ArticleMetadata

# Canonical fields recognised in table headers. Nation/Region/Groups headers
# fold into geotectonic_unit and Sub groups into subtectonic_unit.
CANONICAL_FIELDS = (
    "sample", "geotectonic_unit", "tectonic_unit", "subtectonic_unit", "longitude",
    "latitude", "lithology", "pluton", "formation", "age", "sm", "nd", "r147", "r143",
    "two_sigma", "f_sm_nd", "eps_nd_0", "eps_nd_t", "t_dm1", "t_dm2", "author", "year",
    "journal", "title", "volume", "page", "doi",
)


class IsotopeConstants(BaseModel):
    chur_143_144: float = 0.512638
    chur_147_144: float = 0.1967159
    dm_143_144: float = 0.51315
    dm_147_144: float = 0.21372
    # single-stage model age uses 0.2137, not dm_147_144
    tdm1_dm_147_144: float = 0.2137
    lambda_147sm_per_year: float = 6.54e-12
    f_cc: float = -0.4
    f_dm: float = 0.08592

    @model_validator(mode="after")
    def _positive(self) -> "IsotopeConstants":
        for name in ("chur_143_144", "chur_147_144", "dm_143_144", "dm_147_144",
                     "tdm1_dm_147_144", "lambda_147sm_per_year", "f_dm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        return self


class SmNdMeasurement(BaseModel):
    sm_ppm: Optional[float] = None
    nd_ppm: Optional[float] = None
    r147: Optional[float] = None
    r143: Optional[float] = None
    two_sigma: Optional[float] = None
    age_ma: Optional[float] = None

    @field_validator("r147")
    @classmethod
    def _r147(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError(f"147Sm/144Nd outside (0, 1): {v}")
        return v

    @field_validator("age_ma")
    @classmethod
    def _age(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 <= v <= 4600.0:
            raise ValueError(f"age outside [0, 4600] Ma: {v}")
        return v


class OriginalValues(BaseModel):
    """Published values carried through verbatim; model ages normalised to Ma."""

    f_sm_nd: Optional[float] = None
    eps_nd_0: Optional[float] = None
    eps_nd_t: Optional[float] = None
    t_dm1_ma: Optional[float] = None
    t_dm2_ma: Optional[float] = None


class DerivedValues(BaseModel):
    f_sm_nd: Optional[float] = None
    eps_nd_0: Optional[float] = None
    eps_nd_t: Optional[float] = None
    t_dm1_ga: Optional[float] = None
    t_dm2_ga: Optional[float] = None
    # field name -> reason it could not be derived
    flags: Dict[str, str] = Field(default_factory=dict)

    @field_validator("f_sm_nd")
    @classmethod
    def _f_range(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v <= -1.0:
            raise ValueError("f(Sm/Nd) must exceed -1")
        return v

    def present(self) -> Dict[str, float]:
        return {
            k: v for k, v in self.model_dump(exclude={"flags"}).items() if v is not None
        }


class HeaderDictionary(BaseModel):
    """canonical field -> normalised header aliases"""

    aliases: Dict[str, List[str]]

    @model_validator(mode="after")
    def _disjoint(self) -> "HeaderDictionary":
        seen: Dict[str, str] = {}
        for field, names in self.aliases.items():
            for alias in names:
                if alias in seen and seen[alias] != field:
                    raise ValueError(f"alias {alias!r} used by both {seen[alias]} and {field}")
                seen[alias] = field
        return self

    def lookup(self) -> Dict[str, str]:
        return {alias: field for field, names in self.aliases.items() for alias in names}


class SmNdRecord(BaseModel):
    sample_id: str = Field(min_length=1)
    geotectonic_unit: Optional[str] = None
    tectonic_unit: Optional[str] = None
    subtectonic_unit: Optional[str] = None
    longitude: Optional[float] = None
    latitude: Optional[float] = None
    lithology: Optional[str] = None
    pluton: Optional[str] = None
    formation: Optional[str] = None
    measurement: SmNdMeasurement = Field(default_factory=SmNdMeasurement)
    original: OriginalValues = Field(default_factory=OriginalValues)
    derived: DerivedValues = Field(default_factory=DerivedValues)
    source: ArticleMetadata = Field(default_factory=ArticleMetadata)
    # where the row came from: "<doc_id>/<page>_<region>#<row>"
    locator: str = ""

    @field_validator("longitude")
    @classmethod
    def _lon(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not -180.0 <= v <= 180.0:
            raise ValueError(f"longitude out of range: {v}")
        return v

    @field_validator("latitude")
    @classmethod
    def _lat(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not -90.0 <= v <= 90.0:
            raise ValueError(f"latitude out of range: {v}")
        return v
