# app/models/dataset.py
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

# Column order of the automated-collection dataset; bit-stable.
DATASET_SCHEMA: List[str] = [
    "Sample",
    "Nation/Region/GeoTectonic unit/Groups",
    "Tectonic unit",
    "Subtectonic unit/Sub groups",
    "Longitude",
    "Latitude",
    "Lithology",
    "Pluton",
    "Age (Ma)",
    "Sm",
    "Nd",
    "147Sm/144Nd",
    "143Nd/144Nd",
    "2σ",
    "fSm/Nd",
    "εNd(t)",
    "TDM1",
    "TDM2",
    "Ref. Author",
    "Ref. Year",
    "Ref. Journal",
    "Title",
    "Volume",
    "Page",
    "DOI",
]

# Appended by recalculation; model ages in Ga.
RECALC_COLUMNS: List[str] = [
    "Calc. fSm/Nd",
    "Calc. εNd(0)",
    "Calc. εNd(t)",
    "Calc. TDM1 (Ga)",
    "Calc. TDM2 (Ga)",
    "Recalc match",
    "Spatial OK",
]

BIBLIOGRAPHIC_COLUMNS = ["Ref. Author", "Ref. Year", "Ref. Journal", "Title", "Volume", "Page", "DOI"]


class DatasetRow(BaseModel):
    """One output row keyed by schema column name; '' means absent."""

    values: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _known_columns(self) -> "DatasetRow":
        unknown = set(self.values) - set(DATASET_SCHEMA) - set(RECALC_COLUMNS)
        if unknown:
            raise ValueError(f"unknown dataset columns: {sorted(unknown)}")
        return self

    def get(self, column: str) -> str:
        return self.values.get(column, "")

    def number(self, column: str) -> Optional[float]:
        raw = self.get(column).strip()
        if not raw:
            return None
        try:
            return float(raw)
        except ValueError:
            return None

    def as_list(self, columns: List[str] = DATASET_SCHEMA) -> List[str]:
        return [self.get(c) for c in columns]

    @property
    def dedup_key(self) -> tuple:
        return (self.get("Sample"), self.get("DOI"))


class FillRateReport(BaseModel):
    rates: Dict[str, float]
    average: float
    n_rows: int

    @model_validator(mode="after")
    def _average(self) -> "FillRateReport":
        if self.rates:
            mean = sum(self.rates.values()) / len(self.rates)
            if abs(mean - self.average) > 1e-12:
                raise ValueError("average must be the mean of the per-field rates")
        return self


class FillRateComparison(BaseModel):
    fields: List[str]
    ours: Dict[str, float]
    baseline: Dict[str, float]
    delta: Dict[str, float]
    # "ours" | "baseline" | "tie"
    better: Dict[str, str]
    average_ours: float
    average_baseline: float


class ConsistencyFlags(BaseModel):
    recalc_match: Optional[bool] = None
    spatial_ok: Optional[bool] = None
    # which comparisons were made and their absolute differences
    checks: Dict[str, float] = Field(default_factory=dict)

    def present(self) -> List[bool]:
        return [f for f in (self.recalc_match, self.spatial_ok) if f is not None]


class ConsistencyReport(BaseModel):
    flags: List[ConsistencyFlags]
    n_checked: int
    n_consistent: int
    consistency_rate: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    pearson_r: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    n_pairs: int = 0
    tolerance_eps: float
    tolerance_tdm_ma: float


class CorrelationReport(BaseModel):
    r: float = Field(ge=-1.0, le=1.0)
    n_pairs: int


class RegionExtent(BaseModel):
    name: str
    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float

    @model_validator(mode="after")
    def _ordered(self) -> "RegionExtent":
        if self.lon_max < self.lon_min or self.lat_max < self.lat_min:
            raise ValueError(f"extent {self.name!r} has inverted bounds")
        return self


class DistributionSummary(BaseModel):
    group: str
    count: int
    eps_mean: Optional[float] = None
    eps_median: Optional[float] = None
    eps_q1: Optional[float] = None
    eps_q3: Optional[float] = None
    eps_min: Optional[float] = None
    eps_max: Optional[float] = None
    tdm2_median_ga: Optional[float] = None
    baseline_count: Optional[int] = None
    improvement: Optional[float] = None
