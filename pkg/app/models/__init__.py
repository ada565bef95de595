from app.models.corpus import ArticleMetadata, DocumentEntry, Issue, MatchDecision, QueryCriteria
from app.models.dataset import (
    DATASET_SCHEMA,
    RECALC_COLUMNS,
    ConsistencyFlags,
    ConsistencyReport,
    CorrelationReport,
    DatasetRow,
    FillRateReport,
    RegionExtent,
)
from app.models.geochem import (
    DerivedValues,
    HeaderDictionary,
    IsotopeConstants,
    OriginalValues,
    SmNdMeasurement,
    SmNdRecord,
)
from app.models.geometry import AffineTransform, Rect
from app.models.page import PageRaster, SpanSource, TextMetrics, TextSpan
from app.models.table import (
    BinaryImage,
    CellSpan,
    DetectionSource,
    GridModel,
    RulingLines,
    Segment,
    TableClass,
    TableDocument,
    TableRegion,
    TextAssignment,
)

__all__ = [
    "AffineTransform", "ArticleMetadata", "BinaryImage", "CellSpan", "ConsistencyFlags",
    "ConsistencyReport", "CorrelationReport", "DATASET_SCHEMA", "DatasetRow", "DerivedValues",
    "DetectionSource", "DocumentEntry", "FillRateReport", "GridModel", "HeaderDictionary",
    "IsotopeConstants", "Issue", "MatchDecision", "OriginalValues", "PageRaster",
    "QueryCriteria", "RECALC_COLUMNS", "Rect", "RegionExtent", "RulingLines", "Segment",
    "SmNdMeasurement", "SmNdRecord", "SpanSource", "TableClass", "TableDocument",
    "TableRegion", "TextAssignment", "TextMetrics", "TextSpan",
]
