# app/services/pipeline.py
"""
Batch pipeline: corpus gate -> page text -> table detection -> structure
recognition -> cell content -> Sm-Nd records -> dataset and reports.

Documents are processed concurrently (bounded by MAX_WORKERS, CPU work in
threads); every output file is written afterwards, in corpus path order.

Exports:
- scan_corpus(cfg, issues) -> [(DocumentEntry, MatchDecision, ArticleMetadata)]
- process_document(entry, meta, ctx) -> DocumentResult
- extract_tables(cfg) -> RunOutcome           (no criteria gate, tables only)
- run_pipeline(cfg) -> RunOutcome             (everything)
"""

import asyncio
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field

from app.core.config import TOOL_VERSION, Settings
from app.core.errors import EmptyInventoryError, PipelineError
from app.models.corpus import ArticleMetadata, DocumentEntry, Issue, MatchDecision, QueryCriteria
from app.models.geochem import HeaderDictionary, IsotopeConstants, SmNdRecord
from app.models.page import PageRaster, TextMetrics, TextSpan
from app.models.table import TableDocument, TableRegion
from app.services.adapters import AdapterSet
from app.services.content_build import build_table, export_table, spans_in_region, write_table_index
from app.services.corpus import filter_corpus, ingest_corpus
from app.services.dataset import (
    RECALC_SCHEMA,
    dedupe_and_sort,
    integrate_metadata,
    recalc_dataset,
    write_dataset,
)
from app.services.geochem import PRINTED_F_CC, load_constants
from app.services.grid_recognize import recognize_structure, write_debug
from app.services.image_ops import crop_rect
from app.services.metadata import load_metadata
from app.services.ocr import ocr_page
from app.services.parse_utils import layout_has_text, layout_spans, page_layout
from app.services.rendering import rasterize_page
from app.services.reports import load_extents, write_report
from app.services.smnd_tables import (
    augment_record,
    build_records,
    find_header_row,
    load_header_dictionary,
)
from app.services.table_detect import detect_tables, scan_embedded_table_tags, tagged_table_boxes
from app.services.text_metrics import compute_text_metrics
from app.services.text_normalize import load_criteria
from app.utils.hashing import make_config_key

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ZERO_YIELD = 2

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass
class RunContext:
    cfg: Settings
    adapters: AdapterSet
    dictionary: Optional[HeaderDictionary] = None
    criteria: Optional[QueryCriteria] = None


class DocumentResult(BaseModel):
    entry: DocumentEntry
    meta: ArticleMetadata = Field(default_factory=ArticleMetadata)
    tables: List[TableDocument] = Field(default_factory=list)
    records: List[SmNdRecord] = Field(default_factory=list)
    issues: List[Issue] = Field(default_factory=list)
    ok: bool = True
    error: str = ""
    seconds: float = 0.0


class RunOutcome(BaseModel):
    n_found: int = 0
    n_selected: int = 0
    n_ok: int = 0
    n_failed: int = 0
    n_tables: int = 0
    n_rows: int = 0
    n_duplicates: int = 0
    outputs: Dict[str, Path] = Field(default_factory=dict)
    issues: List[Issue] = Field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.n_ok > 0 else EXIT_ZERO_YIELD


# ---------------------------------------------------------------------------
# corpus gate
# ---------------------------------------------------------------------------

Selected = List[Tuple[DocumentEntry, MatchDecision, ArticleMetadata]]


def scan_corpus(cfg: Settings, issues: List[Issue],
                criteria: Optional[QueryCriteria] = None) -> Tuple[int, Selected]:
    """(number of parseable PDFs, included documents with their decision and metadata)."""
    criteria = criteria or load_criteria(cfg.CRITERIA_FILE)
    entries = ingest_corpus(cfg.CORPUS_DIR, issues)
    loaded: Dict[str, ArticleMetadata] = {}

    def load(entry: DocumentEntry) -> ArticleMetadata:
        loaded[entry.doc_id] = load_metadata(entry, meta_dir=cfg.META_DIR, issues=issues)
        return loaded[entry.doc_id]

    selected = filter_corpus(entries, load, criteria, issues)
    return len(entries), [(entry, decision, loaded[entry.doc_id]) for entry, decision in selected]


# ---------------------------------------------------------------------------
# one document
# ---------------------------------------------------------------------------

def document_spans(entry: DocumentEntry, ctx: RunContext, issues: List[Issue]) -> Dict[int, List[TextSpan]]:
    """Embedded text per page; image-only pages go through OCR."""
    spans: Dict[int, List[TextSpan]] = {}
    for i in range(entry.page_count):
        try:
            layout = page_layout(entry.path, i)
            if layout_has_text(layout):
                spans[i] = layout_spans(layout)
            else:
                raster = rasterize_page(entry, i, ctx.cfg.DPI, ctx.adapters.renderer)
                spans[i] = ocr_page(raster, ctx.adapters.ocr, issues)
        except PipelineError as exc:
            logger.warning("%s p%d: text unavailable: %s", entry.doc_id, i, exc)
            issues.append(Issue(stage="text", doc_id=entry.doc_id, page_index=i, message=f"text unavailable: {exc}"))
            spans[i] = []
    return spans


def region_table(raster: PageRaster, region: TableRegion, region_index: int, spans: Sequence[TextSpan],
                 metrics: Optional[TextMetrics], ctx: RunContext) -> TableDocument:
    crop, rect = crop_rect(raster.pixels, region.bbox_px)
    region = region.model_copy(update={"bbox_px": rect})
    to_pdf = raster.to_pdf_transform
    inside = spans_in_region(spans, to_pdf.apply_rect(rect))
    to_px = raster.to_pixel_transform()
    boxes = [to_px.apply_rect(s.bbox).translate(-rect.x0, -rect.y0) for s in inside]

    grid = recognize_structure(crop, boxes, metrics, origin=(int(rect.x0), int(rect.y0)),
                               px_per_pt=raster.px_per_pt, cfg=ctx.cfg)
    table = build_table(region, grid, inside, to_pdf, region_index,
                        metrics.est_spacing_pt if metrics is not None else 0.0)
    if ctx.cfg.DEBUG_DUMP:
        write_debug(grid, crop, Path(ctx.cfg.OUTPUT_DIR) / "debug" / table.doc_id / table.name)
    return table


def document_tables(entry: DocumentEntry, ctx: RunContext, issues: List[Issue]) -> List[TableDocument]:
    cfg = ctx.cfg
    spans = document_spans(entry, ctx, issues)
    all_spans = [s for i in sorted(spans) for s in spans[i]]
    try:
        metrics: Optional[TextMetrics] = compute_text_metrics(all_spans, cfg.SPACING_MULTIPLIER)
    except EmptyInventoryError as exc:
        logger.warning("%s: %s; structure recognition runs on ink only", entry.doc_id, exc)
        issues.append(Issue(stage="text", doc_id=entry.doc_id, message=str(exc)))
        metrics = None

    page_texts = ["\n".join(s.text for s in spans.get(i, [])) for i in range(entry.page_count)]
    hints = scan_embedded_table_tags(entry, page_texts)
    tag_boxes = tagged_table_boxes(entry)
    if cfg.TAGGED_PAGES_ONLY:
        pages = hints
    else:
        pages = hints + [i for i in range(entry.page_count) if i not in hints]
    logger.debug("%s: table hint pages %s, scanning %d page(s)", entry.doc_id, hints, len(pages))

    tables: List[TableDocument] = []
    for page in pages:
        try:
            raster = rasterize_page(entry, page, cfg.DPI, ctx.adapters.renderer)
            regions = detect_tables(raster, spans.get(page, []), metrics, ctx.adapters.detector,
                                    tag_boxes.get(page), cfg)
        except PipelineError as exc:
            logger.warning("%s p%d: page skipped: %s", entry.doc_id, page, exc)
            issues.append(Issue(stage="detect", doc_id=entry.doc_id, page_index=page, message=str(exc)))
            continue
        for k, region in enumerate(regions):
            try:
                tables.append(region_table(raster, region, k, spans.get(page, []), metrics, ctx))
            except PipelineError as exc:
                logger.warning("%s p%d region %d skipped: %s", entry.doc_id, page, k, exc)
                issues.append(Issue(stage="structure", doc_id=entry.doc_id, page_index=page,
                                    message=f"region {k}: {exc}"))
    tables.sort(key=lambda t: (t.page_index, t.region_index))
    return tables


def document_records(tables: Sequence[TableDocument], meta: ArticleMetadata, ctx: RunContext,
                     issues: List[Issue]) -> List[SmNdRecord]:
    headed = []
    for table in tables:
        header_row, columns = find_header_row(table, ctx.dictionary, ctx.cfg)
        headed.append((table, header_row, columns))

    records: List[SmNdRecord] = []
    for table, header_row, columns in headed:
        if "r147" not in columns:
            continue
        siblings = [(t, c) for t, _, c in headed if t is not table and "sample" in c]
        for rec in build_records(table, columns, header_row, issues=issues, cfg=ctx.cfg):
            records.append(augment_record(rec, siblings, meta, ctx.criteria, issues, ctx.cfg))
    return records


def process_document(entry: DocumentEntry, meta: Optional[ArticleMetadata], ctx: RunContext,
                     with_records: bool = True) -> DocumentResult:
    """Never raises; a failure marks the result not ok."""
    started = time.perf_counter()
    result = DocumentResult(entry=entry, meta=meta or ArticleMetadata())
    try:
        result.tables = document_tables(entry, ctx, result.issues)
        if with_records:
            result.records = document_records(result.tables, result.meta, ctx, result.issues)
    except Exception as exc:
        logger.exception("%s: document failed: %s", entry.doc_id, exc)
        result.ok = False
        result.error = str(exc)
        result.issues.append(Issue(stage="document", doc_id=entry.doc_id, message=str(exc)))
    result.seconds = time.perf_counter() - started
    return result


async def process_documents(items: Sequence[Tuple[DocumentEntry, Optional[ArticleMetadata]]], ctx: RunContext,
                            with_records: bool = True) -> List[DocumentResult]:
    """Results in input order."""
    sem = asyncio.Semaphore(max(1, ctx.cfg.MAX_WORKERS))

    async def one(entry: DocumentEntry, meta: Optional[ArticleMetadata]) -> DocumentResult:
        async with sem:
            return await asyncio.to_thread(process_document, entry, meta, ctx, with_records)

    return list(await asyncio.gather(*(one(entry, meta) for entry, meta in items)))


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

@contextmanager
def run_log(path: Path) -> Iterator[Path]:
    """Mirror INFO and above into `path` for the duration of a run; console verbosity is kept."""
    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler.setLevel(logging.INFO)
    root = logging.getLogger()
    previous = root.level
    quieted = []
    if previous > logging.INFO:
        for h in root.handlers:
            if h.level == logging.NOTSET:
                h.setLevel(previous)
                quieted.append(h)
        root.setLevel(logging.INFO)
    root.addHandler(handler)
    try:
        yield path
    finally:
        root.removeHandler(handler)
        handler.close()
        root.setLevel(previous)
        for h in quieted:
            h.setLevel(logging.NOTSET)


def _log_header(cfg: Settings, constants: Optional[IsotopeConstants]) -> None:
    dumped = cfg.model_dump(mode="json")
    key = make_config_key({"version": TOOL_VERSION, "settings": dumped,
                           "constants": constants.model_dump() if constants else None})
    logger.info("sm-nd table miner %s", TOOL_VERSION)
    logger.info("config hash %s", key)
    for name in sorted(dumped):
        logger.info("setting %s = %s", name, dumped[name])
    if constants is not None:
        for name, value in constants.model_dump().items():
            logger.info("constant %s = %r", name, value)
        logger.info("f_cc printed as %s, used as %r", PRINTED_F_CC, constants.f_cc)


def _log_results(results: Sequence[DocumentResult]) -> None:
    for r in results:
        status = "ok" if r.ok else f"failed ({r.error})"
        logger.info("document %s %s: %s, %d table(s), %d record(s), %d issue(s), %.2f s",
                    r.entry.doc_id, r.entry.path.name, status, len(r.tables), len(r.records),
                    len(r.issues), r.seconds)


def _write_tables(results: Sequence[DocumentResult], out_dir: Path, fmt: str) -> Tuple[int, Path]:
    tables = [t for r in results for t in r.tables]
    for table in tables:
        export_table(table, fmt, out_dir)
    return len(tables), write_table_index(tables, out_dir, fmt)


async def extract_tables(cfg: Settings) -> RunOutcome:
    """Tables of every parseable PDF, without the criteria gate or records."""
    out_dir = Path(cfg.OUTPUT_DIR)
    outcome = RunOutcome()
    entries = ingest_corpus(cfg.CORPUS_DIR, outcome.issues)
    outcome.n_found = outcome.n_selected = len(entries)
    with AdapterSet(cfg) as adapters:
        ctx = RunContext(cfg=cfg, adapters=adapters)
        results = await process_documents([(e, None) for e in entries], ctx, with_records=False)
    _log_results(results)
    outcome.n_ok = sum(1 for r in results if r.ok)
    outcome.n_failed = len(results) - outcome.n_ok
    outcome.issues += [i for r in results for i in r.issues]
    outcome.n_tables, outcome.outputs["index"] = _write_tables(results, out_dir, cfg.TABLE_FORMAT)
    return outcome


async def run_pipeline(cfg: Settings) -> RunOutcome:
    """
    Full run. Writes under OUTPUT_DIR: tables/, tables/index.tsv,
    dataset.csv, dataset_recalculated.csv, report.txt and run.log.
    Configuration problems raise ConfigError before any document is touched.
    """
    out_dir = Path(cfg.OUTPUT_DIR)
    outcome = RunOutcome()
    criteria = load_criteria(cfg.CRITERIA_FILE)
    constants = load_constants(cfg.CONSTANTS_FILE)
    dictionary = load_header_dictionary(cfg.HEADERS_FILE)
    extents = load_extents(cfg.EXTENTS_FILE) if cfg.EXTENTS_FILE else None

    with run_log(out_dir / "run.log") as log_path:
        _log_header(cfg, constants)
        n_found, selected = scan_corpus(cfg, outcome.issues, criteria)
        outcome.n_found, outcome.n_selected = n_found, len(selected)

        with AdapterSet(cfg) as adapters:
            ctx = RunContext(cfg=cfg, adapters=adapters, dictionary=dictionary, criteria=criteria)
            results = await process_documents([(entry, meta) for entry, _, meta in selected], ctx)
        _log_results(results)
        outcome.n_ok = sum(1 for r in results if r.ok)
        outcome.n_failed = len(results) - outcome.n_ok
        outcome.n_tables, outcome.outputs["index"] = _write_tables(results, out_dir, cfg.TABLE_FORMAT)

        rows = []
        for r in results:
            if r.ok:
                rows += integrate_metadata(r.records, r.meta, r.issues, r.entry.doc_id)
            outcome.issues += r.issues
        rows, outcome.n_duplicates = dedupe_and_sort(rows)
        outcome.n_rows = len(rows)
        logger.info("dataset: %d row(s), %d duplicate(s) removed", len(rows), outcome.n_duplicates)

        outcome.outputs["dataset"] = write_dataset(out_dir / "dataset.csv", rows)
        recalculated = recalc_dataset(rows, constants, extents, cfg)
        outcome.outputs["recalculated"] = write_dataset(out_dir / "dataset_recalculated.csv", recalculated, RECALC_SCHEMA)
        outcome.outputs["report"] = write_report(out_dir / "report.txt", recalculated, constants, extents,
                                                 n_documents=outcome.n_ok, cfg=cfg)
        for issue in outcome.issues:
            logger.info("issue [%s] %s%s: %s", issue.stage, issue.doc_id or issue.path or "-",
                        "" if issue.page_index is None else f" p{issue.page_index}", issue.message)
        logger.info("run finished: %d of %d selected document(s) ok, exit code %d",
                    outcome.n_ok, outcome.n_selected, outcome.exit_code)
    outcome.outputs["log"] = log_path
    return outcome
