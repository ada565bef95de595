# app/main.py
"""
Command line entry point.

    python -m app scan    --corpus DIR [--criteria FILE] [--meta-dir DIR]
    python -m app extract --corpus DIR --out DIR [--detector SEL] [--ocr SEL] [--dpi N]
    python -m app recalc  --in dataset.csv --out dataset_recalculated.csv [--constants FILE] [--extents FILE]
    python -m app report  --in dataset.csv --out report.txt [--extents FILE] [--baseline FILE]
    python -m app run     [--config FILE] [--corpus DIR] [--out DIR] ...

Exit codes: 0 success, 1 configuration error, 2 no document processed.
"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.core.config import Settings, configure_logging, load_settings
from app.core.errors import ConfigError, InsufficientDataError
from app.models.corpus import Issue
from app.services.dataset import RECALC_SCHEMA, read_dataset, recalc_dataset, write_dataset
from app.services.geochem import load_constants
from app.services.pipeline import EXIT_OK, EXIT_ZERO_YIELD, extract_tables, run_pipeline, scan_corpus
from app.services.reports import load_extents, write_report

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1


def _settings(args: argparse.Namespace) -> Settings:
    return load_settings(
        getattr(args, "config", None),
        CORPUS_DIR=getattr(args, "corpus", None),
        OUTPUT_DIR=getattr(args, "out_dir", None),
        META_DIR=getattr(args, "meta_dir", None),
        CRITERIA_FILE=getattr(args, "criteria", None),
        CONSTANTS_FILE=getattr(args, "constants", None),
        EXTENTS_FILE=getattr(args, "extents", None),
        DETECTOR=getattr(args, "detector", None),
        OCR_ADAPTER=getattr(args, "ocr", None),
        DPI=getattr(args, "dpi", None),
        TABLE_FORMAT=getattr(args, "format", None),
        MAX_WORKERS=getattr(args, "workers", None),
        TAGGED_PAGES_ONLY=True if getattr(args, "tagged_pages_only", False) else None,
        DEBUG_DUMP=True if getattr(args, "debug_dump", False) else None,
    )


def _require_corpus(cfg: Settings) -> None:
    if cfg.CORPUS_DIR is None:
        raise ConfigError("no corpus directory given (--corpus or CORPUS_DIR)")


def cmd_scan(args: argparse.Namespace) -> int:
    cfg = _settings(args)
    _require_corpus(cfg)
    issues: List[Issue] = []
    n_found, selected = scan_corpus(cfg, issues)
    for entry, decision, meta in selected:
        print("\t".join([
            entry.doc_id,
            str(entry.path),
            meta.doi,
            ",".join(sorted(decision.matched_group1)),
            ",".join(sorted(decision.matched_group2)),
        ]))
    logger.info("%d of %d document(s) satisfy both criteria", len(selected), n_found)
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    cfg = _settings(args)
    _require_corpus(cfg)
    outcome = asyncio.run(extract_tables(cfg))
    logger.info("%d table(s) from %d of %d document(s); index at %s",
                outcome.n_tables, outcome.n_ok, outcome.n_found, outcome.outputs.get("index"))
    return outcome.exit_code


def cmd_recalc(args: argparse.Namespace) -> int:
    cfg = _settings(args)
    constants = load_constants(cfg.CONSTANTS_FILE)
    extents = load_extents(cfg.EXTENTS_FILE) if cfg.EXTENTS_FILE else None
    rows = read_dataset(args.input)
    write_dataset(args.output, recalc_dataset(rows, constants, extents, cfg), RECALC_SCHEMA)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _settings(args)
    constants = load_constants(cfg.CONSTANTS_FILE)
    extents = load_extents(cfg.EXTENTS_FILE) if cfg.EXTENTS_FILE else None
    rows = recalc_dataset(read_dataset(args.input), constants, extents, cfg)
    baseline = read_dataset(args.baseline) if args.baseline else None
    try:
        write_report(args.output, rows, constants, extents, baseline, cfg=cfg)
    except InsufficientDataError as exc:
        logger.error("report not written: %s", exc)
        return EXIT_ZERO_YIELD
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _settings(args)
    _require_corpus(cfg)
    outcome = asyncio.run(run_pipeline(cfg))
    logger.info("%d row(s) from %d of %d selected document(s) (%d found); outputs in %s",
                outcome.n_rows, outcome.n_ok, outcome.n_selected, outcome.n_found, cfg.OUTPUT_DIR)
    return outcome.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smnd-miner", description="Sm-Nd isotope table mining from PDF literature")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="list documents that satisfy the inclusion criteria")
    scan.add_argument("--corpus", type=Path)
    scan.add_argument("--criteria", type=Path)
    scan.add_argument("--meta-dir", dest="meta_dir", type=Path)
    scan.set_defaults(func=cmd_scan)

    def processing(p: argparse.ArgumentParser) -> None:
        p.add_argument("--corpus", type=Path)
        p.add_argument("--out", dest="out_dir", type=Path)
        p.add_argument("--detector", help="heuristic | exec:<cmd> | http:<url>")
        p.add_argument("--ocr", help="none | exec:<cmd> | http:<url>")
        p.add_argument("--dpi", type=int)
        p.add_argument("--format", choices=["csv", "tsv"])
        p.add_argument("--workers", type=int)
        p.add_argument("--tagged-pages-only", dest="tagged_pages_only", action="store_true")
        p.add_argument("--debug-dump", dest="debug_dump", action="store_true")

    extract = sub.add_parser("extract", help="detect and export every table of a corpus")
    processing(extract)
    extract.set_defaults(func=cmd_extract)

    recalc = sub.add_parser("recalc", help="append recalculated values to a dataset csv")
    recalc.add_argument("--in", dest="input", type=Path, required=True)
    recalc.add_argument("--out", dest="output", type=Path, required=True)
    recalc.add_argument("--constants", type=Path)
    recalc.add_argument("--extents", type=Path)
    recalc.set_defaults(func=cmd_recalc)

    report = sub.add_parser("report", help="fill rate, consistency and correlation report")
    report.add_argument("--in", dest="input", type=Path, required=True)
    report.add_argument("--out", dest="output", type=Path, required=True)
    report.add_argument("--constants", type=Path)
    report.add_argument("--extents", type=Path)
    report.add_argument("--baseline", type=Path, help="baseline dataset csv for the fill-rate comparison")
    report.set_defaults(func=cmd_report)

    run = sub.add_parser("run", help="full pipeline")
    run.add_argument("--config", type=Path, help="KEY=VALUE settings file")
    run.add_argument("--criteria", type=Path)
    run.add_argument("--constants", type=Path)
    run.add_argument("--extents", type=Path)
    run.add_argument("--meta-dir", dest="meta_dir", type=Path)
    processing(run)
    run.set_defaults(func=cmd_run)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        base = _settings(args) if args.log_level is None else None
    except ConfigError:
        base = None
    configure_logging(args.log_level or (base.LOG_LEVEL if base else "INFO"))
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
