# app/services/reports.py
"""
Validation reports over dataset rows: fill rate, recalculation consistency,
spatial check, εNd(t) vs T_DM2 correlation and per-region distributions.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from app.core.config import Settings, settings
from app.core.errors import ConfigError, InsufficientDataError
from app.models.dataset import (
    DATASET_SCHEMA,
    ConsistencyFlags,
    ConsistencyReport,
    CorrelationReport,
    DatasetRow,
    DistributionSummary,
    FillRateComparison,
    FillRateReport,
    RegionExtent,
)
from app.models.geochem import DerivedValues, IsotopeConstants, SmNdMeasurement, SmNdRecord
from app.services.geochem import recalculate
from app.utils.ini import read_ini

logger = logging.getLogger(__name__)

DEFAULT_EXTENT = "default"
UNASSIGNED = "(unassigned)"
GROUP_COLUMN = "Nation/Region/GeoTectonic unit/Groups"


def compute_fill_rate(rows: Sequence[DatasetRow], fields: Sequence[str] = DATASET_SCHEMA) -> FillRateReport:
    if not rows:
        raise InsufficientDataError("fill rate of an empty dataset")
    n = len(rows)
    rates = {f: sum(1 for r in rows if r.get(f).strip()) / n for f in fields}
    average = sum(rates.values()) / len(rates) if rates else 0.0
    return FillRateReport(rates=rates, average=average, n_rows=n)


def compare_fill_rates(ours: FillRateReport, baseline: FillRateReport) -> FillRateComparison:
    fields = [f for f in ours.rates if f in baseline.rates]
    delta = {f: ours.rates[f] - baseline.rates[f] for f in fields}
    better = {f: "ours" if d > 0 else "baseline" if d < 0 else "tie" for f, d in delta.items()}
    return FillRateComparison(
        fields=fields,
        ours={f: ours.rates[f] for f in fields},
        baseline={f: baseline.rates[f] for f in fields},
        delta=delta,
        better=better,
        average_ours=ours.average,
        average_baseline=baseline.average,
    )


def measurement_from_row(row: DatasetRow) -> SmNdMeasurement:
    """Inputs for recalculation; values outside their domain are left out."""
    values = {
        "sm_ppm": row.number("Sm"),
        "nd_ppm": row.number("Nd"),
        "r147": row.number("147Sm/144Nd"),
        "r143": row.number("143Nd/144Nd"),
        "two_sigma": row.number("2σ"),
        "age_ma": row.number("Age (Ma)"),
    }
    for key in ("r147", "age_ma"):
        try:
            SmNdMeasurement(**{key: values[key]})
        except ValidationError:
            logger.debug("row %s: %s=%s outside its domain", row.get("Sample"), key, values[key])
            values[key] = None
    return SmNdMeasurement(**values)


def recalculate_row(row: DatasetRow, constants: IsotopeConstants) -> DerivedValues:
    rec = SmNdRecord(sample_id=row.get("Sample") or "?", measurement=measurement_from_row(row))
    return recalculate(rec, constants)


def consistency_check(
    row: DatasetRow,
    tolerance_eps: float,
    tolerance_tdm_ma: float,
    constants: IsotopeConstants,
    derived: Optional[DerivedValues] = None,
) -> ConsistencyFlags:
    """
    Published εNd(t), TDM1 and TDM2 (Ma) against recalculated values; each
    comparison is made only when both sides exist. No comparison -> absent flag.
    """
    derived = derived or recalculate_row(row, constants)
    pairs: List[Tuple[str, Optional[float], Optional[float], float]] = [
        ("eps_nd_t", row.number("εNd(t)"), derived.eps_nd_t, tolerance_eps),
        ("t_dm1_ma", row.number("TDM1"), None if derived.t_dm1_ga is None else derived.t_dm1_ga * 1000.0,
         tolerance_tdm_ma),
        ("t_dm2_ma", row.number("TDM2"), None if derived.t_dm2_ga is None else derived.t_dm2_ga * 1000.0,
         tolerance_tdm_ma),
    ]
    checks: Dict[str, float] = {}
    ok = True
    for name, published, recalculated, tolerance in pairs:
        if published is None or recalculated is None:
            continue
        diff = abs(recalculated - published)
        checks[name] = diff
        ok = ok and diff <= tolerance
    return ConsistencyFlags(recalc_match=ok if checks else None, checks=checks)


def spatial_check(longitude: Optional[float], latitude: Optional[float], extent: RegionExtent) -> Optional[bool]:
    if longitude is None or latitude is None:
        return None
    return extent.lon_min <= longitude <= extent.lon_max and extent.lat_min <= latitude <= extent.lat_max


def load_extents(path: Path) -> Dict[str, RegionExtent]:
    parser = read_ini(Path(path), keep_case=True)
    extents: Dict[str, RegionExtent] = {}
    for section in parser.sections():
        try:
            bounds = {k: float(parser.get(section, k)) for k in ("lon_min", "lon_max", "lat_min", "lat_max")}
            extents[section] = RegionExtent(name=section, **bounds)
        except Exception as exc:
            raise ConfigError(f"extent [{section}] in {path}: {exc}") from exc
    if not extents:
        raise ConfigError(f"no extents defined in {path}")
    return extents


def extent_for(row: DatasetRow, extents: Optional[Dict[str, RegionExtent]]) -> Optional[RegionExtent]:
    """Extent named like the row's GeoTectonic unit, else the default one."""
    if not extents:
        return None
    unit = " ".join(row.get(GROUP_COLUMN).split()).lower()
    for name, extent in extents.items():
        if name.lower() == unit and name != DEFAULT_EXTENT:
            return extent
    return extents.get(DEFAULT_EXTENT)


def row_flags(row: DatasetRow, constants: IsotopeConstants, extents: Optional[Dict[str, RegionExtent]],
              cfg: Optional[Settings] = None, derived: Optional[DerivedValues] = None) -> ConsistencyFlags:
    cfg = cfg or settings
    flags = consistency_check(row, cfg.TOLERANCE_EPS, cfg.TOLERANCE_TDM_MA, constants, derived)
    extent = extent_for(row, extents)
    if extent is not None:
        flags.spatial_ok = spatial_check(row.number("Longitude"), row.number("Latitude"), extent)
    return flags


def _eps(row: DatasetRow) -> Optional[float]:
    value = row.number("Calc. εNd(t)")
    return row.number("εNd(t)") if value is None else value


def _pairs(rows: Iterable[DatasetRow]) -> Tuple[np.ndarray, np.ndarray]:
    """(εNd(t), T_DM2 in Ga) pairs, recalculated values preferred over published ones."""
    eps, tdm = [], []
    for row in rows:
        e = _eps(row)
        t = row.number("Calc. TDM2 (Ga)")
        if t is None:
            published = row.number("TDM2")
            t = None if published is None else published / 1000.0
        if e is not None and t is not None:
            eps.append(e)
            tdm.append(t)
    return np.asarray(eps, dtype=np.float64), np.asarray(tdm, dtype=np.float64)


def correlation_report(rows: Sequence[DatasetRow]) -> CorrelationReport:
    eps, tdm = _pairs(rows)
    if eps.size < 3:
        raise InsufficientDataError(f"correlation needs >= 3 εNd(t)/T_DM2 pairs, got {eps.size}")
    de, dt = eps - eps.mean(), tdm - tdm.mean()
    denom = float(np.sqrt((de * de).sum() * (dt * dt).sum()))
    if denom == 0.0:
        raise InsufficientDataError("εNd(t) or T_DM2 has zero variance")
    r = float((de * dt).sum()) / denom
    return CorrelationReport(r=max(-1.0, min(1.0, r)), n_pairs=int(eps.size))


def consistency_report(
    rows: Sequence[DatasetRow],
    constants: IsotopeConstants,
    extents: Optional[Dict[str, RegionExtent]] = None,
    cfg: Optional[Settings] = None,
) -> ConsistencyReport:
    cfg = cfg or settings
    flags = [row_flags(r, constants, extents, cfg) for r in rows]
    checked = [f for f in flags if f.present()]
    consistent = [f for f in checked if all(f.present())]
    try:
        corr = correlation_report(rows)
        pearson, n_pairs = corr.r, corr.n_pairs
    except InsufficientDataError as exc:
        logger.info("no correlation: %s", exc)
        pearson, n_pairs = None, 0
    return ConsistencyReport(
        flags=flags,
        n_checked=len(checked),
        n_consistent=len(consistent),
        consistency_rate=len(consistent) / len(checked) if checked else None,
        pearson_r=pearson,
        n_pairs=n_pairs,
        tolerance_eps=cfg.TOLERANCE_EPS,
        tolerance_tdm_ma=cfg.TOLERANCE_TDM_MA,
    )


def _group(row: DatasetRow) -> str:
    return " ".join(row.get(GROUP_COLUMN).split()) or UNASSIGNED


def distribution_summary(rows: Sequence[DatasetRow],
                         baseline: Optional[Sequence[DatasetRow]] = None) -> List[DistributionSummary]:
    """εNd(t) and T_DM2 statistics per GeoTectonic unit, with record gain over a baseline."""
    groups: Dict[str, List[DatasetRow]] = {}
    for row in rows:
        groups.setdefault(_group(row), []).append(row)
    base_counts: Dict[str, int] = {}
    for row in baseline or []:
        base_counts[_group(row)] = base_counts.get(_group(row), 0) + 1

    out = []
    for name in sorted(groups):
        members = groups[name]
        _, tdm = _pairs(members)
        all_eps = [v for v in (_eps(r) for r in members) if v is not None]
        summary = DistributionSummary(group=name, count=len(members))
        if all_eps:
            values = np.asarray(all_eps, dtype=np.float64)
            q1, median, q3 = np.percentile(values, [25, 50, 75])
            summary.eps_mean = float(values.mean())
            summary.eps_median = float(median)
            summary.eps_q1 = float(q1)
            summary.eps_q3 = float(q3)
            summary.eps_min = float(values.min())
            summary.eps_max = float(values.max())
        if tdm.size:
            summary.tdm2_median_ga = float(np.median(tdm))
        if baseline is not None:
            base = base_counts.get(name, 0)
            summary.baseline_count = base
            summary.improvement = (len(members) - base) / base if base else None
        out.append(summary)
    return out


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def write_report(
    path: Path,
    rows: Sequence[DatasetRow],
    constants: IsotopeConstants,
    extents: Optional[Dict[str, RegionExtent]] = None,
    baseline: Optional[Sequence[DatasetRow]] = None,
    n_documents: Optional[int] = None,
    cfg: Optional[Settings] = None,
) -> Path:
    """Plain-text validation report."""
    cfg = cfg or settings
    lines: List[str] = ["# Sm-Nd dataset report", ""]
    if n_documents is not None:
        lines.append(f"documents processed: {n_documents}")
    lines.append(f"rows: {len(rows)}")
    lines.append(f"tolerances: εNd {cfg.TOLERANCE_EPS} ε-units, T_DM {cfg.TOLERANCE_TDM_MA} Ma")
    lines.append("")

    if not rows:
        lines.append("no rows; fill rate, consistency and correlation not computed")
    else:
        fill = compute_fill_rate(rows)
        lines.append("## fill rate")
        if baseline:
            comparison = compare_fill_rates(fill, compute_fill_rate(baseline))
            lines.append("field\tours\tbaseline\tdelta\tbetter")
            for f in comparison.fields:
                lines.append(f"{f}\t{comparison.ours[f]:.3f}\t{comparison.baseline[f]:.3f}\t"
                             f"{comparison.delta[f]:+.3f}\t{comparison.better[f]}")
            lines.append(f"Average\t{comparison.average_ours:.3f}\t{comparison.average_baseline:.3f}")
        else:
            for f, rate in fill.rates.items():
                lines.append(f"{f}\t{rate:.3f}")
            lines.append(f"Average\t{fill.average:.3f}")
        lines.append("")

        report = consistency_report(rows, constants, extents, cfg)
        lines.append("## consistency")
        lines.append(f"rows checked: {report.n_checked}")
        lines.append(f"rows consistent: {report.n_consistent}")
        lines.append(f"consistency rate: {_fmt(report.consistency_rate)}")
        lines.append(f"pearson r (εNd(t) vs T_DM2): {_fmt(report.pearson_r)} over {report.n_pairs} pairs")
        lines.append("")

        lines.append("## εNd(t) by region")
        lines.append("group\tcount\tmean\tq1\tmedian\tq3\tmin\tmax\tTDM2 median (Ga)\tbaseline\timprovement")
        for s in distribution_summary(rows, baseline):
            lines.append("\t".join([
                s.group, str(s.count), _fmt(s.eps_mean, 2), _fmt(s.eps_q1, 2), _fmt(s.eps_median, 2),
                _fmt(s.eps_q3, 2), _fmt(s.eps_min, 2), _fmt(s.eps_max, 2), _fmt(s.tdm2_median_ga, 2),
                "n/a" if s.baseline_count is None else str(s.baseline_count), _fmt(s.improvement, 3),
            ]))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
