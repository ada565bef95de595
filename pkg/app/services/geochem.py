# app/services/geochem.py
"""
Sm-Nd isotope calculators.

    f(Sm/Nd) = r147 / CHUR147 - 1
    X(t)     = X(0) - r147 * (exp(lambda * t) - 1)          (t in years)
    eps(t)   = (sample143(t) / CHUR143(t) - 1) * 1e4
    T_DM1    = ln(1 + (r143 - 0.51315) / (r147 - 0.2137)) / lambda        (Ga)
    T_DM2    = T_DM1 - (T_DM1 - t) * (f_cc - f_s) / (f_cc - f_dm)          (Ga)

All arithmetic is float64; nothing is rounded here.
"""

import logging
import math
from pathlib import Path
from typing import Callable, Dict, Optional

from pydantic import ValidationError

from app.core.errors import ConfigError, DomainError, UndefinedModelAgeError
from app.models.geochem import DerivedValues, IsotopeConstants, SmNdMeasurement, SmNdRecord
from app.utils.ini import read_ini

logger = logging.getLogger(__name__)

# the continental-crust f(Sm/Nd) as it is usually printed, without its sign
PRINTED_F_CC = 0.4


def load_constants(path: Path) -> IsotopeConstants:
    parser = read_ini(Path(path))
    if not parser.has_section("constants"):
        raise ConfigError(f"constants file {path} lacks a [constants] section")
    known = set(IsotopeConstants.model_fields)
    values: Dict[str, float] = {}
    for key, raw in parser.items("constants"):
        if key not in known:
            raise ConfigError(f"unknown constant {key!r} in {path}")
        try:
            values[key] = float(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"constant {key} = {raw!r} is not a number") from None
    try:
        constants = IsotopeConstants(**values)
    except ValidationError as exc:
        raise ConfigError(f"invalid constants in {path}: {exc}") from exc
    if constants.f_cc == constants.f_dm:
        raise ConfigError("f_cc equals f_dm; two-stage model ages are undefined")
    return constants


def f_sm_nd(r147: Optional[float], constants: IsotopeConstants) -> float:
    if r147 is None or r147 <= 0:
        raise DomainError(f"147Sm/144Nd must be positive, got {r147}")
    return r147 / constants.chur_147_144 - 1.0


def _growth(t_ma: float, constants: IsotopeConstants) -> float:
    """exp(lambda * t) - 1 for t in Ma."""
    if t_ma is None or t_ma < 0:
        raise DomainError(f"age must be >= 0 Ma, got {t_ma}")
    return math.expm1(constants.lambda_147sm_per_year * t_ma * 1e6)


def epsilon_nd(meas: SmNdMeasurement, t_ma: float, constants: IsotopeConstants) -> float:
    """εNd at t Ma; at t = 0 the 147Sm/144Nd ratio is not needed."""
    if meas.r143 is None:
        raise DomainError("143Nd/144Nd is required for εNd")
    g = _growth(t_ma, constants)
    if g != 0.0 and meas.r147 is None:
        raise DomainError("147Sm/144Nd is required for εNd(t) with t > 0")
    sample = meas.r143 - (meas.r147 or 0.0) * g
    chur = constants.chur_143_144 - constants.chur_147_144 * g
    if chur <= 0:
        raise DomainError(f"CHUR 143Nd/144Nd at {t_ma} Ma is not positive")
    return (sample / chur - 1.0) * 1e4


def t_dm1(meas: SmNdMeasurement, constants: IsotopeConstants) -> float:
    """Single-stage depleted-mantle model age in Ga."""
    if meas.r143 is None or meas.r147 is None:
        raise DomainError("T_DM1 needs both 143Nd/144Nd and 147Sm/144Nd")
    denominator = meas.r147 - constants.tdm1_dm_147_144
    if denominator == 0:
        raise UndefinedModelAgeError(f"147Sm/144Nd equals {constants.tdm1_dm_147_144}")
    argument = 1.0 + (meas.r143 - constants.dm_143_144) / denominator
    if argument <= 0:
        raise UndefinedModelAgeError(f"model age logarithm argument {argument:.6g} is not positive")
    return math.log(argument) / constants.lambda_147sm_per_year / 1e9


def t_dm2(t_dm1_ga: float, t_ma: float, f_s: float, constants: IsotopeConstants) -> float:
    """Two-stage model age in Ga; the protolith is assumed to carry the crustal f(Sm/Nd)."""
    if constants.f_cc == constants.f_dm:
        raise ConfigError("f_cc equals f_dm; two-stage model ages are undefined")
    t_ga = t_ma / 1000.0
    return t_dm1_ga - (t_dm1_ga - t_ga) * (constants.f_cc - f_s) / (constants.f_cc - constants.f_dm)


def recalculate(rec: SmNdRecord, constants: IsotopeConstants) -> DerivedValues:
    """
    Every value the record's inputs allow. Published values on the record are
    left untouched; formula domain failures become per-field flags.
    """
    m = rec.measurement
    flags: Dict[str, str] = {}

    def attempt(name: str, fn: Callable[[], float]) -> Optional[float]:
        try:
            return fn()
        except DomainError as exc:
            flags[name] = str(exc)
            logger.debug("%s: %s not derived: %s", rec.sample_id, name, exc)
            return None

    f = eps0 = eps_t = t1 = t2 = None
    if m.r147 is not None:
        f = attempt("f_sm_nd", lambda: f_sm_nd(m.r147, constants))
    if m.r143 is not None:
        eps0 = attempt("eps_nd_0", lambda: epsilon_nd(m, 0.0, constants))
    if m.r143 is not None and m.r147 is not None and m.age_ma is not None:
        eps_t = attempt("eps_nd_t", lambda: epsilon_nd(m, m.age_ma, constants))
        t1 = attempt("t_dm1", lambda: t_dm1(m, constants))
        if t1 is not None and f is not None:
            t2 = t_dm2(t1, m.age_ma, f, constants)
    return DerivedValues(f_sm_nd=f, eps_nd_0=eps0, eps_nd_t=eps_t, t_dm1_ga=t1, t_dm2_ga=t2, flags=flags)
