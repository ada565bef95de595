# app/core/config.py
import logging
from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

DEFAULT_CRITERIA_FILE = DATA_DIR / "criteria.ini"
DEFAULT_CONSTANTS_FILE = DATA_DIR / "constants.ini"
DEFAULT_HEADERS_FILE = DATA_DIR / "headers.ini"

TOOL_VERSION = "0.4.0"


class Settings(BaseSettings):
    # Inputs / outputs
    CORPUS_DIR: Optional[Path] = None
    OUTPUT_DIR: Path = Path("out")
    META_DIR: Optional[Path] = None
    CRITERIA_FILE: Path = DEFAULT_CRITERIA_FILE
    CONSTANTS_FILE: Path = DEFAULT_CONSTANTS_FILE
    HEADERS_FILE: Path = DEFAULT_HEADERS_FILE
    EXTENTS_FILE: Optional[Path] = None

    # Adapter selection: 'heuristic' | 'exec:<cmd>' | 'http:<url>' for detection,
    # 'none' | 'exec:<cmd>' | 'http:<url>' for OCR, 'pymupdf' | 'exec:<cmd>' for rendering
    DETECTOR: str = "heuristic"
    OCR_ADAPTER: str = "none"
    RENDERER: str = "pymupdf"
    ADAPTER_TIMEOUT_SEC: float = 60.0
    ADAPTER_RETRIES: int = 1
    ADAPTER_BACKOFF_FACTOR: float = 0.5

    # Page text
    DPI: int = 300
    SPACING_MULTIPLIER: float = 1.5

    # Table detection
    TAGGED_PAGES_ONLY: bool = False
    MIN_TABLE_AREA_RATIO: float = 0.01
    LONG_RULE_RATIO: float = 0.3
    MAX_RULE_GAP_RATIO: float = 0.3

    # Structure recognition
    THRESH_WINDOW_DIVISOR: int = 30
    THRESH_OFFSET: int = 10
    DARK_LEVEL: int = 96
    LINE_MIN_LENGTH_PX: int = 40
    BORDERED_SUPPORT_RATIO: float = 0.5
    EDGE_SUPPORT_RATIO: float = 0.8
    MIN_GAP_PX: int = 2
    SINGLE_LINE_FACTOR: float = 1.5

    # Sm-Nd localisation
    HEADER_FUZZY_CUTOFF: float = 90.0
    HEADER_SCAN_ROWS: int = 3
    R143_MIN: float = 0.5
    R143_MAX: float = 0.52

    # Validation
    TOLERANCE_EPS: float = 0.5
    TOLERANCE_TDM_MA: float = 50.0

    # Outputs
    TABLE_FORMAT: str = "csv"
    DEBUG_DUMP: bool = False
    MAX_WORKERS: int = 4
    LOG_LEVEL: str = "INFO"

    # Pydantic v2 settings: read from .env file; `run --config` swaps the file
    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }


def load_settings(config_file: Optional[Path] = None, **overrides) -> Settings:
    """
    Build Settings from the environment, optionally from a KEY=VALUE run file,
    then apply non-None CLI overrides.
    """
    from app.core.errors import ConfigError

    if config_file is not None:
        if not Path(config_file).is_file():
            raise ConfigError(f"config file not found: {config_file}")
        base = Settings(_env_file=str(config_file))
    else:
        base = Settings()
    update = {k: v for k, v in overrides.items() if v is not None}
    return base.model_copy(update=update) if update else base


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# single shared settings instance
settings = Settings()
