# app/utils/ini.py
import configparser
from pathlib import Path

from app.core.errors import ConfigError


def read_ini(path: Path, keep_case: bool = False) -> configparser.ConfigParser:
    """
    Sectioned KEY = VALUE file; bare lines are allowed so list sections hold
    one entry per line. Raises ConfigError when the file is missing or malformed.
    """
    parser = configparser.ConfigParser(allow_no_value=True, delimiters=("=",), interpolation=None)
    if keep_case:
        parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parser
