# app/utils/hashing.py
import hashlib
import json
from pathlib import Path
from typing import Any

_CHUNK = 1 << 20


def make_config_key(payload: Any) -> str:
    # stable JSON stringify; Paths and other objects fall back to str()
    s = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=str)
    return hashlib.sha256(s.encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(_CHUNK), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
