# app/services/adapters/__init__.py
"""
Adapter loader.

Selection strings:
- detector: "heuristic" (built in) | "exec:<command>" | "http:<url>"
- ocr:      "none"                  | "exec:<command>" | "http:<url>"
- renderer: "pymupdf" (built in)    | "exec:<command>" | "http:<url>"

Built-in choices load as None; callers fall back to their in-process code.
"""

from typing import Any, Dict, Optional, Protocol

from app.core.config import Settings, settings
from app.core.errors import ConfigError
from app.services.adapters.http_adapter import HttpAdapter
from app.services.adapters.stdio_adapter import StdioAdapter

BUILTINS = {"detector": "heuristic", "ocr": "none", "renderer": "pymupdf"}


class Adapter(Protocol):
    name: str

    def request(self, payload: Dict[str, Any]) -> Dict[str, Any]: ...

    def close(self) -> None: ...


def load_adapter(selection: str, kind: str, cfg: Optional[Settings] = None) -> Optional[Adapter]:
    cfg = cfg or settings
    if kind not in BUILTINS:
        raise ConfigError(f"unknown adapter kind {kind!r}")
    sel = (selection or "").strip()
    if not sel or sel == BUILTINS[kind]:
        return None
    if sel.startswith("exec:"):
        return StdioAdapter(
            sel[len("exec:"):].strip(),
            timeout=cfg.ADAPTER_TIMEOUT_SEC,
            retries=cfg.ADAPTER_RETRIES,
            backoff=cfg.ADAPTER_BACKOFF_FACTOR,
            name=kind,
        )
    if sel.startswith(("http:", "https:")):
        # "http:https://host/x" and a bare "https://host/x" are both accepted
        url = sel if sel.startswith(("http://", "https://")) else sel[len("http:"):].strip()
        return HttpAdapter(
            url,
            timeout=cfg.ADAPTER_TIMEOUT_SEC,
            retries=cfg.ADAPTER_RETRIES,
            backoff=cfg.ADAPTER_BACKOFF_FACTOR,
            name=kind,
        )
    raise ConfigError(
        f"unsupported {kind} adapter {selection!r}; expected {BUILTINS[kind]!r}, 'exec:<cmd>' or 'http:<url>'"
    )


class AdapterSet:
    """The three adapters a run uses, closed together."""

    def __init__(self, cfg: Optional[Settings] = None):
        cfg = cfg or settings
        self.detector = load_adapter(cfg.DETECTOR, "detector", cfg)
        self.ocr = load_adapter(cfg.OCR_ADAPTER, "ocr", cfg)
        self.renderer = load_adapter(cfg.RENDERER, "renderer", cfg)

    def close(self) -> None:
        for adapter in (self.detector, self.ocr, self.renderer):
            if adapter is not None:
                adapter.close()

    def __enter__(self) -> "AdapterSet":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
