# app/services/adapters/http_adapter.py
"""
HTTP adapter: POSTs the same JSON bodies the exec adapters read from stdin
and expects the same JSON answers. Retries with exponential backoff
(backoff, 2 x backoff, 4 x backoff, ...).
"""

import logging
import time
from typing import Any, Dict

import httpx

from app.core.errors import AdapterError, ProtocolError

logger = logging.getLogger(__name__)


class HttpAdapter:
    def __init__(self, url: str, timeout: float = 60.0, retries: int = 1, backoff: float = 0.5,
                 name: str = "http"):
        if not url:
            raise AdapterError("http adapter needs a URL")
        self.url = url
        self.timeout = float(timeout)
        self.retries = max(0, int(retries))
        self.backoff = float(backoff)
        self.name = name
        self._client = httpx.Client(timeout=self.timeout)

    def _post_once(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        resp = self._client.post(self.url, json=payload, headers={"Content-Type": "application/json"})
        resp.raise_for_status()
        try:
            data = resp.json()
        except ValueError as exc:
            raise ProtocolError(f"{self.name} adapter answered with non-JSON body") from exc
        if not isinstance(data, dict):
            raise ProtocolError(f"{self.name} adapter sent {type(data).__name__}, expected an object")
        return data

    def request(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        last_exc: Exception = AdapterError(f"{self.name} adapter made no attempt")
        for attempt in range(1, self.retries + 2):
            try:
                return self._post_once(payload)
            except ProtocolError:
                raise
            except httpx.HTTPError as exc:
                last_exc = exc
                if attempt <= self.retries:
                    logger.warning("%s adapter POST %s failed (%s), retrying", self.name, self.url, exc)
                    time.sleep(self.backoff * 2 ** (attempt - 1))
        raise AdapterError(f"{self.name} adapter failed after {self.retries + 1} attempts: {last_exc}") from last_exc

    def close(self) -> None:
        self._client.close()
