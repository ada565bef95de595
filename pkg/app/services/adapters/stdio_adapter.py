# app/services/adapters/stdio_adapter.py
"""
Long-lived child process speaking line-delimited JSON over stdio.

One request line in, one response line out. A child that times out, dies or
answers with something that is not JSON is killed; the next request starts a
fresh one. Requests are serialized with a lock so one adapter can be shared by
worker threads.
"""

import json
import logging
import queue
import shlex
import subprocess
import threading
import time
from typing import Any, Dict, List, Optional

from app.core.errors import AdapterError, ProtocolError

logger = logging.getLogger(__name__)

_EOF = object()


class StdioAdapter:
    def __init__(self, command: str, timeout: float = 60.0, retries: int = 1, backoff: float = 0.5,
                 name: str = "exec"):
        self.argv: List[str] = shlex.split(command)
        if not self.argv:
            raise AdapterError("exec adapter needs a command")
        self.timeout = float(timeout)
        self.retries = max(0, int(retries))
        self.backoff = float(backoff)
        self.name = name
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Any]" = queue.Queue()
        self._lock = threading.Lock()

    def _start(self) -> None:
        logger.info("Starting %s adapter: %s", self.name, self.argv)
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            self._proc = None
            raise AdapterError(f"{self.name} adapter could not start {self.argv[0]}: {exc}") from exc
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc, self._lines), daemon=True).start()

    @staticmethod
    def _pump(proc: subprocess.Popen, lines: "queue.Queue[Any]") -> None:
        try:
            for line in proc.stdout:
                lines.put(line)
        except Exception:
            pass
        lines.put(_EOF)

    def _kill(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.kill()
            proc.wait(timeout=5)
        except Exception:
            logger.exception("Failed to reap %s adapter child", self.name)

    def _exchange(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        if self._proc is None or self._proc.poll() is not None:
            self._kill()
            self._start()
        try:
            self._proc.stdin.write(json.dumps(payload, sort_keys=True) + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            self._kill()
            raise AdapterError(f"{self.name} adapter pipe closed: {exc}") from exc

        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._kill()
                raise AdapterError(f"{self.name} adapter timed out after {self.timeout}s")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                continue
            if line is _EOF:
                self._kill()
                raise AdapterError(f"{self.name} adapter exited without answering")
            if line.strip():
                break
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            self._kill()
            raise ProtocolError(f"{self.name} adapter sent non-JSON line: {line[:200]!r}") from exc
        if not isinstance(data, dict):
            raise ProtocolError(f"{self.name} adapter sent {type(data).__name__}, expected an object")
        return data

    def request(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        with self._lock:
            attempt = 0
            while True:
                try:
                    return self._exchange(payload)
                except ProtocolError:
                    raise
                except AdapterError:
                    attempt += 1
                    if attempt > self.retries:
                        raise
                    logger.warning("%s adapter failed, restarting (attempt %d)", self.name, attempt)
                    time.sleep(self.backoff * 2 ** (attempt - 1))

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                try:
                    self._proc.stdin.close()
                    self._proc.wait(timeout=2)
                except Exception:
                    pass
            self._kill()
