"""Model access: live calls, record/replay fixtures, and structured-output retries."""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, TypeVar

from .fields import FORMAT_HELP, FieldSchema, ParseError, StructuredResponse, extract_fields
from .templates import DecodingParams, PromptRequest, TemplateLibrary

__all__ = [
    "Gateway",
    "GatewayError",
    "ProviderError",
    "FixtureMiss",
    "StructuredOutputFailure",
    "FixtureStore",
    "MODES",
    "FIXTURE_SUFFIX",
]

log = logging.getLogger(__name__)

MODES = ("live", "record", "replay")
FIXTURE_SUFFIX = ".fixtures.jsonl"
REPLAY_TIMESTAMP = "1970-01-01T00:00:00+00:00"

T = TypeVar("T")

# A backend takes the request plus its rendered prompt and returns raw text.
Backend = Callable[[PromptRequest, str], str]


class GatewayError(RuntimeError):
    pass


class ProviderError(GatewayError):
    """Transport or quota failure that survived the transport retries."""


class FixtureMiss(GatewayError):
    def __init__(self, digest: str, template_id: str = ""):
        self.digest = digest
        super().__init__(f"no fixture for digest {digest} (template {template_id or '?'})")


class StructuredOutputFailure(GatewayError):
    """Every attempt at a structured call failed to parse.

    ``attempts`` holds ``(raw_response, error)`` pairs in call order.
    """

    def __init__(self, attempts):
        self.attempts = list(attempts)
        last = self.attempts[-1][1] if self.attempts else None
        super().__init__(f"structured output failed after {len(self.attempts)} attempt(s): {last}")

    @property
    def errors(self) -> list[Exception]:
        return [e for _, e in self.attempts]


class FixtureStore:
    """Append-only JSONL file of ``{"digest", "response"}`` records."""

    def __init__(self, path):
        self.path = Path(path)
        self._records: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with self.path.open(encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                        digest, response = rec["digest"], rec["response"]
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        raise ValueError(f"{self.path}:{lineno}: bad fixture record ({exc})") from None
                    self._records.setdefault(digest, response)

    def __len__(self):
        return len(self._records)

    def __contains__(self, digest):
        return digest in self._records

    def get(self, digest: str) -> str | None:
        return self._records.get(digest)

    def add(self, digest: str, response: str) -> None:
        with self._lock:
            if digest in self._records:
                return
            self._records[digest] = response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"digest": digest, "response": response}, ensure_ascii=False) + "\n")


class _Throttle:
    """Per-model in-flight cap and minimum spacing between call starts."""

    def __init__(self, max_in_flight: int | None, min_interval: float):
        self.max_in_flight = max_in_flight
        self.min_interval = min_interval
        self._sems: dict[str, threading.BoundedSemaphore] = {}
        self._last: dict[str, float] = defaultdict(float)
        self._lock = threading.Lock()

    def _sem(self, model_id):
        with self._lock:
            if model_id not in self._sems:
                self._sems[model_id] = threading.BoundedSemaphore(self.max_in_flight)
            return self._sems[model_id]

    def __call__(self, model_id, fn):
        sem = self._sem(model_id) if self.max_in_flight else None
        if sem:
            sem.acquire()
        try:
            if self.min_interval > 0:
                with self._lock:
                    wait = self._last[model_id] + self.min_interval - time.monotonic()
                    self._last[model_id] = time.monotonic() + max(wait, 0.0)
                if wait > 0:
                    time.sleep(wait)
            return fn()
        finally:
            if sem:
                sem.release()


class Gateway:
    """Single entry point for every model call in the pipeline.

    Modes:
        live:   every call goes to ``backend``.
        record: fixtures are served when present, otherwise the backend is
                called and its response appended to the fixture file.
        replay: fixtures only; a missing fixture raises :class:`FixtureMiss`
                and the backend is never touched.
    """

    def __init__(
        self,
        backend: Backend | None = None,
        mode: str = "live",
        fixtures_path=None,
        model_id: str = "default",
        templates: TemplateLibrary | None = None,
        decoding: DecodingParams | None = None,
        transport_retries: int = 3,
        backoff: float = 1.0,
        max_in_flight: int | None = None,
        min_interval: float = 0.0,
        clock: Callable[[], str] | None = None,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        if mode in ("record", "replay") and fixtures_path is None:
            raise ValueError(f"{mode} mode requires a fixtures path")
        if mode in ("live", "record") and backend is None:
            raise ValueError(f"{mode} mode requires a backend")
        self.backend = backend
        self.mode = mode
        self.model_id = model_id
        self.templates = templates or TemplateLibrary()
        self.decoding = decoding or DecodingParams()
        self.transport_retries = transport_retries
        self.backoff = backoff
        self.fixtures = FixtureStore(fixtures_path) if fixtures_path is not None else None
        self._throttle = _Throttle(max_in_flight, min_interval)
        self._clock = clock
        self.calls = 0  # backend invocations, including transport retries

    def now(self) -> str:
        if self._clock is not None:
            return self._clock()
        if self.mode == "replay":
            return REPLAY_TIMESTAMP
        return datetime.now(timezone.utc).isoformat(timespec="seconds")

    def request(self, template_id: str, slots: dict, model_id: str | None = None, decoding=None) -> PromptRequest:
        return self.templates.request(template_id, slots, model_id or self.model_id, decoding or self.decoding)

    def complete(self, request: PromptRequest) -> str:
        digest = request.digest
        if self.mode == "replay":
            response = self.fixtures.get(digest)
            if response is None:
                raise FixtureMiss(digest, request.template_id)
            return response
        if self.mode == "record":
            cached = self.fixtures.get(digest)
            if cached is not None:
                return cached
        response = self._throttle(request.model_id, lambda: self._call_backend(request))
        if self.mode == "record":
            self.fixtures.add(digest, response)
        return response

    def _call_backend(self, request: PromptRequest) -> str:
        prompt = request.prompt
        delay = self.backoff
        for attempt in range(self.transport_retries + 1):
            self.calls += 1
            try:
                return self.backend(request, prompt)
            except ProviderError as exc:
                if attempt == self.transport_retries:
                    raise
                log.warning("provider error on %s (attempt %d): %s", request.template_id, attempt + 1, exc)
                time.sleep(delay)
                delay *= 2
        raise AssertionError("unreachable")

    def complete_structured(
        self,
        request: PromptRequest,
        schema: FieldSchema,
        max_retries: int = 3,
        parse: Callable[[StructuredResponse], T] | None = None,
    ):
        """Call the model until its reply parses, re-prompting with the error.

        ``parse`` optionally converts the field map into a richer object; a
        :class:`ParseError` it raises triggers a retry like a field error.
        Returns the parsed object (or the :class:`StructuredResponse`).
        """
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        attempts = []
        current = request
        for _ in range(max_retries + 1):
            raw = self.complete(current)
            try:
                response = extract_fields(raw, schema)
                return parse(response) if parse else response
            except ParseError as exc:
                attempts.append((raw, exc))
                log.info("unparseable %s response: %s", request.template_id, exc)
                current = current.with_note(
                    f"Your previous reply could not be used: {exc}. "
                    f"Reply again with the fields {', '.join(schema.required)} "
                    f"(optional: {', '.join(schema.optional) or 'none'}).\n{FORMAT_HELP}"
                )
        raise StructuredOutputFailure(attempts)
