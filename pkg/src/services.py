# Copyright 2026 Chan Alston

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math
import time
from typing import Callable, Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np
import requests
from PySide6.QtCore import QMutex, QSemaphore

from classifier import ProbVector
from constants import (
    DEFAULT_BACKOFF_SECONDS,
    DEFAULT_MAX_IN_FLIGHT,
    DEFAULT_RETRIES,
    DEFAULT_TIMEOUT_SECONDS,
    REMOTE_PROB_SUM_TOLERANCE,
)
from errors import ProtocolError, TransportError
from logger_config import logger
from text_core import split_sentences, substitute

_RETRIABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class Translator(Protocol):
    calls: int
    latency_seconds: float

    def translate(self, text: str, source: str, target: str) -> str: ...


class HttpBackend:
    """
    JSON-over-HTTP POST with bounded retries and an in-flight request limit.

    Connection errors, timeouts, HTTP 429 and 5xx responses are retried with
    exponential backoff plus jitter. Anything else fails immediately. Instances
    are shared by all worker threads.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = DEFAULT_TIMEOUT_SECONDS,
        retries: int = DEFAULT_RETRIES,
        backoff: float = DEFAULT_BACKOFF_SECONDS,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        session: Optional[requests.Session] = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        if retries < 0:
            raise ValueError("retries must be non-negative")
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.session = session if session is not None else requests.Session()
        self._sleep = sleep
        self._in_flight = QSemaphore(max_in_flight)
        self._stats_mutex = QMutex()
        self._jitter = np.random.default_rng()
        self.calls = 0
        self.latency_seconds = 0.0

    @property
    def backend_id(self) -> str:
        return self.endpoint

    def _record(self, elapsed: float) -> None:
        self._stats_mutex.lock()
        try:
            self.calls += 1
            self.latency_seconds += elapsed
        finally:
            self._stats_mutex.unlock()

    def _backoff_delay(self, attempt: int) -> float:
        return self.backoff * (2**attempt) * (1.0 + float(self._jitter.random()))

    def post_json(self, path: str, payload: dict) -> dict:
        url = f"{self.endpoint}{path}"
        attempts = self.retries + 1
        last_problem = ""

        for attempt in range(attempts):
            self._in_flight.acquire()
            started = time.perf_counter()
            try:
                response = self.session.post(url, json=payload, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as e:
                last_problem = f"{type(e).__name__}: {e}"
                response = None
            finally:
                self._in_flight.release()
            self._record(time.perf_counter() - started)

            if response is not None:
                if response.status_code == 200:
                    try:
                        data = response.json()
                    except ValueError as e:
                        raise ProtocolError(f"response is not JSON: {e}", self.backend_id) from e
                    if not isinstance(data, dict):
                        raise ProtocolError("response is not a JSON object", self.backend_id)
                    return data
                if response.status_code not in _RETRIABLE_STATUS:
                    raise TransportError(
                        f"HTTP {response.status_code} from {url}", self.backend_id
                    )
                last_problem = f"HTTP {response.status_code}"

            if attempt + 1 < attempts:
                delay = self._backoff_delay(attempt)
                logger.warning(
                    f"Request to {url} failed ({last_problem}), retry {attempt + 1}/{self.retries} "
                    f"in {delay:.2f}s"
                )
                self._sleep(delay)

        raise TransportError(
            f"{url} failed after {attempts} attempts: {last_problem}", self.backend_id
        )


class TranslationClient(HttpBackend):
    """Client for POST /v1/translate: {"q", "from", "to"} -> {"text"}."""

    def translate(self, text: str, source: str, target: str) -> str:
        if source == target:
            raise ValueError(f"source and target language are both '{source}'")
        if not text.strip():
            raise ValueError("cannot translate an empty text")
        data = self.post_json("/v1/translate", {"q": text, "from": source, "to": target})
        translated = data.get("text")
        if not isinstance(translated, str) or not translated.strip():
            raise ProtocolError(
                f"empty translation for {source}->{target}", self.backend_id
            )
        return translated


class RemoteClassifierClient(HttpBackend):
    """Client for POST /v1/classify: {"texts": [...]} -> {"probs": [[...], ...]}."""

    def __init__(self, endpoint: str, label_names: Sequence[str], **kwargs):
        super().__init__(endpoint, **kwargs)
        self.label_names: Tuple[str, ...] = tuple(label_names)

    def classify_remote(self, texts: Sequence[str]) -> List[ProbVector]:
        if not texts:
            raise ValueError("cannot classify an empty batch")
        data = self.post_json("/v1/classify", {"texts": list(texts)})
        rows = data.get("probs")
        if not isinstance(rows, list) or len(rows) != len(texts):
            got = len(rows) if isinstance(rows, list) else type(rows).__name__
            raise ProtocolError(
                f"expected {len(texts)} probability rows, got {got}", self.backend_id
            )

        vectors: List[ProbVector] = []
        K = len(self.label_names)
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != K:
                raise ProtocolError(f"row {i} does not have {K} entries", self.backend_id)
            try:
                values = [float(v) for v in row]
            except (TypeError, ValueError) as e:
                raise ProtocolError(f"row {i} holds a non-number: {e}", self.backend_id) from e
            if not all(math.isfinite(v) and 0.0 <= v <= 1.0 for v in values):
                raise ProtocolError(f"row {i} has entries outside [0, 1]", self.backend_id)
            total = math.fsum(values)
            if abs(total - 1.0) > REMOTE_PROB_SUM_TOLERANCE:
                raise ProtocolError(f"row {i} sums to {total}", self.backend_id)
            vectors.append(ProbVector.from_scores(values, self.label_names))
        return vectors


def translate(client: Translator, text: str, source: str, target: str) -> str:
    return client.translate(text, source, target)


def classify_remote(client: RemoteClassifierClient, texts: Sequence[str]) -> List[ProbVector]:
    return client.classify_remote(texts)


class MockTranslator:
    """
    Deterministic in-process translator.

    `tables` maps (target language, lowercase token) to the token emitted in
    that language; unmapped tokens pass through unchanged. An empty table is
    the identity translator.
    """

    def __init__(self, tables: Optional[Mapping[Tuple[str, str], str]] = None):
        self.tables: Dict[Tuple[str, str], str] = {
            (lang, token.lower()): out for (lang, token), out in (tables or {}).items()
        }
        self.requests: List[Tuple[str, str, str]] = []
        self._mutex = QMutex()
        self.calls = 0
        self.latency_seconds = 0.0

    def translate(self, text: str, source: str, target: str) -> str:
        self._mutex.lock()
        try:
            self.calls += 1
            self.requests.append((text, source, target))
        finally:
            self._mutex.unlock()

        document = split_sentences(text)
        replacements = {
            i: self.tables[(target, token.normalized)]
            for i, token in enumerate(document.tokens)
            if (target, token.normalized) in self.tables
        }
        if not replacements:
            return text
        return substitute(document, replacements)


class CachedTranslator:
    """Per-run memo over another translator; counts only the calls it forwards."""

    def __init__(self, inner: Translator):
        self.inner = inner
        self._memo: Dict[Tuple[str, str, str], str] = {}
        self._mutex = QMutex()
        self.calls = 0
        self.latency_seconds = 0.0

    def translate(self, text: str, source: str, target: str) -> str:
        key = (text, source, target)
        self._mutex.lock()
        try:
            cached = self._memo.get(key)
        finally:
            self._mutex.unlock()
        if cached is not None:
            logger.debug(f"CACHE HIT: translation {source}->{target}")
            return cached

        logger.debug(f"CACHE MISS: translation {source}->{target}")
        started = time.perf_counter()
        result = self.inner.translate(text, source, target)
        elapsed = time.perf_counter() - started

        self._mutex.lock()
        try:
            self._memo[key] = result
            self.calls += 1
            self.latency_seconds += elapsed
        finally:
            self._mutex.unlock()
        return result
