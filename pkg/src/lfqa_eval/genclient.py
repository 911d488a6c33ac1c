"""Pluggable text-generation backends.

Two kinds: ``http`` speaks the common chat-completion JSON protocol
(bearer-token auth, ``model``/``messages``/``temperature``/``n``/
``max_tokens`` body, ``choices[i].message.content`` responses); ``scripted``
replays fixtures from a directory keyed by the SHA-256 digest of the exact
prompt text, for deterministic tests and offline runs.

Transient transport failures (connection errors, timeouts, 429, 5xx) are
retried with exponential backoff; authentication and response-schema errors
never are. Credential values are read from a named environment variable and
never appear in error messages.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import requests

BACKOFF_BASE = 0.5  # seconds; doubles on each retry


class GenerationError(RuntimeError):
    pass


class CredentialError(GenerationError):
    pass


class FixtureError(GenerationError):
    pass


class FixtureConflictError(FixtureError):
    pass


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_tokens: int
    temperature: float
    n_samples: int = 1
    stop_sequences: tuple[str, ...] = ()
    metadata: str = ""  # caller's record id, for logs only

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass
class GenerationResult:
    texts: list[str]
    backend_id: str
    latency: float
    truncated: list[bool]


@dataclass(frozen=True)
class BackendConfig:
    kind: str  # "http" or "scripted"
    endpoint_url: str = ""
    model_name: str = ""
    auth_env: str = ""  # name of the env var holding the credential; "" = no auth
    timeout: float = 60.0
    max_retries: int = 2
    max_in_flight: int = 4
    fixture_dir: str = ""
    native_n: bool = True  # server honors the n parameter; else fan out n calls

    def validate(self) -> None:
        if self.kind == "http":
            if not self.endpoint_url or not self.model_name:
                raise ValueError("http backend requires endpoint_url and model_name")
        elif self.kind == "scripted":
            if not self.fixture_dir:
                raise ValueError("scripted backend requires fixture_dir")
        else:
            raise ValueError(f"unknown backend kind '{self.kind}'")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


# ---------------------------------------------------------------------------
# Fixture store


class FixtureStore:
    """Directory of digest-named JSON files mapping a prompt to its replies."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @staticmethod
    def digest(prompt: str) -> str:
        return hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    def path_for(self, prompt: str) -> Path:
        return self.root / f"{self.digest(prompt)}.json"

    def record(self, prompt: str, texts: list[str]) -> None:
        if not texts:
            raise ValueError("fixture texts must be non-empty")
        path = self.path_for(prompt)
        if path.exists():
            existing = json.loads(path.read_text(encoding="utf-8"))
            if existing.get("texts") != list(texts):
                raise FixtureConflictError(
                    f"fixture {path.name} already recorded with a different payload"
                )
            return
        self.root.mkdir(parents=True, exist_ok=True)
        payload = {"prompt": prompt, "texts": list(texts)}
        path.write_text(
            json.dumps(payload, ensure_ascii=False, indent=None), encoding="utf-8"
        )

    def lookup(self, prompt: str) -> list[str]:
        path = self.path_for(prompt)
        if not path.exists():
            raise FixtureError(f"no fixture for prompt digest {self.digest(prompt)}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        texts = payload.get("texts")
        if not isinstance(texts, list) or not texts:
            raise FixtureError(f"fixture {path.name} has no texts")
        return [str(t) for t in texts]


def record_fixture(store: FixtureStore, prompt: str, texts: list[str]) -> None:
    store.record(prompt, texts)


# ---------------------------------------------------------------------------
# Client


class GenerationClient:
    """Thread-safe client for one backend; at most max_in_flight live requests."""

    def __init__(self, config: BackendConfig):
        config.validate()
        self.config = config
        self._sem = threading.BoundedSemaphore(config.max_in_flight)
        self._store = (
            FixtureStore(config.fixture_dir) if config.kind == "scripted" else None
        )

    # -- scripted ----------------------------------------------------------

    def _scripted_generate(self, request: GenerationRequest) -> GenerationResult:
        entries = self._store.lookup(request.prompt)
        texts = [entries[i % len(entries)] for i in range(request.n_samples)]
        return GenerationResult(
            texts=texts,
            backend_id="scripted",
            latency=0.0,
            truncated=[False] * request.n_samples,
        )

    # -- http ----------------------------------------------------------------

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env:
            credential = os.environ.get(self.config.auth_env, "")
            if not credential:
                raise CredentialError(
                    f"credential environment variable '{self.config.auth_env}' is not set"
                )
            headers["Authorization"] = f"Bearer {credential}"
        return headers

    def _body(self, request: GenerationRequest, n: int) -> dict:
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if n > 1:
            body["n"] = n
        if request.stop_sequences:
            body["stop"] = list(request.stop_sequences)
        return body

    def _post_with_retries(self, body: dict, headers: dict) -> dict:
        attempt = 0
        while True:
            transient: str | None = None
            try:
                with self._sem:
                    response = requests.post(
                        self.config.endpoint_url,
                        json=body,
                        headers=headers,
                        timeout=self.config.timeout,
                    )
            except (requests.ConnectionError, requests.Timeout) as exc:
                transient = type(exc).__name__
            else:
                status = response.status_code
                if status in (401, 403):
                    raise CredentialError(
                        f"authentication rejected (HTTP {status}); check the "
                        f"'{self.config.auth_env or 'unset'}' credential"
                    )
                if status == 429 or status >= 500:
                    transient = f"HTTP {status}"
                elif status >= 400:
                    raise GenerationError(f"HTTP {status}: {response.text[:200]}")
                else:
                    try:
                        return response.json()
                    except ValueError:
                        raise GenerationError(
                            "response schema violation: body is not JSON"
                        ) from None
            attempt += 1
            if attempt > self.config.max_retries:
                raise GenerationError(
                    f"transport failure after {attempt} attempts ({transient})"
                )
            time.sleep(BACKOFF_BASE * 2 ** (attempt - 1))

    @staticmethod
    def _extract(data: dict, expected_n: int) -> tuple[list[str], list[bool]]:
        choices = data.get("choices") if isinstance(data, dict) else None
        if not isinstance(choices, list) or len(choices) != expected_n:
            found = len(choices) if isinstance(choices, list) else "none"
            raise GenerationError(
                f"response schema violation: expected {expected_n} choices, found {found}"
            )
        texts, truncated = [], []
        for choice in choices:
            message = choice.get("message") if isinstance(choice, dict) else None
            content = message.get("content") if isinstance(message, dict) else None
            if not isinstance(content, str):
                raise GenerationError(
                    "response schema violation: choice without message.content"
                )
            texts.append(content)
            truncated.append(choice.get("finish_reason") == "length")
        return texts, truncated

    def _http_generate(self, request: GenerationRequest) -> GenerationResult:
        headers = self._headers()  # raises before any network I/O
        backend_id = f"http:{self.config.model_name}"
        start = time.monotonic()
        if self.config.native_n or request.n_samples == 1:
            data = self._post_with_retries(self._body(request, request.n_samples), headers)
            texts, truncated = self._extract(data, request.n_samples)
        else:
            body = self._body(request, 1)
            with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
                futures = [
                    pool.submit(self._post_with_retries, dict(body), headers)
                    for _ in range(request.n_samples)
                ]
                texts, truncated = [], []
                for future in futures:  # submission order, not completion order
                    t, trunc = self._extract(future.result(), 1)
                    texts.extend(t)
                    truncated.extend(trunc)
        return GenerationResult(
            texts=texts,
            backend_id=backend_id,
            latency=time.monotonic() - start,
            truncated=truncated,
        )

    def generate(self, request: GenerationRequest) -> GenerationResult:
        if self.config.kind == "scripted":
            return self._scripted_generate(request)
        return self._http_generate(request)


def generate(config: BackendConfig, request: GenerationRequest) -> GenerationResult:
    """One-shot convenience wrapper around GenerationClient."""
    return GenerationClient(config).generate(request)
