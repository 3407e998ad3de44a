"""Model clients: a JSON-over-HTTP adapter and a scripted mock.

Both expose ``complete(request) -> ModelResponse``. The HTTP client retries
transport failures, timeouts, 429 and 5xx with capped exponential backoff.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import requests

logger = logging.getLogger(__name__)

_request_counter = itertools.count(1)


@dataclass(frozen=True)
class DecodingParams:
    mode: str = "top_k"
    top_k: int = 40
    temperature: float = 0.8

    def __post_init__(self):
        if self.mode not in ("greedy", "top_k"):
            raise ValueError(f"unknown decoding mode {self.mode!r}")

    def to_dict(self) -> dict:
        return asdict(self)


GREEDY = DecodingParams(mode="greedy", top_k=1, temperature=0.0)
TOP_K_40 = DecodingParams()


def next_request_id() -> str:
    return f"req-{os.getpid()}-{next(_request_counter):08d}"


@dataclass(frozen=True)
class ModelRequest:
    prompt: str
    decoding: DecodingParams = GREEDY
    request_id: str = field(default_factory=next_request_id)
    max_tokens: int = 512


@dataclass(frozen=True)
class ModelResponse:
    text: str
    latency_ms: int = 0
    raw_provider_payload: Any = None


class ModelClientError(RuntimeError):
    pass


class TransportError(ModelClientError):
    pass


class HTTPStatusError(ModelClientError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"endpoint returned HTTP {status}: {body[:200]}")
        self.status = status


class ModelTimeoutError(ModelClientError):
    pass


class MalformedPayloadError(ModelClientError):
    pass


class ScriptExhaustedError(ModelClientError):
    """Mock ran out of scripted responses (a test configuration error)."""


class AuditLog:
    """Append-only JSONL log of requests and responses; safe across threads."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.Lock()

    def write(self, request: ModelRequest, response: Optional[ModelResponse], error: Optional[str] = None):
        rec = {
            "request_id": request.request_id,
            "prompt": request.prompt,
            "decoding": request.decoding.to_dict(),
            "text": response.text if response else None,
            "latency_ms": response.latency_ms if response else None,
            "error": error,
        }
        line = json.dumps(rec, ensure_ascii=False)
        with self._lock, self.path.open("a", encoding="utf-8") as f:
            f.write(line + "\n")


# provider mappers: request -> JSON body, JSON body -> text


def _generic_body(req: ModelRequest) -> dict:
    body = {"prompt": req.prompt, "max_tokens": req.max_tokens}
    if req.decoding.mode == "top_k":
        body["temperature"] = req.decoding.temperature
        body["top_k"] = req.decoding.top_k
    else:
        body["temperature"] = 0.0
    return body


def _generic_text(payload: Any) -> str:
    if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
        raise MalformedPayloadError(f"expected {{'text': str}}, got {str(payload)[:200]}")
    return payload["text"]


def _completions_body(req: ModelRequest) -> dict:
    body = _generic_body(req)
    body.pop("top_k", None)
    return body


def _completions_text(payload: Any) -> str:
    try:
        text = payload["choices"][0]["text"]
    except (KeyError, IndexError, TypeError) as e:
        raise MalformedPayloadError(f"no choices[0].text in payload: {str(payload)[:200]}") from e
    if not isinstance(text, str):
        raise MalformedPayloadError("choices[0].text is not a string")
    return text


PROVIDERS: dict[str, tuple[Callable[[ModelRequest], dict], Callable[[Any], str]]] = {
    "generic": (_generic_body, _generic_text),
    "completions": (_completions_body, _completions_text),
}


@dataclass
class HttpClientConfig:
    url: str
    token: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    provider: str = "generic"
    max_concurrency: int = 4
    audit_path: Optional[str] = None

    @classmethod
    def from_mapping(cls, d: Mapping, env: Mapping[str, str] = os.environ) -> "HttpClientConfig":
        d = dict(d)
        d.pop("type", None)
        token_env = d.pop("token_env", "LLMREFINE_API_TOKEN")
        cfg = cls(**d)
        if env.get(token_env):
            cfg.token = env[token_env]
        return cfg

    @classmethod
    def from_file(cls, path: Union[str, Path], env: Mapping[str, str] = os.environ) -> "HttpClientConfig":
        return cls.from_mapping(json.loads(Path(path).read_text("utf-8")), env)


class HttpClient:
    def __init__(self, config: HttpClientConfig, session: Optional[requests.Session] = None, sleep=time.sleep):
        if config.provider not in PROVIDERS:
            raise ValueError(f"unknown provider {config.provider!r}; known: {sorted(PROVIDERS)}")
        self.config = config
        self._session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(config.max_concurrency)
        self._sleep = sleep
        self._audit = AuditLog(config.audit_path) if config.audit_path else None

    def _headers(self) -> dict:
        h = {"Content-Type": "application/json"}
        if self.config.token:
            h["Authorization"] = f"Bearer {self.config.token}"
        return h

    def _attempt(self, request: ModelRequest) -> ModelResponse:
        to_body, to_text = PROVIDERS[self.config.provider]
        t0 = time.monotonic()
        try:
            resp = self._session.post(
                self.config.url,
                data=json.dumps(to_body(request), ensure_ascii=False).encode("utf-8"),
                headers=self._headers(),
                timeout=self.config.timeout,
            )
        except requests.Timeout as e:
            raise ModelTimeoutError(str(e)) from e
        except requests.RequestException as e:
            raise TransportError(str(e)) from e
        latency = int((time.monotonic() - t0) * 1000)
        if not 200 <= resp.status_code < 300:
            raise HTTPStatusError(resp.status_code, resp.text)
        try:
            payload = resp.json()
        except ValueError as e:
            raise MalformedPayloadError(f"response is not JSON: {resp.text[:200]}") from e
        return ModelResponse(to_text(payload), latency, payload)

    @staticmethod
    def _retryable(err: ModelClientError) -> bool:
        if isinstance(err, HTTPStatusError):
            return err.status == 429 or err.status >= 500
        return isinstance(err, (TransportError, ModelTimeoutError))

    def complete(self, request: ModelRequest) -> ModelResponse:
        attempt = 0
        with self._slots:
            while True:
                try:
                    response = self._attempt(request)
                except ModelClientError as err:
                    if not self._retryable(err) or attempt >= self.config.max_retries:
                        if self._audit:
                            self._audit.write(request, None, f"{type(err).__name__}: {err}")
                        raise
                    delay = min(self.config.backoff_cap, self.config.backoff_base * 2**attempt)
                    logger.warning("request %s failed (%s); retry %d in %.2fs",
                                   request.request_id, err, attempt + 1, delay)
                    attempt += 1
                    self._sleep(delay)
                    continue
                if self._audit:
                    self._audit.write(request, response)
                return response


Script = Union[str, Sequence[str]]


class MockClient:
    """Deterministic scripted model.

    Sequential mode returns ``script`` entries in order. Keyed mode walks
    ``keyed`` rules ``(substring, responses)`` and answers with the first
    rule whose substring occurs in the prompt; a string response repeats
    forever, a list is consumed in order.
    """

    def __init__(
        self,
        script: Optional[Sequence[str]] = None,
        keyed: Optional[Sequence[tuple[str, Script]]] = None,
        default: Optional[str] = None,
        audit_path: Optional[str] = None,
    ):
        self._script = list(script) if script is not None else None
        self._keyed = [(k, v if isinstance(v, str) else list(v)) for k, v in (keyed or [])]
        self._cursor = 0
        self._key_cursors = [0] * len(self._keyed)
        self._default = default
        self._lock = threading.Lock()
        self._audit = AuditLog(audit_path) if audit_path else None
        self.requests: list[ModelRequest] = []

    @classmethod
    def from_mapping(cls, d: Mapping) -> "MockClient":
        keyed = d.get("keyed")
        if keyed is not None:
            keyed = [(r["key"], r["response"]) for r in keyed]
        return cls(script=d.get("script"), keyed=keyed, default=d.get("default"), audit_path=d.get("audit_path"))

    def _next(self, prompt: str) -> str:
        for i, (key, responses) in enumerate(self._keyed):
            if key in prompt:
                if isinstance(responses, str):
                    return responses
                if self._key_cursors[i] >= len(responses):
                    raise ScriptExhaustedError(f"keyed script for {key!r} exhausted")
                self._key_cursors[i] += 1
                return responses[self._key_cursors[i] - 1]
        if self._script is not None and self._cursor < len(self._script):
            self._cursor += 1
            return self._script[self._cursor - 1]
        if self._default is not None:
            return self._default
        raise ScriptExhaustedError(f"no scripted response left for prompt {prompt[:80]!r}")

    def complete(self, request: ModelRequest) -> ModelResponse:
        with self._lock:
            self.requests.append(request)
            text = self._next(request.prompt)
        response = ModelResponse(text, 0, {"text": text})
        if self._audit:
            self._audit.write(request, response)
        return response


def client_from_mapping(d: Mapping, env: Mapping[str, str] = os.environ):
    kind = d.get("type", "mock")
    if kind == "http":
        return HttpClient(HttpClientConfig.from_mapping(d, env))
    if kind == "mock":
        return MockClient.from_mapping(d)
    raise ValueError(f"unknown client type {kind!r}")
