"""Backend-agnostic chat/vision model access with deterministic caching.

Two backends share one request/response shape: an HTTP backend speaking the
chat-completions wire format (base64 inline images), and a scripted backend
that replays fixture rules for offline, fully deterministic runs. Responses
are cached on disk in a content-addressed, write-once store keyed by a hash
of the request; raw image bytes never enter keys or logs, only their digests.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import re
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import (
    BackendConfigError,
    BackendUnavailableError,
    FixtureMissError,
    MalformedReplyError,
)

log = logging.getLogger(__name__)

ALLOWED_MEDIA_TYPES = ("image/png", "image/jpeg", "image/webp")

_EXTENSION_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".webp": "image/webp",
}

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ImageRef:
    """An image carried by a message, as a file path or inline bytes."""

    media_type: str
    path: Path | None = None
    data: bytes | None = None

    def __post_init__(self):
        if self.media_type not in ALLOWED_MEDIA_TYPES:
            raise ValueError(f"unsupported media type {self.media_type!r}")
        if (self.path is None) == (self.data is None):
            raise ValueError("exactly one of path or data must be set")

    @classmethod
    def from_file(cls, path: str | Path) -> ImageRef:
        path = Path(path)
        media_type = _EXTENSION_MEDIA_TYPES.get(path.suffix.lower())
        if media_type is None:
            raise ValueError(f"cannot infer media type from {path.name!r}")
        return cls(media_type=media_type, path=path)

    @classmethod
    def from_bytes(cls, data: bytes, media_type: str = "image/png") -> ImageRef:
        return cls(media_type=media_type, data=data)

    def load_bytes(self) -> bytes:
        if self.data is not None:
            return self.data
        return Path(self.path).read_bytes()

    def digest(self) -> str:
        """SHA-256 of the image content; the only form that enters cache keys."""
        return hashlib.sha256(self.load_bytes()).hexdigest()


@dataclass(frozen=True)
class Message:
    role: str
    text: str
    images: tuple[ImageRef, ...] = ()

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"invalid role {self.role!r}")
        if self.role == "assistant" and self.images:
            raise ValueError("assistant messages carry no images")
        if not self.text and not self.images:
            raise ValueError("text may be empty only if images are present")


@dataclass(frozen=True)
class ModelRequest:
    model_id: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int = 512
    seed_hint: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        first_body = 0
        while first_body < len(self.messages) and self.messages[first_body].role == "system":
            first_body += 1
        body = self.messages[first_body:]
        if any(m.role == "system" for m in body):
            raise ValueError("system messages only allowed as a prefix")
        for index, message in enumerate(body):
            expected = "user" if index % 2 == 0 else "assistant"
            if message.role != expected:
                raise ValueError(
                    f"roles must alternate user/assistant after the system prefix; "
                    f"message {index} is {message.role!r}"
                )


@dataclass(frozen=True)
class ModelResponse:
    text: str
    backend_id: str
    cached: bool = False
    latency_ms: int = 0


@dataclass(frozen=True)
class CacheKey:
    digest: str  # sha256 hex of the canonical request serialization


def cache_key_material(backend_id: str, request: ModelRequest) -> str:
    """Canonical serialization hashed into the cache key.

    Image bytes contribute only through their content digest; response-side
    metadata (latency, timestamps) never appears here.
    """
    payload = {
        "backend_id": backend_id,
        "model_id": request.model_id,
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
        "seed_hint": request.seed_hint,
        "messages": [
            {
                "role": message.role,
                "text": message.text,
                "images": [
                    {"media_type": image.media_type, "sha256": image.digest()}
                    for image in message.images
                ],
            }
            for message in request.messages
        ],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def cache_key(backend_id: str, request: ModelRequest) -> CacheKey:
    material = cache_key_material(backend_id, request)
    return CacheKey(hashlib.sha256(material.encode("utf-8")).hexdigest())


class ResponseCache:
    """Content-addressed on-disk store: one JSON file per key, write-once.

    Concurrent writers of the same key are safe; the first atomic rename wins
    and later writes are no-ops with identical content.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: CacheKey) -> Path:
        return self.root / f"{key.digest}.json"

    def get(self, key: CacheKey) -> str | None:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["text"]

    def put(self, key: CacheKey, text: str) -> None:
        path = self._path(key)
        if path.exists():
            return
        payload = json.dumps({"text": text}, ensure_ascii=False)
        fd, tmp_name = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(payload)
            os.replace(tmp_name, path)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*.json"))


class ScriptedBackend:
    """Deterministic fixture-driven backend for offline tests.

    Rules are matched in order against the text of the request's last user
    message; the first matching rule's reply is returned.
    """

    def __init__(self, rules: list[dict], backend_id: str = "scripted"):
        self.backend_id = backend_id
        self._rules = [self._compile_rule(rule, index) for index, rule in enumerate(rules)]

    @staticmethod
    def _compile_rule(rule: dict, index: int):
        match = rule.get("match")
        if not isinstance(match, dict) or len(match) != 1:
            raise BackendConfigError(
                f"fixture rule {index}: 'match' must hold exactly one of equals/contains/regex"
            )
        (kind, needle), = match.items()
        if kind not in ("equals", "contains", "regex"):
            raise BackendConfigError(f"fixture rule {index}: unknown matcher {kind!r}")
        if "reply" not in rule or not isinstance(rule["reply"], str):
            raise BackendConfigError(f"fixture rule {index}: missing string 'reply'")
        if kind == "regex":
            needle = re.compile(needle)
        return kind, needle, rule["reply"]

    @classmethod
    def from_file(cls, path: str | Path, backend_id: str = "scripted") -> ScriptedBackend:
        rules = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(rules, list):
            raise BackendConfigError(f"fixture file {path} must hold a JSON list of rules")
        return cls(rules, backend_id=backend_id)

    def complete(self, request: ModelRequest) -> str:
        target = ""
        for message in reversed(request.messages):
            if message.role == "user":
                target = message.text
                break
        for kind, needle, reply in self._rules:
            if kind == "equals" and target == needle:
                return reply
            if kind == "contains" and needle in target:
                return reply
            if kind == "regex" and needle.search(target):
                return reply
        raise FixtureMissError(
            f"no fixture rule matches the request (last user message starts "
            f"{target[:80]!r})"
        )


class HttpBackend:
    """Chat-completions HTTP backend with bounded retries.

    Retries (3 attempts, exponential backoff from 1s) apply only to transport
    errors and 5xx responses; auth and other 4xx failures are terminal.
    """

    def __init__(
        self,
        base_url: str,
        backend_id: str = "http",
        api_key_env: str | None = None,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff_s: float = 1.0,
        session: requests.Session | None = None,
        sleep=time.sleep,
    ):
        self.backend_id = backend_id
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.session = session or requests.Session()
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if not key:
                raise BackendUnavailableError(
                    f"environment variable {self.api_key_env!r} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    @staticmethod
    def _wire_message(message: Message) -> dict:
        if not message.images:
            return {"role": message.role, "content": message.text}
        parts: list[dict] = []
        if message.text:
            parts.append({"type": "text", "text": message.text})
        for image in message.images:
            encoded = base64.b64encode(image.load_bytes()).decode("ascii")
            parts.append(
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:{image.media_type};base64,{encoded}"},
                }
            )
        return {"role": message.role, "content": parts}

    def complete(self, request: ModelRequest) -> str:
        payload = {
            "model": request.model_id,
            "messages": [self._wire_message(m) for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed_hint is not None:
            payload["seed"] = request.seed_hint
        headers = self._headers()
        url = f"{self.base_url}/chat/completions"
        last_error = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                response = self.session.post(
                    url, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as err:
                last_error = f"transport error: {err}"
                log.warning("attempt %d/%d failed: %s", attempt + 1, self.max_attempts, last_error)
                continue
            if response.status_code >= 500:
                last_error = f"server error {response.status_code}"
                log.warning("attempt %d/%d failed: %s", attempt + 1, self.max_attempts, last_error)
                continue
            if response.status_code >= 400:
                raise BackendUnavailableError(
                    f"request rejected with status {response.status_code}"
                )
            try:
                return response.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as err:
                raise MalformedReplyError(f"unparseable completion payload: {err}") from err
        raise BackendUnavailableError(
            f"backend unreachable after {self.max_attempts} attempts ({last_error})"
        )


@dataclass(frozen=True)
class BackendConfig:
    backend_id: str
    kind: str  # "http" | "scripted"
    model_id: str
    base_url: str | None = None
    api_key_env: str | None = None
    fixture_path: str | None = None


def load_backend_config(path: str | Path) -> BackendConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as err:
        raise BackendConfigError(f"cannot read backend config {path}: {err}") from err
    try:
        config = BackendConfig(**raw)
    except TypeError as err:
        raise BackendConfigError(f"bad backend config {path}: {err}") from err
    if config.kind not in ("http", "scripted"):
        raise BackendConfigError(f"unknown backend kind {config.kind!r}")
    if config.kind == "http" and not config.base_url:
        raise BackendConfigError("http backend requires base_url")
    if config.kind == "scripted" and not config.fixture_path:
        raise BackendConfigError("scripted backend requires fixture_path")
    return config


def build_backend(config: BackendConfig, base_dir: str | Path = "."):
    if config.kind == "scripted":
        fixture = Path(base_dir) / config.fixture_path
        return ScriptedBackend.from_file(fixture, backend_id=config.backend_id)
    return HttpBackend(
        base_url=config.base_url,
        backend_id=config.backend_id,
        api_key_env=config.api_key_env,
    )


class ModelGateway:
    """Front door for model calls: caching, timing, and reply validation.

    Safe for concurrent use: backends are read-only after construction and
    the cache is write-once per key.
    """

    def __init__(
        self,
        backend,
        cache: ResponseCache | None = None,
        model_id: str = "default",
        temperature: float = 0.0,
        max_tokens: int = 512,
    ):
        self.backend = backend
        self.cache = cache
        self.model_id = model_id
        self.temperature = temperature
        self.max_tokens = max_tokens

    @classmethod
    def from_config(
        cls,
        config_path: str | Path,
        cache_dir: str | Path | None = None,
        temperature: float = 0.0,
        max_tokens: int = 512,
    ) -> ModelGateway:
        config_path = Path(config_path)
        config = load_backend_config(config_path)
        backend = build_backend(config, base_dir=config_path.parent)
        cache = ResponseCache(cache_dir) if cache_dir is not None else None
        return cls(
            backend,
            cache=cache,
            model_id=config.model_id,
            temperature=temperature,
            max_tokens=max_tokens,
        )

    def complete(self, request: ModelRequest) -> ModelResponse:
        key = cache_key(self.backend.backend_id, request)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                log.debug("cache hit %s model=%s", key.digest[:12], request.model_id)
                return ModelResponse(
                    text=hit, backend_id=self.backend.backend_id, cached=True, latency_ms=0
                )
        start = time.perf_counter()
        text = self.backend.complete(request)
        latency_ms = int((time.perf_counter() - start) * 1000)
        if not text.strip():
            raise MalformedReplyError("backend returned an empty reply")
        if self.cache is not None:
            self.cache.put(key, text)
        log.debug(
            "completed %s model=%s latency_ms=%d", key.digest[:12], request.model_id, latency_ms
        )
        return ModelResponse(
            text=text, backend_id=self.backend.backend_id, cached=False, latency_ms=latency_ms
        )

    def chat(
        self,
        messages: list[Message] | tuple[Message, ...],
        seed_hint: int | None = None,
        temperature: float | None = None,
        max_tokens: int | None = None,
    ) -> ModelResponse:
        request = ModelRequest(
            model_id=self.model_id,
            messages=tuple(messages),
            temperature=self.temperature if temperature is None else temperature,
            max_tokens=self.max_tokens if max_tokens is None else max_tokens,
            seed_hint=seed_hint,
        )
        return self.complete(request)
