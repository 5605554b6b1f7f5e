"""Chat-completion gateway with record/replay cassettes.

Every call is single-turn: one system text and one user text. A request is
keyed by the SHA-256 of ``[model_id, system_text, user_text]`` so a cassette
recorded once replays the same pipeline run byte for byte.

Cassette records are length-prefixed UTF-8::

    <request_key>
    <byte length of text>
    <text>
    <prompt_tokens>\t<completion_tokens>\t<latency>\t<estimated>

The trailing estimated flag is 1 when the token counts were guessed from the
text length rather than reported by the provider. Older three-field tails read
as 0.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import re
import threading
import time
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import fmean
from typing import Any, Protocol

import orjson
import requests

from cdlgen.config import AppConfig, GatewayMode, ProviderConfig, ProviderKind
from cdlgen.exceptions import ConfigError, EmptyCode, GatewayTimeout, ProviderError, ReplayMiss
from cdlgen.models import TranscriptEntry

logger = logging.getLogger(__name__)

FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
REPLY_SEPARATOR = "=== reply ==="


def request_key(model_id: str, system_text: str, user_text: str) -> str:
    payload = orjson.dumps([model_id, system_text, user_text])
    return hashlib.sha256(payload).hexdigest()


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    system_text: str
    user_text: str
    max_tokens: int = 1024
    temperature: float = 0.0
    role_id: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")

    @property
    def request_key(self) -> str:
        return request_key(self.model_id, self.system_text, self.user_text)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    latency: float
    provider: str
    from_replay: bool = False
    model_id: str = ""
    tokens_estimated: bool = False

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0 or self.latency < 0:
            raise ValueError("token counts and latency must be non-negative")


def transcript_entry(request: ChatRequest, response: ChatResponse) -> TranscriptEntry:
    """Transcript row for one call; carries no credentials."""
    return TranscriptEntry(
        role_id=request.role_id,
        model_id=request.model_id,
        request_key=request.request_key,
        system_text=request.system_text,
        user_text=request.user_text,
        max_tokens=request.max_tokens,
        temperature=request.temperature,
        text=response.text,
        prompt_tokens=response.prompt_tokens,
        completion_tokens=response.completion_tokens,
        latency=response.latency,
        provider=response.provider,
        from_replay=response.from_replay,
        tokens_estimated=response.tokens_estimated,
    )


# ---------------------------------------------------------------------------
# Cassettes
# ---------------------------------------------------------------------------


class Cassette:
    """Append-only store of responses keyed by request key.

    Appends go straight to disk under a lock, so one cassette can be shared by
    sessions recording in parallel.
    """

    def __init__(self, path: Path, name: str | None = None) -> None:
        self.path = Path(path)
        self.name = name or self.path.stem
        self._records: dict[str, ChatResponse] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            for key, response in parse_cassette(self.path.read_bytes(), self.name):
                if key in self._records:
                    raise ConfigError(f"cassette {self.path} repeats request key {key}")
                self._records[key] = response
            logger.debug("Loaded %d records from cassette %s", len(self._records), self.path)

    def __contains__(self, key: object) -> bool:
        return key in self._records

    def __len__(self) -> int:
        return len(self._records)

    @property
    def keys(self) -> list[str]:
        return list(self._records)

    def get(self, key: str) -> ChatResponse:
        try:
            return self._records[key]
        except KeyError:
            raise ReplayMiss(key) from None

    def append(self, key: str, response: ChatResponse) -> None:
        with self._lock:
            if key in self._records:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("ab") as fh:
                fh.write(format_record(key, response))
            self._records[key] = response


def format_record(key: str, response: ChatResponse) -> bytes:
    text = response.text.encode("utf-8")
    estimated = int(response.tokens_estimated)
    tail = f"{response.prompt_tokens}\t{response.completion_tokens}\t{response.latency!r}\t{estimated}\n"
    return f"{key}\n{len(text)}\n".encode() + text + b"\n" + tail.encode()


def parse_cassette(data: bytes, name: str) -> list[tuple[str, ChatResponse]]:
    records = []
    pos = 0
    while pos < len(data):
        try:
            end = data.index(b"\n", pos)
            key = data[pos:end].decode("ascii")
            pos = end + 1
            end = data.index(b"\n", pos)
            size = int(data[pos:end])
            pos = end + 1
            text = data[pos : pos + size].decode("utf-8")
            pos += size
            if data[pos : pos + 1] != b"\n":
                raise ValueError("text length does not match")
            pos += 1
            end = data.index(b"\n", pos)
            fields = data[pos:end].decode("ascii").split("\t")
            if len(fields) == 3:
                fields.append("0")
            prompt_tokens, completion_tokens, latency, estimated = fields
            if estimated not in {"0", "1"}:
                raise ValueError(f"estimated flag {estimated!r} is not 0 or 1")
            pos = end + 1
        except ValueError as exc:
            raise ConfigError(f"cassette {name} is corrupt near byte {pos}: {exc}") from exc
        records.append(
            (
                key,
                ChatResponse(
                    text=text,
                    prompt_tokens=int(prompt_tokens),
                    completion_tokens=int(completion_tokens),
                    latency=float(latency),
                    provider=f"cassette:{name}",
                    from_replay=True,
                    tokens_estimated=estimated == "1",
                ),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


class Provider(Protocol):
    name: str

    def send(self, request: ChatRequest) -> ChatResponse: ...


def dig(payload: Any, path: str) -> Any:
    """Follow a dotted path of keys and list indices; None when any step is missing."""
    node = payload
    for part in path.split("."):
        if isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            return None
    return node


class HttpProvider:
    """Chat-completion endpoint described by a ``[provider.<name>]`` block."""

    def __init__(self, config: ProviderConfig) -> None:
        self.config = config
        self.name = config.name

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json", **self.config.extra_headers}
        if self.config.auth_env_var:
            secret = os.getenv(self.config.auth_env_var)
            if not secret:
                raise ConfigError(f"environment variable {self.config.auth_env_var} is not set")
            headers[self.config.auth_header] = f"{self.config.auth_prefix}{secret}"
        return headers

    def body(self, request: ChatRequest) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": request.model_id,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        if self.config.system_field == "system":
            body["system"] = request.system_text
            body["messages"] = [{"role": "user", "content": request.user_text}]
        else:
            body["messages"] = [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ]
        return body

    def send(self, request: ChatRequest) -> ChatResponse:
        started = time.perf_counter()
        try:
            response = requests.post(
                self.config.base_url,
                data=orjson.dumps(self.body(request)),
                headers=self.headers(),
                timeout=self.config.timeout_s,
            )
        except requests.Timeout:
            raise GatewayTimeout(self.config.timeout_s) from None
        except requests.RequestException as exc:
            raise ProviderError(0, str(exc)[:200]) from exc
        latency = time.perf_counter() - started
        if not response.ok:
            raise ProviderError(response.status_code, response.text[:200])
        try:
            payload = orjson.loads(response.content)
        except orjson.JSONDecodeError:
            raise ProviderError(response.status_code, response.text[:200]) from None
        text = dig(payload, self.config.text_path)
        if not isinstance(text, str):
            raise ProviderError(response.status_code, f"no text at {self.config.text_path}")
        prompt_tokens = dig(payload, self.config.prompt_tokens_path)
        completion_tokens = dig(payload, self.config.completion_tokens_path)
        estimated = not isinstance(prompt_tokens, int) or not isinstance(completion_tokens, int)
        if estimated:
            prompt_tokens = estimate_tokens(request.system_text + request.user_text)
            completion_tokens = estimate_tokens(text)
        return ChatResponse(
            text=text,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            latency=latency,
            provider=self.name,
            model_id=request.model_id,
            tokens_estimated=estimated,
        )


def read_reply_script(path: Path) -> list[str]:
    """Replies in order, each introduced by a ``=== reply ===`` line.

    Lines before the first separator are comments.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read reply script {path}: {exc}") from exc
    chunks = text.split(f"{REPLY_SEPARATOR}\n")[1:]
    if not chunks:
        raise ConfigError(f"reply script {path} holds no replies")
    return [chunk.removesuffix("\n") for chunk in chunks]


class ScriptedProvider:
    """Serves canned replies in order; never touches the network."""

    def __init__(self, name: str, replies: Iterable[str]) -> None:
        self.name = name
        self._replies = list(replies)
        self._lock = threading.Lock()
        self.calls: list[ChatRequest] = []

    @classmethod
    def from_config(cls, config: ProviderConfig) -> ScriptedProvider:
        assert config.script_path is not None  # noqa: S101
        return cls(config.name, read_reply_script(config.script_path))

    @property
    def remaining(self) -> int:
        return len(self._replies) - len(self.calls)

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            if self.remaining <= 0:
                raise ProviderError(0, f"reply script for {self.name} is exhausted")
            text = self._replies[len(self.calls)]
            self.calls.append(request)
        return ChatResponse(
            text=text,
            prompt_tokens=estimate_tokens(request.system_text + request.user_text),
            completion_tokens=estimate_tokens(text),
            latency=0.0,
            provider=self.name,
            model_id=request.model_id,
            tokens_estimated=True,
        )


def build_provider(config: ProviderConfig) -> Provider:
    if config.kind is ProviderKind.SCRIPTED:
        return ScriptedProvider.from_config(config)
    return HttpProvider(config)


# ---------------------------------------------------------------------------
# Gateway
# ---------------------------------------------------------------------------


def complete(
    request: ChatRequest,
    mode: GatewayMode,
    *,
    provider: Provider | None = None,
    cassette: Cassette | None = None,
) -> ChatResponse:
    """One chat completion in live, replay or record mode."""
    key = request.request_key
    if mode is GatewayMode.REPLAY:
        if cassette is None:
            raise ConfigError("replay mode needs a cassette")
        return replace(cassette.get(key), model_id=request.model_id)

    if provider is None:
        raise ConfigError(f"{mode} mode needs a provider")
    if mode is GatewayMode.RECORD:
        if cassette is None:
            raise ConfigError("record mode needs a cassette")
        if key in cassette:
            logger.debug("Serving %s from cassette %s", key[:12], cassette.name)
            return replace(cassette.get(key), model_id=request.model_id)

    logger.info("Calling %s (%s) for %s", provider.name, request.model_id, request.role_id or "request")
    response = provider.send(request)
    if mode is GatewayMode.RECORD:
        assert cassette is not None  # noqa: S101
        cassette.append(key, response)
    return response


@dataclass
class Gateway:
    """Per-session front end: picks the provider for a role and keeps the call log."""

    mode: GatewayMode
    providers: Mapping[str, Provider] = field(default_factory=dict)
    cassette: Cassette | None = None
    max_tokens: Mapping[str, int] = field(default_factory=dict)
    model_ids: Mapping[str, str] = field(default_factory=dict)
    calls: list[tuple[ChatRequest, ChatResponse]] = field(default_factory=list)

    @classmethod
    def from_config(cls, config: AppConfig, cassette: Cassette | None = None) -> Gateway:
        mode = config.gateway.mode
        if cassette is None and config.gateway.cassette is not None:
            if mode is GatewayMode.REPLAY and not config.gateway.cassette.exists():
                raise ConfigError(f"cassette {config.gateway.cassette} does not exist; record it first")
            cassette = Cassette(config.gateway.cassette)
        providers: dict[str, Provider] = {}
        max_tokens: dict[str, int] = {}
        if mode is not GatewayMode.REPLAY:
            built: dict[str, Provider] = {}
            for role in ("selector", "generator", "evaluator"):
                provider_config = config.provider_for(role)
                assert provider_config is not None  # noqa: S101
                if provider_config.name not in built:
                    built[provider_config.name] = build_provider(provider_config)
                providers[role] = built[provider_config.name]
                max_tokens[role] = provider_config.max_tokens
        model_ids = {role: config.model_id_for(role) for role in ("selector", "generator", "evaluator")}
        return cls(mode, providers, cassette, max_tokens, model_ids)

    def request(self, role: str, role_id: str, system_text: str, user_text: str) -> ChatRequest:
        return ChatRequest(
            model_id=self.model_ids.get(role, role),
            system_text=system_text,
            user_text=user_text,
            max_tokens=self.max_tokens.get(role, 1024),
            role_id=role_id,
        )

    def ask(self, role: str, role_id: str, system_text: str, user_text: str) -> ChatResponse:
        request = self.request(role, role_id, system_text, user_text)
        response = complete(request, self.mode, provider=self.providers.get(role), cassette=self.cassette)
        self.calls.append((request, response))
        return response

    def transcript(self) -> list[TranscriptEntry]:
        return [transcript_entry(request, response) for request, response in self.calls]


def extract_code(response_text: str) -> str:
    """Fenced code blocks joined in order, or the whole text when there are none."""
    blocks = FENCE.findall(response_text)
    code = "\n".join(block.rstrip() for block in blocks).strip() if blocks else response_text.strip()
    if not code:
        raise EmptyCode
    return code


@dataclass(frozen=True)
class ModelMetrics:
    calls: int
    prompt_tokens: int
    completion_tokens: int
    mean_completion_tokens: float
    latency_mean: float
    latency_min: float
    latency_max: float
    estimated: int

    def as_dict(self) -> dict[str, float | int]:
        return {
            "calls": self.calls,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "mean_completion_tokens": self.mean_completion_tokens,
            "latency_mean": self.latency_mean,
            "latency_min": self.latency_min,
            "latency_max": self.latency_max,
            "estimated": self.estimated,
        }


def metrics_summary(responses: Iterable[ChatResponse]) -> dict[str, ModelMetrics]:
    grouped: dict[str, list[ChatResponse]] = {}
    for response in responses:
        grouped.setdefault(response.model_id, []).append(response)
    summary = {}
    for model_id in sorted(grouped):
        group = grouped[model_id]
        latencies = [r.latency for r in group]
        summary[model_id] = ModelMetrics(
            calls=len(group),
            prompt_tokens=sum(r.prompt_tokens for r in group),
            completion_tokens=sum(r.completion_tokens for r in group),
            mean_completion_tokens=fmean(r.completion_tokens for r in group),
            latency_mean=fmean(latencies),
            latency_min=min(latencies),
            latency_max=max(latencies),
            estimated=sum(r.tokens_estimated for r in group),
        )
    return summary
