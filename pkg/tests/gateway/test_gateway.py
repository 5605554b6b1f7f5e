from __future__ import annotations

from pathlib import Path
from typing import Any

import orjson
import pytest
import requests

from cdlgen.config import GatewayMode, ProviderConfig
from cdlgen.exceptions import ConfigError, EmptyCode, GatewayTimeout, ProviderError, ReplayMiss
from cdlgen.services import gateway as gateway_module
from cdlgen.services.gateway import (
    Cassette,
    ChatRequest,
    ChatResponse,
    Gateway,
    HttpProvider,
    ScriptedProvider,
    complete,
    extract_code,
    metrics_summary,
    read_reply_script,
    request_key,
)


class FakeResponse:
    def __init__(self, status_code: int, payload: Any) -> None:
        self.status_code = status_code
        self.ok = status_code < 400
        self.content = orjson.dumps(payload)
        self.text = self.content.decode()


def _provider_config(**overrides: Any) -> ProviderConfig:
    values: dict[str, Any] = {
        "name": "remote",
        "model_id": "model-a",
        "base_url": "https://llm.example.invalid/v1/chat",
        "auth_env_var": "CDLGEN_TEST_KEY",
    }
    values.update(overrides)
    return ProviderConfig(**values)


def _request(user_text: str = "hello") -> ChatRequest:
    return ChatRequest(model_id="model-a", system_text="system", user_text=user_text, role_id="code_generator")


def test_request_key_depends_on_model_and_texts() -> None:
    key = request_key("m", "s", "u")

    assert key == request_key("m", "s", "u")
    assert key != request_key("other", "s", "u")
    assert key != request_key("m", "s", "u ")
    assert len(key) == 64


def test_extract_code_joins_fenced_blocks() -> None:
    text = "Here you go:\n```modelica\nblock A\nend A;\n```\nand\n```\nblock B\nend B;\n```\n"

    assert extract_code(text) == "block A\nend A;\nblock B\nend B;"


def test_extract_code_without_fence_uses_whole_reply() -> None:
    assert extract_code("  block A\nend A;\n") == "block A\nend A;"


def test_extract_code_rejects_empty_reply() -> None:
    with pytest.raises(EmptyCode):
        extract_code("```\n\n```")


def test_cassette_records_read_back(tmp_path: Path) -> None:
    path = tmp_path / "calls.cassette"
    text = "line one\nline two with ümlaut\n"
    Cassette(path).append("k1", ChatResponse(text, 10, 5, 0.25, provider="remote"))

    response = Cassette(path).get("k1")

    assert response.text == text
    assert (response.prompt_tokens, response.completion_tokens, response.latency) == (10, 5, 0.25)
    assert response.from_replay


def test_cassette_keeps_the_estimated_flag(tmp_path: Path) -> None:
    path = tmp_path / "calls.cassette"
    cassette = Cassette(path)
    cassette.append("guessed", ChatResponse("a", 3, 1, 0.0, provider="script", tokens_estimated=True))
    cassette.append("reported", ChatResponse("b", 7, 2, 0.5, provider="remote"))

    again = Cassette(path)

    assert again.get("guessed").tokens_estimated
    assert not again.get("reported").tokens_estimated
    assert path.read_bytes().endswith(b"7\t2\t0.5\t0\n")


def test_three_field_tail_reads_as_reported(tmp_path: Path) -> None:
    path = tmp_path / "old.cassette"
    path.write_bytes(b"k1\n2\nok\n4\t1\t0.0\n")

    response = Cassette(path).get("k1")

    assert response.text == "ok"
    assert not response.tokens_estimated


def test_corrupt_cassette_is_rejected(tmp_path: Path) -> None:
    path = tmp_path / "bad.cassette"
    path.write_bytes(b"k1\n100\nshort\n1\t1\t0.0\n")

    with pytest.raises(ConfigError, match="corrupt"):
        Cassette(path)


@pytest.mark.usefixtures("no_network")
def test_replay_miss_names_request(tmp_path: Path) -> None:
    request = _request()

    with pytest.raises(ReplayMiss) as excinfo:
        complete(request, GatewayMode.REPLAY, cassette=Cassette(tmp_path / "empty.cassette"))
    assert excinfo.value.request_key == request.request_key


def test_record_mode_calls_provider_once(tmp_path: Path) -> None:
    provider = ScriptedProvider("script", ["first reply"])
    cassette = Cassette(tmp_path / "rec.cassette")

    first = complete(_request(), GatewayMode.RECORD, provider=provider, cassette=cassette)
    second = complete(_request(), GatewayMode.RECORD, provider=provider, cassette=cassette)

    assert first.text == second.text == "first reply"
    assert len(provider.calls) == 1
    assert second.from_replay
    assert _request().request_key in Cassette(tmp_path / "rec.cassette")


def test_exhausted_script_is_a_provider_error() -> None:
    provider = ScriptedProvider("script", [])

    with pytest.raises(ProviderError, match="exhausted"):
        complete(_request(), GatewayMode.LIVE, provider=provider)


def test_http_provider_maps_fields(monkeypatch: pytest.MonkeyPatch) -> None:
    seen: dict[str, Any] = {}

    def fake_post(url: str, data: bytes, headers: dict[str, str], timeout: float) -> FakeResponse:
        seen.update(url=url, body=orjson.loads(data), headers=headers, timeout=timeout)
        return FakeResponse(200, {"content": [{"text": "yes"}], "usage": {"input_tokens": 7, "output_tokens": 1}})

    monkeypatch.setenv("CDLGEN_TEST_KEY", "secret-value")
    monkeypatch.setattr(gateway_module.requests, "post", fake_post)
    provider = HttpProvider(
        _provider_config(
            system_field="system",
            text_path="content.0.text",
            prompt_tokens_path="usage.input_tokens",
            completion_tokens_path="usage.output_tokens",
            auth_header="x-api-key",
            auth_prefix="",
        )
    )

    response = provider.send(_request())

    assert response.text == "yes"
    assert (response.prompt_tokens, response.completion_tokens) == (7, 1)
    assert not response.tokens_estimated
    assert seen["body"]["system"] == "system"
    assert seen["body"]["messages"] == [{"role": "user", "content": "hello"}]
    assert seen["headers"]["x-api-key"] == "secret-value"


def test_http_provider_estimates_missing_token_counts(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("CDLGEN_TEST_KEY", "secret-value")
    monkeypatch.setattr(
        gateway_module.requests,
        "post",
        lambda *_args, **_kwargs: FakeResponse(200, {"choices": [{"message": {"content": "abcdefgh"}}]}),
    )

    response = HttpProvider(_provider_config()).send(_request())

    assert response.tokens_estimated
    assert response.completion_tokens == 2


def test_http_provider_reports_status(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("CDLGEN_TEST_KEY", "secret-value")
    monkeypatch.setattr(gateway_module.requests, "post", lambda *_args, **_kwargs: FakeResponse(429, {"error": "slow"}))

    with pytest.raises(ProviderError) as excinfo:
        HttpProvider(_provider_config()).send(_request())
    assert excinfo.value.status == 429


def test_http_provider_timeout(monkeypatch: pytest.MonkeyPatch) -> None:
    def fake_post(*_args: Any, **_kwargs: Any) -> FakeResponse:
        raise requests.Timeout

    monkeypatch.setenv("CDLGEN_TEST_KEY", "secret-value")
    monkeypatch.setattr(gateway_module.requests, "post", fake_post)

    with pytest.raises(GatewayTimeout):
        HttpProvider(_provider_config(timeout_s=3)).send(_request())


def test_missing_secret_is_a_config_error(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("CDLGEN_TEST_KEY", raising=False)

    with pytest.raises(ConfigError, match="CDLGEN_TEST_KEY"):
        HttpProvider(_provider_config()).headers()


def test_gateway_transcript_carries_no_secret(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    monkeypatch.setenv("CDLGEN_TEST_KEY", "secret-value")
    monkeypatch.setattr(
        gateway_module.requests,
        "post",
        lambda *_args, **_kwargs: FakeResponse(200, {"choices": [{"message": {"content": "ok"}}]}),
    )
    provider = HttpProvider(_provider_config())
    gateway = Gateway(
        GatewayMode.RECORD,
        providers={"generator": provider},
        cassette=Cassette(tmp_path / "c.cassette"),
        model_ids={"generator": "model-a"},
    )

    gateway.ask("generator", "code_generator", "system", "user")

    (entry,) = gateway.transcript()
    assert entry.model_id == "model-a"
    assert entry.text == "ok"
    assert "secret-value" not in entry.model_dump_json()
    assert b"secret-value" not in (tmp_path / "c.cassette").read_bytes()


def test_metrics_summary_groups_by_model() -> None:
    responses = [
        ChatResponse("a", 10, 4, 1.0, provider="p", model_id="m1"),
        ChatResponse("b", 20, 8, 3.0, provider="p", model_id="m1"),
        ChatResponse("c", 5, 2, 0.5, provider="p", model_id="m2", tokens_estimated=True),
    ]

    summary = metrics_summary(responses)

    assert list(summary) == ["m1", "m2"]
    assert summary["m1"].calls == 2
    assert summary["m1"].completion_tokens == 12
    assert summary["m1"].mean_completion_tokens == 6.0
    assert (summary["m1"].latency_min, summary["m1"].latency_max) == (1.0, 3.0)
    assert summary["m2"].estimated == 1


def test_reply_script_splits_on_separator(tmp_path: Path) -> None:
    path = tmp_path / "replies.script"
    path.write_text("# comment\n=== reply ===\none\n=== reply ===\ntwo\nlines\n", encoding="utf-8")

    assert read_reply_script(path) == ["one", "two\nlines"]


@pytest.mark.usefixtures("no_network")
def test_replay_serves_from_cassette_only(tmp_path: Path) -> None:
    path = tmp_path / "calls.cassette"
    request = _request()
    Cassette(path).append(request.request_key, ChatResponse("recorded", 3, 1, 0.0, provider="remote"))
    gateway = Gateway(GatewayMode.REPLAY, cassette=Cassette(path), model_ids={"generator": "model-a"})

    response = gateway.ask("generator", "code_generator", "system", "hello")

    assert response.text == "recorded"
    assert response.from_replay
    assert response.model_id == "model-a"
