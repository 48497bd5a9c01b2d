"""Backend contracts: scripted mocks, script files, the HTTP wire client."""

from __future__ import annotations

import json

import pytest
import requests

from boxtask.backends import (
    BackendConfig,
    BackendError,
    ChatMessage,
    HttpBackend,
    ScriptedBackend,
    ScriptExhaustedError,
    backend_from_spec,
    mock_from_script,
)

MESSAGES = [ChatMessage("system", "sys"), ChatMessage("user", "hello")]


class TestChatMessage:
    def test_rejects_empty_content(self):
        with pytest.raises(ValueError):
            ChatMessage("user", "")

    def test_rejects_bad_role(self):
        with pytest.raises(ValueError):
            ChatMessage("tool", "x")


class TestScriptedBackend:
    def test_replays_in_order(self):
        backend = ScriptedBackend(["color_match", "shape_match"])
        assert backend.complete(MESSAGES) == "color_match"
        assert backend.complete(MESSAGES) == "shape_match"

    def test_exhaustion(self):
        backend = ScriptedBackend(["only"])
        backend.complete(MESSAGES)
        with pytest.raises(ScriptExhaustedError):
            backend.complete(MESSAGES)

    def test_empty_script_raises_immediately(self):
        with pytest.raises(ScriptExhaustedError):
            ScriptedBackend([]).complete(MESSAGES)

    def test_n_items_support_exactly_n_calls(self):
        backend = ScriptedBackend(["a"] * 7)
        for _ in range(7):
            backend.complete(MESSAGES)
        with pytest.raises(ScriptExhaustedError):
            backend.complete(MESSAGES)

    def test_records_calls(self):
        backend = ScriptedBackend(["a"])
        backend.complete(MESSAGES)
        assert backend.calls[0][1].content == "hello"


class TestScriptFiles:
    def test_separator_format(self, tmp_path):
        path = tmp_path / "script.txt"
        path.write_text("color_match\n---\nIF TRUE THEN color_match\nELSE shape_match\n---\n")
        backend = mock_from_script(path)
        assert backend.complete(MESSAGES) == "color_match"
        assert backend.complete(MESSAGES) == "IF TRUE THEN color_match\nELSE shape_match"

    def test_json_format(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps(["one", "two"]))
        backend = mock_from_script(path)
        assert backend.complete(MESSAGES) == "one"
        assert backend.complete(MESSAGES) == "two"

    def test_backend_from_spec_mock(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("reply\n")
        backend = backend_from_spec(f"mock:{path}")
        assert backend.complete(MESSAGES) == "reply"

    def test_backend_from_spec_rejects_garbage(self):
        with pytest.raises(ValueError):
            backend_from_spec("ftp://nope")


class _FakeResponse:
    def __init__(self, status_code: int, payload=None, text: str = ""):
        self.status_code = status_code
        self._payload = payload
        self.text = text or json.dumps(payload)

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


class _FakeSession:
    """Stands in for requests.Session; no network in any test."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append({"url": url, "json": json, "headers": headers})
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def make_backend(responses, **kwargs) -> tuple[HttpBackend, _FakeSession]:
    session = _FakeSession(responses)
    config = BackendConfig(
        endpoint="https://example.test/v1/chat/completions",
        model="test-model",
        max_retries=kwargs.pop("max_retries", 2),
        **kwargs,
    )
    return HttpBackend(config, session=session), session


def ok_payload(text: str) -> dict:
    return {"choices": [{"message": {"content": text}}]}


class TestHttpBackend:
    def test_happy_path_and_wire_shape(self):
        backend, session = make_backend([_FakeResponse(200, ok_payload("hi"))])
        assert backend.complete(MESSAGES) == "hi"
        sent = session.requests[0]["json"]
        assert sent["model"] == "test-model"
        assert sent["messages"] == [
            {"role": "system", "content": "sys"},
            {"role": "user", "content": "hello"},
        ]

    def test_retries_transient_then_succeeds(self, monkeypatch):
        monkeypatch.setattr("time.sleep", lambda s: None)
        backend, session = make_backend(
            [
                requests.ConnectionError("boom"),
                _FakeResponse(500, {"err": 1}),
                _FakeResponse(200, ok_payload("ok")),
            ]
        )
        assert backend.complete(MESSAGES) == "ok"
        assert len(session.requests) == 3

    def test_gives_up_after_retries(self, monkeypatch):
        monkeypatch.setattr("time.sleep", lambda s: None)
        backend, _ = make_backend([requests.ConnectionError("x")] * 3)
        with pytest.raises(BackendError):
            backend.complete(MESSAGES)

    def test_client_error_not_retried(self):
        backend, session = make_backend([_FakeResponse(403, {"err": "denied"})])
        with pytest.raises(BackendError) as err:
            backend.complete(MESSAGES)
        assert err.value.status == 403
        assert len(session.requests) == 1

    def test_malformed_response_rejected(self):
        backend, _ = make_backend([_FakeResponse(200, {"nope": []})])
        with pytest.raises(BackendError):
            backend.complete(MESSAGES)

    def test_auth_token_from_env_only(self, monkeypatch):
        monkeypatch.setenv("BOXTASK_API_TOKEN", "sekret")
        backend, session = make_backend([_FakeResponse(200, ok_payload("ok"))])
        backend.complete(MESSAGES)
        sent = session.requests[0]
        assert sent["headers"]["Authorization"] == "Bearer sekret"
        assert "sekret" not in json.dumps(sent["json"])

    def test_no_token_no_header(self, monkeypatch):
        monkeypatch.delenv("BOXTASK_API_TOKEN", raising=False)
        backend, session = make_backend([_FakeResponse(200, ok_payload("ok"))])
        backend.complete(MESSAGES)
        assert "Authorization" not in session.requests[0]["headers"]
