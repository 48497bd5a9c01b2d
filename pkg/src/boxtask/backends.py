"""Completion backends: a JSON-over-HTTP chat client and deterministic
scripted mocks for tests and replays.

Wire format (de-facto chat-completions shape):
  request  POST {endpoint}  {"model": ..., "messages": [{"role", "content"}, ...], ...}
  response {"choices": [{"message": {"content": "<assistant text>"}}]}
Auth, when configured, is a bearer token read from the named environment
variable at call time; request bodies never embed secrets.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests


class BackendError(Exception):
    def __init__(self, message: str, status: int | None = None, body: str | None = None):
        super().__init__(message)
        self.status = status
        self.body = body


class ScriptExhaustedError(BackendError):
    """The scripted mock ran out of responses."""


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")

    def as_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass
class BackendConfig:
    endpoint: str
    model: str
    token_env: str = "BOXTASK_API_TOKEN"
    timeout: float = 120.0
    max_retries: int = 3
    sampling: dict = field(default_factory=dict)  # passed through opaquely

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


class HttpBackend:
    """Shareable client; per-call timeout; retries transient transport
    failures with exponential backoff."""

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()

    def complete(self, messages: list[ChatMessage]) -> str:
        cfg = self.config
        payload = {
            "model": cfg.model,
            "messages": [m.as_dict() for m in messages],
            **cfg.sampling,
        }
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(cfg.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        last: Exception | None = None
        for attempt in range(cfg.max_retries + 1):
            try:
                resp = self._session.post(
                    cfg.endpoint, json=payload, headers=headers, timeout=cfg.timeout
                )
            except requests.Timeout as exc:
                raise TimeoutError(f"backend timed out after {cfg.timeout}s") from exc
            except requests.RequestException as exc:
                last = exc
            else:
                if resp.status_code >= 500:
                    last = BackendError(
                        f"server error {resp.status_code}",
                        status=resp.status_code,
                        body=resp.text[:2000],
                    )
                elif resp.status_code >= 400:
                    raise BackendError(
                        f"request rejected with {resp.status_code}",
                        status=resp.status_code,
                        body=resp.text[:2000],
                    )
                else:
                    return self._extract(resp)
            if attempt < cfg.max_retries:
                time.sleep(0.5 * 2**attempt)
        raise BackendError(f"backend unreachable after {cfg.max_retries + 1} attempts: {last}")

    @staticmethod
    def _extract(resp) -> str:
        try:
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(
                "malformed completion response", status=resp.status_code, body=resp.text[:2000]
            ) from exc


class ScriptedBackend:
    """Replays a fixed list of responses in order; deterministic."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.cursor = 0
        self.calls: list[list[ChatMessage]] = []

    def complete(self, messages: list[ChatMessage]) -> str:
        self.calls.append(list(messages))
        if self.cursor >= len(self.responses):
            raise ScriptExhaustedError(
                f"script exhausted after {len(self.responses)} responses"
            )
        out = self.responses[self.cursor]
        self.cursor += 1
        return out


SCRIPT_SEPARATOR = "---"


def mock_from_script(path: str | Path) -> ScriptedBackend:
    """Load a scripted backend from a file: either a JSON array of strings or
    plain text with `---` separator lines between responses."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("["):
        responses = json.loads(text)
        if not isinstance(responses, list) or not all(isinstance(r, str) for r in responses):
            raise ValueError(f"{path}: JSON script must be an array of strings")
    else:
        responses = []
        current: list[str] = []
        for line in text.splitlines():
            if line.strip() == SCRIPT_SEPARATOR:
                if current:
                    responses.append("\n".join(current).strip())
                current = []
            else:
                current.append(line)
        if current and "\n".join(current).strip():
            responses.append("\n".join(current).strip())
        responses = [r for r in responses if r]
    return ScriptedBackend(responses)


def backend_from_spec(spec: str, model: str = "", token_env: str = "BOXTASK_API_TOKEN"):
    """CLI helper: `mock:<script path>` or an http(s) endpoint URL."""
    if spec.startswith("mock:"):
        return mock_from_script(spec[len("mock:") :])
    if spec.startswith("http://") or spec.startswith("https://"):
        if not model:
            raise ValueError("live backends need --model")
        return HttpBackend(BackendConfig(endpoint=spec, model=model, token_env=token_env))
    raise ValueError(f"unrecognized backend spec {spec!r}")
