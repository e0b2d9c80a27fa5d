"""Text-generation backend interface: one request/response wire call.

The simulator talks to language models through a single ``complete`` call.
``LiveBackend`` speaks a minimal HTTP JSON protocol (POST ``{prompt,
max_length, choice_set}`` -> ``{text}``) against any conforming endpoint,
configured via the STATUSARENA_BACKEND_URL / STATUSARENA_BACKEND_KEY
environment variables. The deterministic stub used for testing lives in
``cognition`` next to the decision pipeline it imitates.

Requests may carry a ``meta`` dict with structured context (options, signal
counts, a seeded RNG). Live backends ignore it; the stub consumes it. Only
JSON-safe parts of ``meta`` are ever logged.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Protocol

import requests

from .events import BackendError

ENV_URL = "STATUSARENA_BACKEND_URL"
ENV_KEY = "STATUSARENA_BACKEND_KEY"


@dataclass
class BackendRequest:
    prompt: str
    max_length: int = 256
    choice_set: Optional[list[str]] = None
    purpose: str = "generic"
    meta: dict = field(default_factory=dict)


@dataclass
class BackendResponse:
    text: str


class Backend(Protocol):
    is_stub: bool

    def complete(self, request: BackendRequest) -> BackendResponse: ...


class LiveBackend:
    """HTTP client for a conforming text-generation endpoint."""

    is_stub = False

    def __init__(
        self,
        url: Optional[str] = None,
        api_key: Optional[str] = None,
        retries: int = 2,
        timeout: float = 60.0,
        backoff: float = 1.0,
    ):
        self.url = url or os.environ.get(ENV_URL)
        if not self.url:
            raise BackendError(f"no backend endpoint: set {ENV_URL} or pass url=")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_KEY)
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff

    def complete(self, request: BackendRequest) -> BackendResponse:
        body = {"prompt": request.prompt, "max_length": request.max_length}
        if request.choice_set is not None:
            body["choice_set"] = list(request.choice_set)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                data = resp.json()
                if "text" not in data:
                    raise BackendError(f"endpoint reply missing 'text' field: {data!r}")
                return BackendResponse(text=str(data["text"]))
            except BackendError:
                raise
            except Exception as exc:  # connection errors, HTTP errors, bad JSON
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
        raise BackendError(f"backend unreachable after {self.retries + 1} attempts: {last_error}")


# ---------------------------------------------------------------------------
# Prompt templates

_TEMPLATE_NAMES = (
    "situation",
    "identity",
    "action",
    "choice",
    "consumer",
    "utterance",
    "reflection",
    "scenario_gen",
)


def load_templates() -> dict[str, str]:
    out = {}
    base = resources.files("statusarena").joinpath("data").joinpath("templates")
    for name in _TEMPLATE_NAMES:
        out[name] = base.joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return out


def template_hash() -> str:
    """Stable hash over all prompt templates, recorded in manifests and logs."""
    h = hashlib.sha256()
    templates = load_templates()
    for name in sorted(templates):
        h.update(name.encode("utf-8"))
        h.update(b"\x00")
        h.update(templates[name].encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def render(template: str, **fields: object) -> str:
    return template.format(**fields)


def loggable_meta(meta: dict) -> dict:
    """Strip non-serializable entries (RNGs, live objects) before logging."""
    out = {}
    for k, v in meta.items():
        if isinstance(v, (str, int, float, bool, type(None))):
            out[k] = v
        elif isinstance(v, (list, tuple)) and all(
            isinstance(x, (str, int, float, bool, type(None))) for x in v
        ):
            out[k] = list(v)
        elif isinstance(v, dict) and all(
            isinstance(x, (str, int, float, bool, type(None))) for x in v.values()
        ):
            out[k] = dict(v)
    return out
