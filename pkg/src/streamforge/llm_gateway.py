"""Prompt construction, model roster, snippet extraction, and providers.

The prompt lives in ``data/prompt_template.txt`` so tests can byte-compare
it. Model choice per iteration is a seeded uniform draw. Snippet extraction
tolerates prose and markdown fences around the JSON object the prompt asks
for. Providers: an OpenAI-compatible chat-completions client with retry,
and a replay provider that serves canned responses for offline runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import requests

from .aspkit.snippets import Snippet
from .solver_backend import SolveOutcome

logger = logging.getLogger(__name__)

STATUS_PENDING = "pending"
STATUS_KEPT = "kept"
STATUS_DISCARDED = "discarded"

REASON_PENDING = "pending"
REASON_IMPROVED = "improved"
REASON_SYNTAX_ERROR = "syntax-error"
REASON_UNSAT_ALL = "unsat-all"
REASON_UNSAT_SOME = "unsat-some"
REASON_NO_IMPROVEMENT = "no-improvement"

DISCARD_REASONS = (
    REASON_SYNTAX_ERROR,
    REASON_UNSAT_ALL,
    REASON_UNSAT_SOME,
    REASON_NO_IMPROVEMENT,
)


class PromptError(Exception):
    pass


class ExtractionError(Exception):
    pass


class ProviderError(Exception):
    pass


class AuthError(ProviderError):
    pass


class ReplayExhausted(ProviderError):
    """The replay directory has no response for this call."""


def _load_template() -> str:
    return (
        resources.files("streamforge").joinpath("data/prompt_template.txt").read_text("utf-8")
    )


def build_prompt(encoding_text: str) -> list[dict]:
    """One user message: the fixed instruction blocks plus the encoding."""
    if not encoding_text or not encoding_text.strip():
        raise PromptError("encoding text is empty")
    content = _load_template().replace("{encoding}", encoding_text.rstrip("\n"))
    return [{"role": "user", "content": content}]


@dataclass(frozen=True)
class ModelRoster:
    models: tuple[str, ...]
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not self.models:
            raise ValueError("model roster must be nonempty")
        if len(set(self.models)) != len(self.models):
            raise ValueError("model identifiers must be unique")


def pick_model(roster: ModelRoster, iteration: int) -> str:
    """Uniform, platform-independent draw keyed on (seed, iteration)."""
    digest = hashlib.sha256(f"{roster.rng_seed}:{iteration}".encode()).digest()
    return roster.models[int.from_bytes(digest[:8], "big") % len(roster.models)]


_CONSTRAINT_KEY_RE = re.compile(r"^constraint_(\d+)$")
_FENCE_LINE_RE = re.compile(r"^\s*```")


def extract_snippets(raw_text: str) -> list[str]:
    """Pull constraint strings out of a model response.

    Finds the first balanced JSON object (markdown fences stripped first)
    and reads its ``constraint_<N>`` keys in ascending N. Whitespace-only
    values are dropped; any count >= 1 is accepted.
    """
    text = "\n".join(
        line for line in raw_text.splitlines() if not _FENCE_LINE_RE.match(line)
    )
    decoder = json.JSONDecoder()
    obj = None
    for match in re.finditer(r"\{", text):
        try:
            candidate, _ = decoder.raw_decode(text, match.start())
        except json.JSONDecodeError:
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
    if obj is None:
        raise ExtractionError("no parseable JSON object in response")
    keyed: list[tuple[int, str]] = []
    for key, value in obj.items():
        m = _CONSTRAINT_KEY_RE.match(key)
        if m is None or not isinstance(value, str):
            continue
        if value.strip():
            keyed.append((int(m.group(1)), value))
    if not keyed:
        raise ExtractionError("JSON object has no non-empty constraint_<N> keys")
    keyed.sort(key=lambda kv: kv[0])
    return [value for _, value in keyed]


@dataclass(frozen=True)
class LlmResponse:
    model_id: str
    raw_text: str
    request_timestamp: float
    latency_seconds: float


@dataclass
class Candidate:
    """One proposed streamliner with provenance and verdict."""

    id: str
    snippet: Snippet
    source_model: str
    iteration: int
    status: str = STATUS_PENDING
    reason: str = REASON_PENDING
    per_instance_seconds: dict[str, SolveOutcome] = field(default_factory=dict)
    duplicate_of: Optional[str] = None


class OpenAIChatProvider:
    """Chat-completions client with exponential-backoff retry.

    401/403 raise AuthError immediately; transport failures and 5xx/429
    responses are retried up to ``max_retries`` times.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: Optional[str] = None,
        temperature: float = 1.0,
        max_retries: int = 3,
        request_timeout: float = 120.0,
        backoff_base: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.temperature = temperature
        self.max_retries = max_retries
        self.request_timeout = request_timeout
        self.backoff_base = backoff_base
        self.session = session or requests.Session()

    def complete(self, messages: list[dict], model_id: str) -> LlmResponse:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {"model": model_id, "messages": messages, "temperature": self.temperature}
        started = time.time()
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                response = self.session.post(
                    self.endpoint, json=body, headers=headers, timeout=self.request_timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                logger.warning("llm request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"credential rejected (HTTP {response.status_code})")
            if response.status_code >= 500 or response.status_code == 429:
                last_error = ProviderError(f"HTTP {response.status_code}")
                logger.warning(
                    "llm endpoint returned %d (attempt %d)", response.status_code, attempt + 1
                )
                continue
            if response.status_code != 200:
                raise ProviderError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise ProviderError(f"malformed completion response: {exc}") from exc
            return LlmResponse(
                model_id=model_id,
                raw_text=content,
                request_timestamp=started,
                latency_seconds=time.time() - started,
            )
        raise ProviderError(f"retries exhausted: {last_error}")


class ReplayProvider:
    """Serves ``resp_<n>.txt`` files from a directory, in order."""

    def __init__(self, directory):
        from pathlib import Path

        self.directory = Path(directory)
        self.cursor = 0

    def skip(self, count: int) -> None:
        self.cursor += count

    def complete(self, messages: list[dict], model_id: str) -> LlmResponse:
        path = self.directory / f"resp_{self.cursor}.txt"
        if not path.exists():
            raise ReplayExhausted(f"no replay response {path.name} in {self.directory}")
        self.cursor += 1
        return LlmResponse(
            model_id=model_id,
            raw_text=path.read_text("utf-8"),
            request_timestamp=0.0,
            latency_seconds=0.0,
        )
