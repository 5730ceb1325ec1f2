"""Chat-completion backends: OpenAI-style HTTP, deterministic mock, and
recorded-response replay.

All backends expose `complete(messages, temperature=..., max_tokens=...) -> str`.
The mock is a pure function of (message contents, seed): it answers survey
prompts with a plausible option letter (party-aligned when the persona and an
option advertise a party), fills annotation prompts with hash-derived labels,
writes stub biographies, and echoes persona tags in free chat.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests

from . import prompts
from .jsonl import dumps_canonical
from .rng import derive_seed


class TransportError(RuntimeError):
    """Backend could not produce a response (after retries)."""


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_seconds: float = 0.5


@dataclass
class BackendConfig:
    backend_id: str
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.5
    max_tokens: int = 32
    requests_per_second: float | None = None
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    mock: bool = False
    mock_seed: int = 0
    recorded_path: str | None = None
    api_key: str | None = None
    context_chars: int | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")

    @classmethod
    def from_dict(cls, row: dict) -> "BackendConfig":
        retry = row.get("retry") or {}
        return cls(
            backend_id=row["backend_id"],
            endpoint=row.get("endpoint", ""),
            model=row.get("model", ""),
            temperature=row.get("temperature", 0.5),
            max_tokens=row.get("max_tokens", 32),
            requests_per_second=row.get("requests_per_second"),
            retry=RetryPolicy(
                max_attempts=retry.get("max_attempts", 3),
                backoff_seconds=retry.get("backoff_seconds", 0.5),
            ),
            mock=bool(row.get("mock", False)),
            mock_seed=int(row.get("mock_seed", 0)),
            recorded_path=row.get("recorded_path"),
            api_key=row.get("api_key"),
            context_chars=row.get("context_chars"),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "BackendConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def request_hash(model: str, messages: Sequence[dict], temperature: float, max_tokens: int) -> str:
    import hashlib

    body = dumps_canonical(
        {
            "model": model,
            "messages": list(messages),
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
    )
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


class _RateLimiter:
    def __init__(self, per_second: float | None):
        self._interval = 1.0 / per_second if per_second else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if not self._interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if delay > 0:
            time.sleep(delay)


class HTTPBackend:
    """OpenAI-style chat-completions client with retry/backoff and rate cap."""

    def __init__(self, config: BackendConfig, session: requests.Session | None = None):
        self.config = config
        self._session = session or requests.Session()
        self._limiter = _RateLimiter(config.requests_per_second)

    @property
    def backend_id(self) -> str:
        return self.config.backend_id

    def complete(
        self,
        messages: Sequence[dict],
        temperature: float | None = None,
        max_tokens: int | None = None,
    ) -> str:
        payload = {
            "model": self.config.model,
            "messages": list(messages),
            "temperature": self.config.temperature if temperature is None else temperature,
            "max_tokens": self.config.max_tokens if max_tokens is None else max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        policy = self.config.retry
        last_error: Exception | None = None
        for attempt in range(1, policy.max_attempts + 1):
            self._limiter.wait()
            try:
                resp = self._session.post(
                    self.config.endpoint, json=payload, headers=headers, timeout=120
                )
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise TransportError(f"HTTP {resp.status_code}")
                resp.raise_for_status()
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except (requests.RequestException, TransportError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt < policy.max_attempts:
                    time.sleep(policy.backoff_seconds * (2 ** (attempt - 1)))
        raise TransportError(f"{self.backend_id}: {last_error}") from last_error


class RecordedBackend:
    """Replays responses from a request-hash -> response-text map file."""

    def __init__(self, config: BackendConfig):
        self.config = config
        if not config.recorded_path:
            raise ValueError("recorded backend needs recorded_path")
        self._responses: dict[str, str] = json.loads(
            Path(config.recorded_path).read_text(encoding="utf-8")
        )

    @property
    def backend_id(self) -> str:
        return self.config.backend_id

    def complete(
        self,
        messages: Sequence[dict],
        temperature: float | None = None,
        max_tokens: int | None = None,
    ) -> str:
        key = request_hash(
            self.config.model,
            messages,
            self.config.temperature if temperature is None else temperature,
            self.config.max_tokens if max_tokens is None else max_tokens,
        )
        try:
            return self._responses[key]
        except KeyError:
            raise TransportError(f"{self.backend_id}: no recorded response for {key}") from None


class RecordingBackend:
    """Wraps a live backend and captures its responses into a replay map."""

    def __init__(self, inner, path: str | Path):
        self._inner = inner
        self._path = Path(path)
        self._responses: dict[str, str] = {}
        if self._path.exists():
            self._responses = json.loads(self._path.read_text(encoding="utf-8"))

    @property
    def backend_id(self) -> str:
        return self._inner.backend_id

    @property
    def config(self) -> BackendConfig:
        return self._inner.config

    def complete(self, messages, temperature=None, max_tokens=None) -> str:
        cfg = self._inner.config
        key = request_hash(
            cfg.model,
            messages,
            cfg.temperature if temperature is None else temperature,
            cfg.max_tokens if max_tokens is None else max_tokens,
        )
        if key not in self._responses:
            self._responses[key] = self._inner.complete(messages, temperature, max_tokens)
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._path.write_text(
                json.dumps(self._responses, indent=1, sort_keys=True), encoding="utf-8"
            )
        return self._responses[key]


_OPTION_LINE = re.compile(r"(?m)^(?:Options: )?([A-Z])\. (.*)$")
_TAG_LINE = re.compile(r"(?im)^\s*(?:partisanship|party)\s*:\s*(.+)$")
_PERSONA_LINE = re.compile(r"(?im)^\s*([A-Za-z ]+)\s*:\s*([^\n{}]+)$")

_PARTY_KEYWORDS = {
    "democrat": ("democrat", "biden", "harris"),
    "republican": ("republican", "trump", "pence", "vance"),
}

_ANNOTATION_LETTERS = {
    "AGE": "ABC",
    "GENDER": "AB",
    "RACE": "ABCD",
    "PARTY": "ABCD",
    "IDEOLOGY": "ABC",
}


class MockBackend:
    """Deterministic offline stand-in for a chat model."""

    def __init__(self, config: BackendConfig):
        self.config = config
        self._seed = config.mock_seed

    @property
    def backend_id(self) -> str:
        return self.config.backend_id

    def complete(
        self,
        messages: Sequence[dict],
        temperature: float | None = None,
        max_tokens: int | None = None,
    ) -> str:
        text = "\n".join(str(m.get("content", "")) for m in messages)
        if prompts.ANNOTATION_HEAD.split(".")[0] in text:
            return self._annotation_reply(text)
        if prompts.BIOGRAPHER_HEAD in text:
            return self._biography_reply(text)
        if prompts.ANSWER_MARKER in text:
            return self._survey_reply(text)
        return self._chat_reply(messages, text)

    def _pick(self, text: str, label: str, n: int) -> int:
        return derive_seed(self._seed, "mock", label, text) % n

    def _annotation_reply(self, text: str) -> str:
        labels = {
            key: letters[self._pick(text, f"annotate-{key}", len(letters))]
            for key, letters in _ANNOTATION_LETTERS.items()
        }
        return json.dumps(labels)

    @staticmethod
    def _persona_tags(text: str) -> dict[str, str]:
        tags: dict[str, str] = {}
        for key, value in _PERSONA_LINE.findall(text):
            tags[key.strip().lower()] = value.strip()
        return tags

    def _biography_reply(self, text: str) -> str:
        tags = self._persona_tags(text)
        bits = [tags.get(k) for k in ("age", "race", "gender") if tags.get(k)]
        who = " ".join(bits) if bits else "person"
        sentences = [f"You are a {who} living an ordinary life."]
        if tags.get("ideology"):
            sentences.append(f"You hold {tags['ideology']} views.")
        party = tags.get("partisanship") or tags.get("party")
        if party:
            sentences.append(f"You lean toward the {party} side in politics.")
        return json.dumps({"answer": " ".join(sentences)})

    def _survey_reply(self, text: str) -> str:
        options = [(l, t.strip()) for l, t in _OPTION_LINE.findall(text)]
        substantive = [(l, t) for l, t in options if t != "DK/RF"] or options
        if not substantive:
            return json.dumps({"answer": "A"})
        match = _TAG_LINE.search(text)
        if match:
            party = match.group(1).strip().lower()
            for name, keywords in _PARTY_KEYWORDS.items():
                if name in party:
                    for letter, opt_text in substantive:
                        lowered = opt_text.lower()
                        if any(k in lowered for k in keywords):
                            return json.dumps({"answer": letter})
        letter = substantive[self._pick(text, "survey", len(substantive))][0]
        return json.dumps({"answer": letter})

    def _chat_reply(self, messages: Sequence[dict], text: str) -> str:
        tags = self._persona_tags(text)
        party = (tags.get("partisanship") or tags.get("party") or "").lower()
        user_turns = [m for m in messages if m.get("role") == "user"]
        question = str(user_turns[-1].get("content", "")) if user_turns else ""
        parts = []
        who = " ".join(t for t in (tags.get("age"), tags.get("race"), tags.get("gender")) if t)
        if who:
            parts.append(f"Speaking as a {who} voter,")
        if "vote" in question.lower() and party:
            if "democrat" in party:
                parts.append("I voted for the Democratic ticket led by Joe Biden.")
            elif "republican" in party:
                parts.append("I voted for the Republican ticket led by Donald Trump.")
            else:
                parts.append(f"as an {tags.get('partisanship', 'independent')} I kept my options open.")
        elif party:
            parts.append(f"my {party} leanings shape how I see that.")
        else:
            parts.append("that's a fair question.")
        if tags.get("ideology"):
            parts.append(f"My outlook is {tags['ideology'].lower()}.")
        reply = " ".join(parts)
        # turn-count salt keeps multi-round transcripts from repeating verbatim
        salt = derive_seed(self._seed, "chat", text) % 7
        return reply + ("" if salt == 0 else f" ({len(user_turns)} question(s) so far.)")


def make_backend(config: BackendConfig):
    if config.mock:
        return MockBackend(config)
    if config.recorded_path:
        return RecordedBackend(config)
    return HTTPBackend(config)
