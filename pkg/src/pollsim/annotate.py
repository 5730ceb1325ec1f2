"""Demographic tagging of pool users through chat backends, with majority
voting across backends and consistency scoring against a gold set.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import prompts
from .backends import TransportError
from .corpus import UserRecord
from .jsonl import read_jsonl, write_jsonl
from .taxonomy import ATTRIBUTES, Taxonomy

# Response keys -> taxonomy attributes, in the order the prompt asks for them.
RESPONSE_KEYS = {
    "AGE": "age",
    "GENDER": "gender",
    "RACE": "race",
    "PARTY": "partisanship",
    "IDEOLOGY": "ideology",
}

_LETTER_LABELS = {
    "AGE": {"A": "Youth", "B": "Middle-aged", "C": "Elderly"},
    "GENDER": {"A": "Male", "B": "Female"},
    "RACE": {"A": "White", "B": "Black", "C": "Asian", "D": "Hispanic"},
    "PARTY": {"A": "Democrat", "B": "Republican", "C": "Others", "D": "Independent"},
    "IDEOLOGY": {"A": "Liberal", "B": "Moderate", "C": "Conservative"},
}

# Spelled-out answers the parsers accept besides bare letters.
_TEXT_ALIASES = {
    "PARTY": {
        "democratic party": "Democrat",
        "republican party": "Republican",
        "other party": "Others",
    },
}

_JSON_BLOCK = re.compile(r"\{.*\}", re.DOTALL)


@dataclass
class AnnotationResult:
    user_id: str
    labels: dict[str, str | None]
    backend_id: str
    raw_response: str
    error: str | None = None


@dataclass
class GoldRecord:
    """Verified labels for one user; null means the attribute could not be
    established."""

    user_id: str
    labels: dict[str, str | None]

    def __post_init__(self) -> None:
        if not any(v is not None for v in self.labels.values()):
            raise ValueError(f"gold record {self.user_id} has no non-null attribute")

    @classmethod
    def from_dict(cls, row: dict, taxonomy: Taxonomy | None = None) -> "GoldRecord":
        taxonomy = taxonomy or Taxonomy()
        labels: dict[str, str | None] = {}
        raw = row.get("labels", row.get("tags", {}))
        for attr in ATTRIBUTES:
            labels[attr] = taxonomy.normalize(attr, raw.get(attr))
        return cls(user_id=str(row["user_id"]), labels=labels)


def read_gold(path: str | Path, taxonomy: Taxonomy | None = None) -> list[GoldRecord]:
    return [GoldRecord.from_dict(row, taxonomy) for row in read_jsonl(path)]


def render_annotation_prompt(user: UserRecord) -> str:
    text = "\n".join(p.text for p in user.posts)
    return prompts.ANNOTATION_TEMPLATE.format(text=text)


def parse_annotation_response(raw: str, taxonomy: Taxonomy | None = None) -> dict[str, str | None]:
    """Map a backend reply onto taxonomy labels; anything unparseable is null."""
    taxonomy = taxonomy or Taxonomy()
    labels: dict[str, str | None] = {attr: None for attr in RESPONSE_KEYS.values()}
    match = _JSON_BLOCK.search(raw)
    if not match:
        return labels
    try:
        payload = json.loads(match.group(0))
    except json.JSONDecodeError:
        return labels
    if not isinstance(payload, dict):
        return labels
    lookup = {str(k).upper(): v for k, v in payload.items()}
    for key, attr in RESPONSE_KEYS.items():
        value = lookup.get(key)
        if value is None:
            continue
        value = str(value).strip()
        letter_map = _LETTER_LABELS[key]
        label = letter_map.get(value.upper())
        if label is None:
            alias = _TEXT_ALIASES.get(key, {}).get(value.casefold())
            label = alias if alias is not None else taxonomy.normalize(attr, value)
        labels[attr] = label
    return labels


class AnnotationCache:
    """Replayable response cache keyed by (backend_id, user_id, prompt hash)."""

    def __init__(self, path: str | Path | None = None):
        self._path = Path(path) if path else None
        self._data: dict[str, str] = {}
        if self._path and self._path.exists():
            self._data = json.loads(self._path.read_text(encoding="utf-8"))

    @staticmethod
    def key(backend_id: str, user_id: str, prompt: str) -> str:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        return f"{backend_id}|{user_id}|{digest}"

    def get(self, key: str) -> str | None:
        return self._data.get(key)

    def put(self, key: str, response: str) -> None:
        self._data[key] = response
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._path.write_text(
                json.dumps(self._data, indent=1, sort_keys=True), encoding="utf-8"
            )


def annotate_user(
    user: UserRecord,
    backend,
    taxonomy: Taxonomy | None = None,
    cache: AnnotationCache | None = None,
) -> AnnotationResult:
    """Tag one user through one backend (temperature pinned to 0)."""
    prompt = render_annotation_prompt(user)
    key = AnnotationCache.key(backend.backend_id, user.user_id, prompt)
    raw = cache.get(key) if cache else None
    if raw is None:
        try:
            raw = backend.complete([{"role": "user", "content": prompt}], temperature=0.0)
        except TransportError as exc:
            return AnnotationResult(
                user_id=user.user_id,
                labels={attr: None for attr in RESPONSE_KEYS.values()},
                backend_id=backend.backend_id,
                raw_response="",
                error=str(exc),
            )
        if cache:
            cache.put(key, raw)
    return AnnotationResult(
        user_id=user.user_id,
        labels=parse_annotation_response(raw, taxonomy),
        backend_id=backend.backend_id,
        raw_response=raw,
    )


def majority_vote(results: Sequence[AnnotationResult]) -> dict[str, str | None]:
    """Per attribute, the strictly most frequent non-null label; ties -> null."""
    if len(results) < 2:
        raise ValueError("majority vote needs at least 2 results")
    user_ids = {r.user_id for r in results}
    if len(user_ids) != 1:
        raise ValueError(f"majority vote over mixed users: {sorted(user_ids)}")
    voted: dict[str, str | None] = {}
    for attr in ATTRIBUTES:
        counts = Counter(
            r.labels.get(attr) for r in results if r.labels.get(attr) is not None
        )
        if not counts:
            voted[attr] = None
            continue
        ranked = counts.most_common()
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            voted[attr] = None
        else:
            voted[attr] = ranked[0][0]
    return voted


def consistency_score(
    predictions: Mapping[str, Mapping[str, str | None]],
    gold: Sequence[GoldRecord],
    attribute: str,
) -> float:
    """Share of non-null gold labels the predictions reproduce.

    Gold nulls leave the denominator; a missing prediction is a mismatch.
    """
    total = 0
    correct = 0
    for record in gold:
        expected = record.labels.get(attribute)
        if expected is None:
            continue
        total += 1
        predicted = predictions.get(record.user_id, {}).get(attribute)
        if predicted == expected:
            correct += 1
    if total == 0:
        raise ValueError(f"no gold labels for attribute {attribute}")
    return correct / total


def tag_distribution(users: Iterable[UserRecord]) -> dict[str, dict[str, int]]:
    """Pool-wide tag counts per attribute; untagged values bucket under 'null'."""
    dist: dict[str, dict[str, int]] = {attr: {} for attr in ATTRIBUTES}
    for user in users:
        tags = user.tags or {}
        for attr in ATTRIBUTES:
            label = tags.get(attr) or "null"
            dist[attr][label] = dist[attr].get(label, 0) + 1
    return dist


def annotate_pool(
    users: Sequence[UserRecord],
    backends: Sequence,
    taxonomy: Taxonomy | None = None,
    cache: AnnotationCache | None = None,
    max_workers: int = 1,
) -> list[UserRecord]:
    """Tag every user via majority vote across the given backends.

    Backend calls run with at most `max_workers` in flight; a user's vote is
    taken only once all of their backends have answered or failed.
    """
    if len(backends) < 2:
        raise ValueError("majority voting needs at least 2 backends")

    def tag(user: UserRecord) -> None:
        results = [annotate_user(user, b, taxonomy, cache) for b in backends]
        user.tags = majority_vote(results)

    if max_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(tag, users))
    else:
        for user in users:
            tag(user)
    return list(users)


def write_annotated_pool(path: str | Path, users: Iterable[UserRecord]) -> None:
    write_jsonl(path, (u.to_dict() for u in users))
