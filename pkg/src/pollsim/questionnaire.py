"""Poll instrument model: questions, options, refusal semantics, and the
transformation rules used to derive instrument items from survey sources
(invalid-option merging, 7-to-3 scale collapse).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .jsonl import read_jsonl

REFUSAL_TEXT = "DK/RF"

# Option texts treated as non-answers when merging source instruments.
INVALID_OPTION_TEXTS = frozenset(
    t.casefold() for t in ("Refused", "Don't know", "Haven't thought much about this")
)

DEFAULT_LIKERT_GROUPS: tuple[tuple[int, int], ...] = ((1, 3), (4, 4), (5, 7))

_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"

RESPONDENT_TAG_KEYS = (
    "AGE",
    "GENDER",
    "RACE",
    "INCOME",
    "EDUCATION",
    "AREA",
    "REGION",
    "EMPLOYMENT",
    "MARITAL",
    "RELIGIOUS",
    "PARTY",
    "IDEOLOGY",
)


class QuestionnaireError(ValueError):
    pass


@dataclass(frozen=True)
class Option:
    letter: str
    text: str
    is_refusal: bool = False
    polarity_score: int | None = None
    party: str | None = None  # "dem" / "rep" on the vote question's options


@dataclass
class Question:
    id: str
    topic: str
    text: str
    options: list[Option]
    voting_subset: bool = False

    def __post_init__(self) -> None:
        letters = [o.letter for o in self.options]
        if len(set(letters)) != len(letters):
            raise QuestionnaireError(f"question {self.id}: duplicate option letters {letters}")
        refusals = [o for o in self.options if o.is_refusal]
        if len(refusals) != 1:
            raise QuestionnaireError(
                f"question {self.id}: expected exactly one refusal option, found {len(refusals)}"
            )
        if not self.options[-1].is_refusal:
            raise QuestionnaireError(f"question {self.id}: refusal option must come last")
        if len(self.options) - 1 < 2:
            raise QuestionnaireError(f"question {self.id}: needs at least 2 substantive options")

    @property
    def letters(self) -> list[str]:
        return [o.letter for o in self.options]

    @property
    def refusal_letter(self) -> str:
        return next(o.letter for o in self.options if o.is_refusal)

    def option(self, letter: str) -> Option | None:
        wanted = letter.upper()
        for opt in self.options:
            if opt.letter.upper() == wanted:
                return opt
        return None

    def party_letters(self) -> dict[str, str]:
        """Party -> option letter mapping; empty unless this is the vote question."""
        return {o.party: o.letter for o in self.options if o.party}


@dataclass
class Questionnaire:
    questions: list[Question]

    def __post_init__(self) -> None:
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise QuestionnaireError("duplicate question ids")

    def __iter__(self):
        return iter(self.questions)

    def __len__(self) -> int:
        return len(self.questions)

    def get(self, question_id: str) -> Question | None:
        for q in self.questions:
            if q.id == question_id:
                return q
        return None

    @property
    def topics(self) -> list[str]:
        seen: dict[str, None] = {}
        for q in self.questions:
            seen.setdefault(q.topic)
        return list(seen)

    @property
    def voting_subset(self) -> list[Question]:
        return [q for q in self.questions if q.voting_subset]

    def vote_question(self) -> Question | None:
        """The question whose options carry party mappings, if any."""
        for q in self.questions:
            if q.party_letters():
                return q
        return None

    def summary(self) -> dict:
        return {
            "questions": len(self.questions),
            "topics": len(self.topics),
            "voting_subset": len(self.voting_subset),
            "avg_options": (
                sum(len(q.options) for q in self.questions) / len(self.questions)
                if self.questions
                else 0.0
            ),
        }


def _parse_option(row: dict, qid: str) -> Option:
    if "letter" not in row or "text" not in row:
        raise QuestionnaireError(f"question {qid}: option needs letter and text: {row}")
    party = row.get("party")
    if party is not None and party not in ("dem", "rep"):
        raise QuestionnaireError(f"question {qid}: option party must be dem/rep, got {party!r}")
    return Option(
        letter=str(row["letter"]).upper(),
        text=str(row["text"]),
        is_refusal=bool(row.get("refusal", False)),
        polarity_score=row.get("polarity"),
        party=party,
    )


def load_questionnaire(path: str | Path) -> Questionnaire:
    """Parse and validate an instrument file.

    Named validation failures: duplicate ids, missing/misplaced refusal
    option, fewer than two substantive options, empty instrument.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise QuestionnaireError(f"instrument file is not valid JSON: {exc}") from exc
    rows = doc.get("questions") if isinstance(doc, dict) else None
    if not rows:
        raise QuestionnaireError("instrument file has no questions")
    questions = []
    for row in rows:
        questions.append(
            Question(
                id=str(row["id"]),
                topic=str(row.get("topic", "")),
                text=str(row["text"]),
                options=[_parse_option(o, str(row["id"])) for o in row["options"]],
                voting_subset=bool(row.get("voting_subset", False)),
            )
        )
    return Questionnaire(questions=questions)


def save_questionnaire(questionnaire: Questionnaire, path: str | Path) -> None:
    rows = []
    for q in questionnaire:
        opts = []
        for o in q.options:
            row: dict = {"letter": o.letter, "text": o.text}
            if o.is_refusal:
                row["refusal"] = True
            if o.polarity_score is not None:
                row["polarity"] = o.polarity_score
            if o.party is not None:
                row["party"] = o.party
            opts.append(row)
        rows.append(
            {
                "id": q.id,
                "topic": q.topic,
                "text": q.text,
                "options": opts,
                **({"voting_subset": True} if q.voting_subset else {}),
            }
        )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(
        json.dumps({"questions": rows}, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def merge_refusals(options: Sequence[Option]) -> list[Option]:
    """Replace all non-answer options with a single trailing DK/RF option.

    Appends DK/RF even when no source option was invalid, so every question
    exposes a uniform refusal slot. Idempotent.
    """
    substantive = [
        o
        for o in options
        if not o.is_refusal and o.text.strip().casefold() not in INVALID_OPTION_TEXTS
    ]
    used = {o.letter.upper() for o in substantive}
    next_letter = next(l for l in _LETTERS if l not in used)
    merged = Option(letter=next_letter, text=REFUSAL_TEXT, is_refusal=True)
    return [*substantive, merged]


def likert_collapse(
    mapping_spec: Sequence[tuple[int, int]] | None, raw_answer: int
) -> int:
    """Collapse a 7-point intensity answer to a 3-point position.

    `mapping_spec` is three contiguous inclusive (lo, hi) groups partitioning
    1..7; default groups 1-3 / 4 / 5-7.
    """
    groups = tuple(mapping_spec) if mapping_spec is not None else DEFAULT_LIKERT_GROUPS
    if len(groups) != 3:
        raise QuestionnaireError(f"mapping spec must have 3 groups, got {len(groups)}")
    expected = 1
    for lo, hi in groups:
        if lo != expected or hi < lo:
            raise QuestionnaireError(f"mapping spec does not partition 1..7: {groups}")
        expected = hi + 1
    if expected != 8:
        raise QuestionnaireError(f"mapping spec does not partition 1..7: {groups}")
    if not isinstance(raw_answer, int) or not (1 <= raw_answer <= 7):
        raise QuestionnaireError(f"raw answer out of range 1..7: {raw_answer!r}")
    for position, (lo, hi) in enumerate(groups, start=1):
        if lo <= raw_answer <= hi:
            return position
    raise AssertionError("unreachable")


@dataclass
class RespondentRecord:
    """A survey respondent: demographic tags plus gold answers per question."""

    respondent_id: str
    tags: dict[str, str]
    answers: dict[str, str]
    state: str | None = None

    @classmethod
    def from_dict(cls, row: dict) -> "RespondentRecord":
        return cls(
            respondent_id=str(row["respondent_id"]),
            tags={str(k).upper(): str(v) for k, v in row.get("tags", {}).items()},
            answers={str(k): str(v).upper() for k, v in row.get("answers", {}).items()},
            state=row.get("state"),
        )

    def to_dict(self) -> dict:
        row: dict = {
            "respondent_id": self.respondent_id,
            "tags": self.tags,
            "answers": self.answers,
        }
        if self.state is not None:
            row["state"] = self.state
        return row

    def validate_against(self, questionnaire: Questionnaire) -> None:
        for qid, letter in self.answers.items():
            q = questionnaire.get(qid)
            if q is None:
                raise QuestionnaireError(
                    f"respondent {self.respondent_id}: unknown question {qid}"
                )
            if q.option(letter) is None:
                raise QuestionnaireError(
                    f"respondent {self.respondent_id}: invalid answer {letter} for {qid}"
                )


def read_respondents(path: str | Path) -> list[RespondentRecord]:
    return [RespondentRecord.from_dict(row) for row in read_jsonl(path)]
