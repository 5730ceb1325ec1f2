"""Simulation engine: renders persona prompts, interviews voters or survey
respondents through a chat backend, parses answers, and aggregates per-state
vote shares.

Prompt assembly is strictly additive by section (framing, history, personal
info, candidate context, question, answer contract) so that disabling a
section removes exactly that text and nothing else.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

from . import prompts
from .backends import MockBackend, RecordedBackend, TransportError
from .corpus import Post, parse_time
from .jsonl import dumps_canonical, read_jsonl, write_jsonl
from .questionnaire import Question, Questionnaire, RespondentRecord, RESPONDENT_TAG_KEYS
from .rng import make_rng
from .sampler import VoterProfile
from .taxonomy import ATTRIBUTES

VOTER_TAG_TITLES = {
    "gender": "Gender",
    "age": "Age",
    "race": "Race",
    "ideology": "Ideology",
    "partisanship": "Partisanship",
}


@dataclass
class PromptConfig:
    persona_format: str = "dict"  # dict | biography
    answer_format: str = "direct"  # direct | reason
    include_time_info: bool = True
    include_ideology: bool = True
    include_party: bool = True
    baseline: int = 2  # 1 | 2 | 3
    temporal_cutoff: datetime | None = None
    candidate_context: str | None = None
    survey_year: int = 2020

    def __post_init__(self) -> None:
        if self.persona_format not in ("dict", "biography"):
            raise ValueError(f"persona_format must be dict|biography, got {self.persona_format}")
        if self.answer_format not in ("direct", "reason"):
            raise ValueError(f"answer_format must be direct|reason, got {self.answer_format}")
        if self.baseline not in (1, 2, 3):
            raise ValueError(f"baseline must be 1, 2, or 3, got {self.baseline}")
        if isinstance(self.temporal_cutoff, str):
            self.temporal_cutoff = parse_time(self.temporal_cutoff)

    @classmethod
    def from_dict(cls, row: dict) -> "PromptConfig":
        return cls(
            persona_format=row.get("persona_format", "dict"),
            answer_format=row.get("answer_format", "direct"),
            include_time_info=bool(row.get("include_time_info", True)),
            include_ideology=bool(row.get("include_ideology", True)),
            include_party=bool(row.get("include_party", True)),
            baseline=int(row.get("baseline", 2)),
            temporal_cutoff=row.get("temporal_cutoff"),
            candidate_context=row.get("candidate_context"),
            survey_year=int(row.get("survey_year", 2020)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "persona_format": self.persona_format,
            "answer_format": self.answer_format,
            "include_time_info": self.include_time_info,
            "include_ideology": self.include_ideology,
            "include_party": self.include_party,
            "baseline": self.baseline,
            "temporal_cutoff": (
                self.temporal_cutoff.strftime("%Y-%m-%dT%H:%M:%SZ")
                if self.temporal_cutoff
                else None
            ),
            "candidate_context": self.candidate_context,
            "survey_year": self.survey_year,
        }


def persona_tag_lines(voter: VoterProfile | RespondentRecord, cfg: PromptConfig) -> str:
    """The persona's tags as key:value lines, minus any ablated tags."""
    lines: list[str] = []
    if isinstance(voter, VoterProfile):
        for attr in ATTRIBUTES:
            if attr == "ideology" and not cfg.include_ideology:
                continue
            if attr == "partisanship" and not cfg.include_party:
                continue
            lines.append(f"{VOTER_TAG_TITLES[attr]}: {voter.tags[attr]}")
    else:
        for key in RESPONDENT_TAG_KEYS:
            if key == "IDEOLOGY" and not cfg.include_ideology:
                continue
            if key == "PARTY" and not cfg.include_party:
                continue
            value = voter.tags.get(key)
            if value is not None:
                lines.append(f"{key}: {value}")
    return "\n".join(lines)


def history_posts(voter: VoterProfile | RespondentRecord, cfg: PromptConfig) -> list[Post]:
    """Post history eligible for the prompt under the temporal cutoff."""
    if not isinstance(voter, VoterProfile) or cfg.baseline != 3:
        return []
    posts = voter.post_history
    if posts and cfg.temporal_cutoff is None:
        raise ValueError("baseline 3 with timestamped posts requires a temporal_cutoff")
    return [p for p in posts if p.pub_time < cfg.temporal_cutoff]


def options_block(question: Question) -> str:
    return "\n".join(f"{o.letter}. {o.text}" for o in question.options)


def render_prompt(
    voter: VoterProfile | RespondentRecord,
    question: Question,
    cfg: PromptConfig,
    biography: str | None = None,
    posts: Sequence[Post] | None = None,
) -> str:
    """Fill the survey template for one voter and one question.

    `biography` replaces the tag lines when persona_format is biography;
    `posts` overrides the cutoff-filtered history (used for context-budget
    truncation).
    """
    state = voter.state
    parts: list[str] = []
    if cfg.include_time_info:
        parts.append(prompts.time_framing(cfg.survey_year))
    parts.append(prompts.persona_intro(state))
    if posts is None:
        posts = history_posts(voter, cfg)
    if cfg.baseline == 3 and posts:
        comments = "\n" + "\n".join(f"- {p.text}" for p in posts)
        parts.append(prompts.HISTORY_SECTION.format(comments=comments))
    if cfg.persona_format == "biography" and biography:
        info = biography
    else:
        info = "\n" + persona_tag_lines(voter, cfg)
    parts.append(prompts.PERSONAL_SECTION.format(info=info))
    if cfg.baseline == 3 and cfg.candidate_context:
        parts.append(prompts.CANDIDATE_SECTION.format(context=cfg.candidate_context))
    parts.append(
        prompts.QUESTION_SECTION.format(question=question.text, options=options_block(question))
    )
    parts.append(prompts.ANSWER_REASON if cfg.answer_format == "reason" else prompts.ANSWER_DIRECT)
    return "".join(parts)


class BiographyCache:
    def __init__(self):
        self._data: dict[str, str] = {}

    @staticmethod
    def key(backend_id: str, voter_id: str, prompt: str) -> str:
        return f"{backend_id}|{voter_id}|{hashlib.sha256(prompt.encode()).hexdigest()}"

    def get(self, key: str) -> str | None:
        return self._data.get(key)

    def put(self, key: str, value: str) -> None:
        self._data[key] = value


def generate_biography(
    voter: VoterProfile | RespondentRecord,
    backend,
    cfg: PromptConfig | None = None,
    cache: BiographyCache | None = None,
) -> str:
    """Second-person biography from the persona's tags, cached per voter."""
    cfg = cfg or PromptConfig()
    info = "\n" + persona_tag_lines(voter, cfg)
    prompt = prompts.BIOGRAPHY_TEMPLATE.format(info=info)
    voter_id = voter.user_id if isinstance(voter, VoterProfile) else voter.respondent_id
    key = BiographyCache.key(backend.backend_id, voter_id, prompt)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    raw = backend.complete([{"role": "user", "content": prompt}])
    match = _JSON_BLOCK.search(raw)
    text = raw.strip()
    if match:
        try:
            payload = json.loads(match.group(0))
            if isinstance(payload, dict) and isinstance(payload.get("answer"), str):
                text = payload["answer"]
        except json.JSONDecodeError:
            pass
    if cache is not None:
        cache.put(key, text)
    return text


@dataclass
class ResponseRecord:
    voter_id: str
    question_id: str
    letter: str | None
    raw_text: str
    latency_ms: float = 0.0
    attempts: int = 1
    note: str | None = None
    state: str | None = None

    def to_dict(self) -> dict:
        return {
            "voter_id": self.voter_id,
            "question_id": self.question_id,
            "letter": self.letter,
            "raw_text": self.raw_text,
            "latency_ms": self.latency_ms,
            "attempts": self.attempts,
            "note": self.note,
            "state": self.state,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "ResponseRecord":
        return cls(
            voter_id=row["voter_id"],
            question_id=row["question_id"],
            letter=row.get("letter"),
            raw_text=row.get("raw_text", ""),
            latency_ms=float(row.get("latency_ms", 0.0)),
            attempts=int(row.get("attempts", 1)),
            note=row.get("note"),
            state=row.get("state"),
        )


_JSON_BLOCK = re.compile(r"\{.*?\}", re.DOTALL)
_LETTER_TOKEN = re.compile(r"(?<![A-Za-z0-9])([A-Za-z])(?![A-Za-z0-9])")


def _normalize_letter(value: str, question: Question) -> str | None:
    value = value.strip()
    if len(value) == 1 and value.isalpha():
        opt = question.option(value)
        return opt.letter if opt else None
    return None


def parse_answer(raw: str, question: Question) -> tuple[str | None, str | None]:
    """Extract and validate an option letter from a backend reply.

    Strict {"answer": X} parse first, then the first standalone letter token
    that names one of the question's options. Returns (letter, note).
    """
    match = _JSON_BLOCK.search(raw)
    if match:
        try:
            payload = json.loads(match.group(0))
        except json.JSONDecodeError:
            payload = None
        if isinstance(payload, dict) and "answer" in payload:
            value = str(payload["answer"]).strip()
            letter = _normalize_letter(value, question)
            if letter is not None:
                return letter, None
            for token in _LETTER_TOKEN.findall(value):
                letter = _normalize_letter(token, question)
                if letter is not None:
                    return letter, None
            return None, f"invalid-letter: {value!r}"
    for token in _LETTER_TOKEN.findall(raw):
        letter = _normalize_letter(token, question)
        if letter is not None:
            return letter, "fallback-letter"
    return None, "unparseable"


def _deterministic_backend(backend) -> bool:
    return isinstance(backend, (MockBackend, RecordedBackend))


def ask(
    voter: VoterProfile | RespondentRecord,
    question: Question,
    cfg: PromptConfig,
    backend,
    biography: str | None = None,
) -> ResponseRecord:
    """One interview turn; never raises past the run loop."""
    voter_id = voter.user_id if isinstance(voter, VoterProfile) else voter.respondent_id
    state = voter.state
    posts = history_posts(voter, cfg)
    prompt = render_prompt(voter, question, cfg, biography=biography, posts=posts)
    budget = getattr(backend, "config", None) and backend.config.context_chars
    while budget and len(prompt) > budget and posts:
        posts = posts[1:]  # oldest first
        prompt = render_prompt(voter, question, cfg, biography=biography, posts=posts)
    started = time.monotonic()
    try:
        raw = backend.complete([{"role": "user", "content": prompt}])
    except TransportError as exc:
        return ResponseRecord(
            voter_id=voter_id,
            question_id=question.id,
            letter=None,
            raw_text="",
            latency_ms=0.0,
            note=f"aborted: {exc}",
            state=state,
        )
    latency = 0.0 if _deterministic_backend(backend) else (time.monotonic() - started) * 1e3
    letter, note = parse_answer(raw, question)
    return ResponseRecord(
        voter_id=voter_id,
        question_id=question.id,
        letter=letter,
        raw_text=raw,
        latency_ms=round(latency, 3),
        note=note,
        state=state,
    )


@dataclass
class RunManifest:
    run_id: str
    mode: str
    seed: int
    prompt_config: dict
    backend_id: str
    sample_refs: list[str] = field(default_factory=list)
    issued: int = 0
    answered: int = 0
    refused: int = 0
    unparseable: int = 0
    aborted: int = 0
    flags: dict[str, int] = field(default_factory=dict)

    def reconciled(self) -> bool:
        return self.issued == self.answered + self.unparseable + self.aborted

    def flag(self, name: str) -> None:
        self.flags[name] = self.flags.get(name, 0) + 1

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "mode": self.mode,
            "seed": self.seed,
            "prompt_config": self.prompt_config,
            "backend_id": self.backend_id,
            "sample_refs": self.sample_refs,
            "counts": {
                "issued": self.issued,
                "answered": self.answered,
                "refused": self.refused,
                "unparseable": self.unparseable,
                "aborted": self.aborted,
            },
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "RunManifest":
        counts = row.get("counts", {})
        return cls(
            run_id=row["run_id"],
            mode=row["mode"],
            seed=int(row.get("seed", 0)),
            prompt_config=row.get("prompt_config", {}),
            backend_id=row.get("backend_id", ""),
            sample_refs=list(row.get("sample_refs", [])),
            issued=counts.get("issued", 0),
            answered=counts.get("answered", 0),
            refused=counts.get("refused", 0),
            unparseable=counts.get("unparseable", 0),
            aborted=counts.get("aborted", 0),
            flags=dict(row.get("flags", {})),
        )


def _make_run_id(mode: str, seed: int, cfg: PromptConfig, backend_id: str) -> str:
    body = dumps_canonical({"mode": mode, "seed": seed, "cfg": cfg.to_dict(), "backend": backend_id})
    return f"{mode}-{hashlib.sha256(body.encode()).hexdigest()[:12]}"


def _record_counts(record: ResponseRecord, question: Question, manifest: RunManifest) -> None:
    manifest.issued += 1
    if record.letter is None:
        if record.note and record.note.startswith("aborted"):
            manifest.aborted += 1
        else:
            manifest.unparseable += 1
        return
    manifest.answered += 1
    if record.letter == question.refusal_letter:
        manifest.refused += 1


def _interview(
    voters: Sequence[VoterProfile | RespondentRecord],
    questionnaire: Questionnaire,
    cfg: PromptConfig,
    backend,
    manifest: RunManifest,
    max_workers: int = 1,
) -> list[ResponseRecord]:
    bio_cache = BiographyCache()
    biographies: dict[str, str | None] = {}

    def bio_for(voter) -> str | None:
        if cfg.persona_format != "biography":
            return None
        vid = voter.user_id if isinstance(voter, VoterProfile) else voter.respondent_id
        if vid not in biographies:
            try:
                biographies[vid] = generate_biography(voter, backend, cfg, bio_cache)
            except TransportError:
                biographies[vid] = None
                manifest.flag("biography_fallback")
        return biographies[vid]

    jobs = []
    for voter in voters:
        bio = bio_for(voter)
        if cfg.baseline == 3 and isinstance(voter, VoterProfile):
            if not history_posts(voter, cfg):
                manifest.flag("empty_history")
        for question in questionnaire:
            jobs.append((voter, question, bio))

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(
                pool.map(lambda j: ask(j[0], j[1], cfg, backend, biography=j[2]), jobs)
            )
    else:
        records = [ask(voter, question, cfg, backend, biography=bio) for voter, question, bio in jobs]

    order = {q.id: i for i, q in enumerate(questionnaire)}
    records.sort(key=lambda r: (r.voter_id, order.get(r.question_id, 0)))
    for record in records:
        _record_counts(record, questionnaire.get(record.question_id), manifest)
    return records


def select_respondents(
    respondents: Sequence[RespondentRecord], n: int, seed: int
) -> list[RespondentRecord]:
    """Seeded fixed subset, stable across runs and input order."""
    pool = sorted(respondents, key=lambda r: r.respondent_id)
    if len(pool) <= n:
        return pool
    rng = make_rng(seed, "respondent-subset", n)
    chosen = rng.sample(pool, n)
    return sorted(chosen, key=lambda r: r.respondent_id)


def run_voter_wise(
    respondents: Sequence[RespondentRecord],
    questionnaire: Questionnaire,
    cfg: PromptConfig,
    backend,
    seed: int = 0,
    max_workers: int = 1,
) -> tuple[list[ResponseRecord], RunManifest]:
    """Interview every respondent on every question."""
    manifest = RunManifest(
        run_id=_make_run_id("voter", seed, cfg, backend.backend_id),
        mode="voter",
        seed=seed,
        prompt_config=cfg.to_dict(),
        backend_id=backend.backend_id,
    )
    voters = sorted(respondents, key=lambda r: r.respondent_id)
    records = _interview(voters, questionnaire, cfg, backend, manifest, max_workers)
    return records, manifest


@dataclass
class StateResult:
    state: str
    dem_share: float | None
    rep_share: float | None
    winner: str | None  # "dem" | "rep" | None (undecided)
    valid_votes: int = 0
    undecided: bool = False
    actual_dem_share: float | None = None
    actual_rep_share: float | None = None
    actual_winner: str | None = None

    def to_dict(self) -> dict:
        return {
            "state": self.state,
            "dem_share": self.dem_share,
            "rep_share": self.rep_share,
            "winner": self.winner,
            "valid_votes": self.valid_votes,
            "undecided": self.undecided,
            "actual_dem_share": self.actual_dem_share,
            "actual_rep_share": self.actual_rep_share,
            "actual_winner": self.actual_winner,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "StateResult":
        return cls(
            state=row["state"],
            dem_share=row.get("dem_share"),
            rep_share=row.get("rep_share"),
            winner=row.get("winner"),
            valid_votes=int(row.get("valid_votes", 0)),
            undecided=bool(row.get("undecided", False)),
            actual_dem_share=row.get("actual_dem_share"),
            actual_rep_share=row.get("actual_rep_share"),
            actual_winner=row.get("actual_winner"),
        )


def tally_state(
    state: str, records: Sequence[ResponseRecord], questionnaire: Questionnaire
) -> StateResult:
    """Relative two-party vote share for one state; refusals and unparsed
    answers never enter the denominator."""
    vote_q = questionnaire.vote_question()
    if vote_q is None:
        raise ValueError("questionnaire has no vote question (no party-mapped options)")
    party_of = {letter: party for party, letter in vote_q.party_letters().items()}
    counts = {"dem": 0, "rep": 0}
    for record in records:
        if record.question_id != vote_q.id or record.letter is None:
            continue
        party = party_of.get(record.letter)
        if party:
            counts[party] += 1
    valid = counts["dem"] + counts["rep"]
    if valid == 0:
        return StateResult(
            state=state, dem_share=None, rep_share=None, winner=None, valid_votes=0, undecided=True
        )
    dem = counts["dem"] / valid
    rep = counts["rep"] / valid
    if counts["dem"] == counts["rep"]:
        return StateResult(
            state=state, dem_share=dem, rep_share=rep, winner=None, valid_votes=valid, undecided=True
        )
    winner = "dem" if counts["dem"] > counts["rep"] else "rep"
    return StateResult(
        state=state, dem_share=dem, rep_share=rep, winner=winner, valid_votes=valid, undecided=False
    )


def run_state_wise(
    samples: dict[str, list[VoterProfile]],
    questionnaire: Questionnaire,
    cfg: PromptConfig,
    backend,
    seed: int = 0,
    max_workers: int = 1,
) -> tuple[dict[str, list[ResponseRecord]], list[StateResult], RunManifest]:
    """Interview each state's sample and tally per-state vote shares."""
    manifest = RunManifest(
        run_id=_make_run_id("state", seed, cfg, backend.backend_id),
        mode="state",
        seed=seed,
        prompt_config=cfg.to_dict(),
        backend_id=backend.backend_id,
        sample_refs=sorted(samples),
    )
    records_by_state: dict[str, list[ResponseRecord]] = {}
    results: list[StateResult] = []
    for state in sorted(samples):
        voters = sorted(samples[state], key=lambda v: v.user_id)
        records = _interview(voters, questionnaire, cfg, backend, manifest, max_workers)
        records_by_state[state] = records
        results.append(tally_state(state, records, questionnaire))
    return records_by_state, results, manifest


def write_run(
    out_dir: str | Path,
    manifest: RunManifest,
    records: Iterable[ResponseRecord],
    state_results: Sequence[StateResult] | None = None,
    questionnaire_path: str | Path | None = None,
    samples: dict[str, list[VoterProfile]] | None = None,
    respondents: Sequence[RespondentRecord] | None = None,
) -> Path:
    """Persist a run directory: manifest, records, and the artifacts the
    inspection service needs (instrument copy, interviewed individuals)."""
    out = Path(out_dir) / manifest.run_id
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=1, sort_keys=True), encoding="utf-8"
    )
    write_jsonl(out / "records.jsonl", (r.to_dict() for r in records))
    if state_results is not None:
        (out / "state_results.json").write_text(
            json.dumps([r.to_dict() for r in state_results], indent=1), encoding="utf-8"
        )
    if questionnaire_path is not None:
        (out / "questionnaire.json").write_text(
            Path(questionnaire_path).read_text(encoding="utf-8"), encoding="utf-8"
        )
    if samples is not None:
        rows = [p.to_dict() for state in sorted(samples) for p in samples[state]]
        write_jsonl(out / "individuals.jsonl", rows)
    if respondents is not None:
        write_jsonl(out / "individuals.jsonl", (r.to_dict() for r in respondents))
    return out


def read_records(path: str | Path) -> list[ResponseRecord]:
    return [ResponseRecord.from_dict(row) for row in read_jsonl(path)]
