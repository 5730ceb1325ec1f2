"""HTTP inspection service over simulation run directories: population
filtering, per-question distributions, voter cards, crosstabs, and
multi-round chat with a simulated voter.

Runs are immutable once loaded; every read endpoint is side-effect-free.
Chat sessions live in memory and are serialized per session id.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .backends import BackendConfig, TransportError, make_backend
from .engine import PromptConfig, RunManifest, persona_tag_lines, history_posts
from . import prompts
from .jsonl import read_jsonl
from .questionnaire import Questionnaire, RespondentRecord, load_questionnaire
from .rng import make_rng
from .sampler import VoterProfile


class Condition(BaseModel):
    question_id: str
    letter: str


class FilterSpecModel(BaseModel):
    state: str | None = None
    conditions: list[Condition] = Field(default_factory=list)


class SampleRequest(FilterSpecModel):
    n: int = 100
    seed: int = 0


class ChatSessionRequest(BaseModel):
    run_id: str
    voter_id: str


class ChatMessageRequest(BaseModel):
    text: str


@dataclass
class Individual:
    id: str
    state: str | None
    tags: dict
    persona: VoterProfile | RespondentRecord
    answers: dict[str, str | None] = field(default_factory=dict)

    def card(self) -> dict:
        posts = (
            [p.text for p in self.persona.post_history]
            if isinstance(self.persona, VoterProfile)
            else []
        )
        return {
            "id": self.id,
            "state": self.state,
            "tags": self.tags,
            "posts": posts,
            "answers": self.answers,
        }


@dataclass
class RunData:
    run_id: str
    manifest: RunManifest
    questionnaire: Questionnaire
    individuals: dict[str, Individual]

    def filtered_ids(self, state: str | None, conditions: Sequence[Condition]) -> list[str]:
        for i, cond in enumerate(conditions):
            question = self.questionnaire.get(cond.question_id)
            if question is None:
                raise HTTPException(
                    422, detail=f"conditions[{i}].question_id: unknown question {cond.question_id}"
                )
            if question.option(cond.letter) is None:
                raise HTTPException(
                    422, detail=f"conditions[{i}].letter: no option {cond.letter} on {cond.question_id}"
                )
        ids = []
        for vid in sorted(self.individuals):
            ind = self.individuals[vid]
            if state is not None and ind.state != state:
                continue
            if all(ind.answers.get(c.question_id) == c.letter.upper() for c in conditions):
                ids.append(vid)
        return ids

    def support_rates(self, ids: Sequence[str]) -> dict:
        vote_q = self.questionnaire.vote_question()
        if vote_q is None:
            return {"dem": None, "rep": None, "valid_votes": 0}
        party_of = {letter: party for party, letter in vote_q.party_letters().items()}
        counts = {"dem": 0, "rep": 0}
        for vid in ids:
            party = party_of.get(self.individuals[vid].answers.get(vote_q.id))
            if party:
                counts[party] += 1
        valid = counts["dem"] + counts["rep"]
        if valid == 0:
            return {"dem": None, "rep": None, "valid_votes": 0}
        return {
            "dem": counts["dem"] / valid,
            "rep": counts["rep"] / valid,
            "valid_votes": valid,
        }

    def summary_payload(self, ids: Sequence[str]) -> dict:
        per_state: dict[str, int] = {}
        for vid in ids:
            state = self.individuals[vid].state or "unknown"
            per_state[state] = per_state.get(state, 0) + 1
        return {
            "size": len(ids),
            "per_state": dict(sorted(per_state.items())),
            "support": self.support_rates(ids),
        }


def _load_run(run_dir: Path) -> RunData:
    manifest_path = run_dir / "manifest.json"
    try:
        manifest = RunManifest.from_dict(
            json.loads(manifest_path.read_text(encoding="utf-8"))
        )
    except (OSError, ValueError, KeyError) as exc:
        raise HTTPException(422, detail=f"corrupt run manifest in {run_dir.name}: {exc}")
    try:
        questionnaire = load_questionnaire(run_dir / "questionnaire.json")
    except (OSError, ValueError) as exc:
        raise HTTPException(422, detail=f"run {run_dir.name} has no loadable instrument: {exc}")

    # The same pool user may back personas in several states, so persona
    # identity is state-qualified; respondents are globally unique already.
    individuals: dict[str, Individual] = {}
    individuals_path = run_dir / "individuals.jsonl"
    if individuals_path.exists():
        for row in read_jsonl(individuals_path):
            if "respondent_id" in row:
                persona: VoterProfile | RespondentRecord = RespondentRecord.from_dict(row)
                vid = persona.respondent_id
                tags = dict(persona.tags)
            else:
                persona = VoterProfile.from_dict(row)
                vid = f"{persona.state}:{persona.user_id}"
                tags = dict(persona.tags)
            individuals[vid] = Individual(
                id=vid, state=persona.state, tags=tags, persona=persona
            )
    records_path = run_dir / "records.jsonl"
    if records_path.exists():
        for row in read_jsonl(records_path):
            composite = f"{row.get('state')}:{row['voter_id']}"
            ind = individuals.get(composite) or individuals.get(row["voter_id"])
            if ind is not None:
                ind.answers[row["question_id"]] = row.get("letter")
    return RunData(
        run_id=manifest.run_id,
        manifest=manifest,
        questionnaire=questionnaire,
        individuals=individuals,
    )


class RunStore:
    def __init__(self, runs_dir: str | Path):
        self._dir = Path(runs_dir)
        self._cache: dict[str, RunData] = {}
        self._lock = threading.Lock()

    def list_runs(self) -> list[dict]:
        out = []
        if not self._dir.exists():
            return out
        for sub in sorted(self._dir.iterdir()):
            manifest = sub / "manifest.json"
            if not manifest.is_file():
                continue
            try:
                row = json.loads(manifest.read_text(encoding="utf-8"))
            except (OSError, ValueError):
                continue
            counts = row.get("counts", {})
            out.append(
                {
                    "run_id": row.get("run_id", sub.name),
                    "mode": row.get("mode"),
                    "issued": counts.get("issued", 0),
                    "sample_refs": row.get("sample_refs", []),
                }
            )
        return out

    def get(self, run_id: str) -> RunData:
        with self._lock:
            if run_id in self._cache:
                return self._cache[run_id]
        run_dir = self._dir / run_id
        if not run_dir.is_dir():
            raise HTTPException(404, detail=f"unknown run {run_id}")
        data = _load_run(run_dir)
        with self._lock:
            self._cache[run_id] = data
        return data


@dataclass
class ChatSession:
    session_id: str
    run_id: str
    voter_id: str
    preamble: str
    history: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


def render_persona_preamble(individual: Individual, cfg: PromptConfig) -> str:
    """Same persona definition the batch interviews use (context-rich style:
    tags plus cutoff-filtered post history), minus the question block."""
    persona = individual.persona
    parts = []
    if cfg.include_time_info:
        parts.append(prompts.time_framing(cfg.survey_year))
    parts.append(prompts.persona_intro(persona.state))
    posts = history_posts(persona, cfg)
    if posts:
        comments = "\n" + "\n".join(f"- {p.text}" for p in posts)
        parts.append(prompts.HISTORY_SECTION.format(comments=comments))
    parts.append(prompts.PERSONAL_SECTION.format(info="\n" + persona_tag_lines(persona, cfg)))
    if cfg.candidate_context:
        parts.append(prompts.CANDIDATE_SECTION.format(context=cfg.candidate_context))
    parts.append("Answer follow-up questions in character, in the first person.")
    return "".join(parts)


def create_app(
    runs_dir: str | Path,
    backend_config: BackendConfig | None = None,
    sample_cap: int = 5000,
    backend=None,
) -> FastAPI:
    store = RunStore(runs_dir)
    if backend is None:
        backend = make_backend(
            backend_config or BackendConfig(backend_id="mock", mock=True, max_tokens=256)
        )
    sessions: dict[str, ChatSession] = {}
    sessions_lock = threading.Lock()

    app = FastAPI(title="pollsim inspection service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def parse_conditions(cond: list[str]) -> list[Condition]:
        parsed = []
        for i, raw in enumerate(cond):
            if ":" not in raw:
                raise HTTPException(422, detail=f"cond[{i}]: expected QUESTION:LETTER, got {raw!r}")
            qid, letter = raw.split(":", 1)
            parsed.append(Condition(question_id=qid, letter=letter))
        return parsed

    @app.get("/runs")
    def list_runs() -> list[dict]:
        return store.list_runs()

    @app.get("/runs/{run_id}/summary")
    def run_summary(run_id: str) -> dict:
        run = store.get(run_id)
        states = sorted({i.state for i in run.individuals.values() if i.state})
        return {
            "run_id": run.run_id,
            "mode": run.manifest.mode,
            "counts": run.manifest.to_dict()["counts"],
            "individuals": len(run.individuals),
            "states": states,
            "questionnaire": run.questionnaire.summary(),
            "questions": [
                {
                    "id": q.id,
                    "topic": q.topic,
                    "text": q.text,
                    "options": [
                        {
                            "letter": o.letter,
                            "text": o.text,
                            "refusal": o.is_refusal,
                            "polarity": o.polarity_score,
                            "party": o.party,
                        }
                        for o in q.options
                    ],
                    "voting_subset": q.voting_subset,
                }
                for q in run.questionnaire
            ],
        }

    @app.post("/runs/{run_id}/filter")
    def filter_population(run_id: str, spec: FilterSpecModel) -> dict:
        run = store.get(run_id)
        ids = run.filtered_ids(spec.state, spec.conditions)
        return run.summary_payload(ids)

    @app.get("/runs/{run_id}/questions/{question_id}/distribution")
    def question_distribution(
        run_id: str,
        question_id: str,
        mode: str = "relative",
        state: str | None = None,
        cond: list[str] = Query(default=[]),
    ) -> dict:
        run = store.get(run_id)
        question = run.questionnaire.get(question_id)
        if question is None:
            raise HTTPException(404, detail=f"unknown question {question_id}")
        if mode not in ("absolute", "relative"):
            raise HTTPException(422, detail=f"mode must be absolute|relative, got {mode!r}")
        ids = run.filtered_ids(state, parse_conditions(cond))
        tallies: dict[str, dict[str, int]] = {}
        for vid in ids:
            ind = run.individuals[vid]
            letter = ind.answers.get(question_id)
            if letter is None:
                continue
            st = ind.state or "unknown"
            tallies.setdefault(st, {})[letter] = tallies.get(st, {}).get(letter, 0) + 1
        payload: dict = {"question_id": question_id, "mode": mode, "states": {}}
        for st in sorted(tallies):
            counts = tallies[st]
            total = sum(counts.values())
            modal = max(sorted(counts), key=lambda l: counts[l])
            values = (
                {l: c / total for l, c in sorted(counts.items())}
                if mode == "relative"
                else dict(sorted(counts.items()))
            )
            payload["states"][st] = {"values": values, "modal": modal, "total": total}
        return payload

    @app.post("/runs/{run_id}/individuals/sample")
    def sample_individuals(run_id: str, req: SampleRequest) -> dict:
        if req.n < 1:
            raise HTTPException(422, detail="n must be >= 1")
        run = store.get(run_id)
        ids = run.filtered_ids(req.state, req.conditions)
        take = min(req.n, len(ids))
        rng = make_rng(req.seed, "cards", run.run_id)
        chosen = sorted(rng.sample(ids, take)) if take < len(ids) else list(ids)
        return {
            "population": len(ids),
            "cards": [run.individuals[vid].card() for vid in chosen],
        }

    @app.get("/runs/{run_id}/crosstab")
    def crosstab(
        run_id: str,
        dims: str,
        state: str | None = None,
        cond: list[str] = Query(default=[]),
        seed: int = 0,
    ) -> dict:
        run = store.get(run_id)
        dim_ids = [d for d in dims.split(",") if d]
        if not (1 <= len(dim_ids) <= 4):
            raise HTTPException(422, detail="dims must name 1-4 questions")
        for qid in dim_ids:
            if run.questionnaire.get(qid) is None:
                raise HTTPException(404, detail=f"unknown question {qid}")
        ids = run.filtered_ids(state, parse_conditions(cond))
        sampled = ids
        if len(ids) > sample_cap:
            rng = make_rng(seed, "crosstab", run.run_id)
            sampled = sorted(rng.sample(ids, sample_cap))
        cells: dict[str, int] = {}
        for vid in sampled:
            answers = run.individuals[vid].answers
            letters = [answers.get(qid) for qid in dim_ids]
            if any(l is None for l in letters):
                continue
            key = "|".join(letters)  # type: ignore[arg-type]
            cells[key] = cells.get(key, 0) + 1
        return {
            "dims": dim_ids,
            "population": len(ids),
            "sampled": len(sampled),
            "cells": dict(sorted(cells.items())),
        }

    @app.post("/chat/sessions")
    def open_session(req: ChatSessionRequest) -> dict:
        run = store.get(req.run_id)
        ind = run.individuals.get(req.voter_id)
        if ind is None:
            raise HTTPException(404, detail=f"unknown voter {req.voter_id}")
        cfg = PromptConfig.from_dict(run.manifest.prompt_config or {})
        session = ChatSession(
            session_id=uuid.uuid4().hex,
            run_id=req.run_id,
            voter_id=req.voter_id,
            preamble=render_persona_preamble(ind, cfg),
        )
        with sessions_lock:
            sessions[session.session_id] = session
        return {"session_id": session.session_id, "voter": ind.card()}

    @app.post("/chat/sessions/{session_id}/messages")
    def send_message(session_id: str, req: ChatMessageRequest) -> dict:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail=f"unknown session {session_id}")
        with session.lock:
            messages = [{"role": "system", "content": session.preamble}]
            messages.extend(
                {"role": turn["role"], "content": turn["text"]} for turn in session.history
            )
            messages.append({"role": "user", "content": req.text})
            try:
                reply = backend.complete(messages, max_tokens=256)
            except TransportError as exc:
                raise HTTPException(502, detail=f"backend failure: {exc}")
            session.history.append({"role": "user", "text": req.text})
            session.history.append({"role": "assistant", "text": reply})
            return {"reply": reply, "history": list(session.history)}

    return app
