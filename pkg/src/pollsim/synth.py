"""Synthetic desk-scale inputs: a raw post corpus with known cleaning
outcomes, a compact five-question instrument, state marginals, census
populations, survey respondents, and actual-result tables.

Everything here is deterministic under its seed arguments so tests and the
runnable scripts share one source of fixtures.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .jsonl import write_jsonl
from .questionnaire import Questionnaire, Question, Option, RespondentRecord
from .rng import make_rng
from .taxonomy import Taxonomy

DESK_STATES = ("Alderton", "Brookfield", "Carverton")
# 500k at a 1/10,000 fraction -> 50 personas per state
DESK_POPULATIONS = {"Alderton": 500_000, "Brookfield": 500_000, "Carverton": 500_000}

CENSUS_AGE_BANDS = ("18-24", "25-34", "35-44", "45-64", "65+")


def desk_instrument() -> Questionnaire:
    """Five questions over five topics; the first is the vote question."""
    mk = Option
    questions = [
        Question(
            id="VOTE01",
            topic="Voting Behavior",
            text="If the presidential election were held today, who would you vote for?",
            options=[
                mk("A", "Joe Biden", party="dem"),
                mk("B", "Donald Trump", party="rep"),
                mk("C", "Someone else"),
                mk("D", "DK/RF", is_refusal=True),
            ],
            voting_subset=True,
        ),
        Question(
            id="ECON02",
            topic="Economy",
            text="Over the past year, would you say the nation's economy has gotten better, stayed the same, or gotten worse?",
            options=[
                mk("A", "Gotten better", polarity_score=-1),
                mk("B", "Stayed about the same", polarity_score=0),
                mk("C", "Gotten worse", polarity_score=1),
                mk("D", "DK/RF", is_refusal=True),
            ],
            voting_subset=True,
        ),
        Question(
            id="ENV03",
            topic="Environment",
            text="Should federal spending on protecting the environment be increased, decreased, or kept the same?",
            options=[
                mk("A", "Increased", polarity_score=2),
                mk("B", "Kept the same", polarity_score=0),
                mk("C", "Decreased", polarity_score=-2),
                mk("D", "DK/RF", is_refusal=True),
            ],
        ),
        Question(
            id="IMM04",
            topic="Immigration",
            text="Do you favor or oppose allowing more legal immigration into the country?",
            options=[
                mk("A", "Favor", polarity_score=2),
                mk("B", "Neither favor nor oppose", polarity_score=0),
                mk("C", "Oppose", polarity_score=-2),
                mk("D", "DK/RF", is_refusal=True),
            ],
        ),
        Question(
            id="HC05",
            topic="Health Care",
            text="Do you favor or oppose a government-run health insurance plan available to all Americans?",
            options=[
                mk("A", "Favor", polarity_score=2),
                mk("B", "Oppose", polarity_score=-2),
                mk("C", "DK/RF", is_refusal=True),
            ],
        ),
    ]
    return Questionnaire(questions=questions)


def write_desk_instrument(path: str | Path) -> Path:
    from .questionnaire import save_questionnaire

    save_questionnaire(desk_instrument(), path)
    return Path(path)


def _stamp(day: int, hour: int = 0) -> str:
    # days index into 2020; keep within the year
    month = min(12, 1 + day // 28)
    dom = 1 + (day % 28)
    return f"2020-{month:02d}-{dom:02d}T{hour:02d}:00:00Z"


def _post_row(uid: str, i: int, text: str, lang: str, day: int) -> dict:
    return {
        "user_id": uid,
        "user_at_name": f"@{uid}",
        "tweet_id": f"{uid}-t{i:03d}",
        "tweet_content": text,
        "pub_time": _stamp(day, hour=i % 24),
        "lang": lang,
    }


def known_outcome_corpus() -> tuple[list[dict], set[str]]:
    """Ten crafted users; exactly four survive the full cleaning pipeline.

    u01 prolific+diverse (kept), u02 all-identical spam (overlap), u03
    non-English, u04 exactly at the post threshold (strictly-over rule),
    u05 just over the threshold (kept), u06 bilingual but thin in English,
    u07 prolific+diverse (kept), u08 two alternating templates (overlap),
    u09 shares one common word per post (kept), u10 mostly malformed.
    """
    rows: list[dict] = []

    def unique_text(uid: str, i: int) -> str:
        return f"alpha{uid}{i} bravo{uid}{i} charlie{uid}{i} delta{uid}{i} echo{uid}{i}"

    for i in range(40):  # u01: survives
        rows.append(_post_row("u01", i, unique_text("u01", i), "en", i * 9))
    for i in range(35):  # u02: identical posts -> overlap score 0.8
        rows.append(_post_row("u02", i, "gran oferta compre ahora mismo aqui", "en", i * 10))
    for i in range(40):  # u03: non-English only
        rows.append(_post_row("u03", i, unique_text("u03", i), "es", i * 9))
    for i in range(30):  # u04: exactly 30 posts -> dropped by strict > rule
        rows.append(_post_row("u04", i, unique_text("u04", i), "en", i * 12))
    for i in range(31):  # u05: survives with one post to spare
        rows.append(_post_row("u05", i, unique_text("u05", i), "en", i * 11))
    for i in range(20):  # u06: 20 en + 20 es -> too few after language filter
        rows.append(_post_row("u06", i, unique_text("u06", i), "en", i * 9))
    for i in range(20, 40):
        rows.append(_post_row("u06", i, unique_text("u06x", i), "es", i * 9))
    for i in range(50):  # u07: survives
        rows.append(_post_row("u07", i, unique_text("u07", i), "en", i * 7))
    for i in range(33):  # u08: two disjoint templates -> overlap >= 0.32
        text = "crypto moon rocket gains soon" if i % 2 else "follow back instantly free promo"
        rows.append(_post_row("u08", i, text, "en", i * 10))
    for i in range(40):  # u09: one shared word per post -> overlap 1/9
        rows.append(
            _post_row("u09", i, f"ballot kilo{i} lima{i} mike{i} november{i}", "en", i * 9)
        )
    for i in range(10):  # u10: too few valid posts
        rows.append(_post_row("u10", i, unique_text("u10", i), "en", i * 3))

    # corrupt rows: missing content, whitespace content, bad timestamp
    rows.append({"user_id": "u10", "tweet_id": "u10-bad1", "pub_time": _stamp(5), "lang": "en"})
    rows.append(_post_row("u10", 90, "   ", "en", 6))
    bad_time = _post_row("u10", 91, "valid words here", "en", 7)
    bad_time["pub_time"] = "not-a-time"
    rows.append(bad_time)
    # duplicate tweet id: repeat of u01's first post
    rows.append(dict(rows[0]))

    return rows, {"u01", "u05", "u07", "u09"}


def synth_corpus(n_users: int = 400, seed: int = 7, posts_per_user: int = 35) -> list[dict]:
    """A clean synthetic corpus: every user survives the pipeline."""
    rng = make_rng(seed, "synth-corpus")
    rows: list[dict] = []
    for u in range(n_users):
        uid = f"v{u:04d}"
        day_step = rng.randrange(7, 11)
        for i in range(posts_per_user):
            text = (
                f"topic{rng.randrange(1000)} views{uid}{i} about issue{rng.randrange(500)} "
                f"word{uid}{i}a word{uid}{i}b"
            )
            rows.append(_post_row(uid, i, text, "en", min(355, i * day_step)))
    return rows


def write_corpus(path: str | Path, rows: list[dict]) -> Path:
    write_jsonl(path, rows)
    return Path(path)


def write_marginals_dir(out_dir: str | Path, states=DESK_STATES, seed: int = 11) -> Path:
    """census.csv (gender/age/race, counts) + anes.csv (ideology/partisanship,
    survey-sized counts), both keyed by state."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    taxonomy = Taxonomy()

    def weights(state: str, attr: str, categories) -> list[float]:
        rng = make_rng(seed, "marginal", state, attr)
        raw = [0.35 + rng.random() for _ in categories]
        total = sum(raw)
        return [w / total for w in raw]

    with open(out / "census.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "attribute", "category", "mass"])
        for state in states:
            population = DESK_POPULATIONS.get(state, 500_000)
            for cat, w in zip(("Male", "Female"), weights(state, "gender", "MF")):
                writer.writerow([state, "gender", cat, round(population * w, 3)])
            for cat, w in zip(CENSUS_AGE_BANDS, weights(state, "age", CENSUS_AGE_BANDS)):
                writer.writerow([state, "age", cat, round(population * w, 3)])
            races = taxonomy.categories["race"]
            for cat, w in zip(races, weights(state, "race", races)):
                writer.writerow([state, "race", cat, round(population * w, 3)])

    with open(out / "anes.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "attribute", "category", "mass"])
        for state in states:
            for attr in ("ideology", "partisanship"):
                cats = taxonomy.categories[attr]
                for cat, w in zip(cats, weights(state, attr, cats)):
                    writer.writerow([state, attr, cat, round(1200 * w, 3)])
    return out


def write_census_csv(path: str | Path, populations=DESK_POPULATIONS) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "population"])
        for state, population in populations.items():
            writer.writerow([state, population])
    return path


def synth_respondents(
    questionnaire: Questionnaire, n: int = 50, seed: int = 23
) -> list[RespondentRecord]:
    """Respondents with the full ANES-style tag set and seeded gold answers
    (roughly one refusal in ten)."""
    taxonomy = Taxonomy()
    records = []
    for i in range(n):
        rng = make_rng(seed, "respondent", i)
        tags = {
            "AGE": rng.choice(taxonomy.categories["age"]),
            "GENDER": rng.choice(taxonomy.categories["gender"]),
            "RACE": rng.choice(taxonomy.categories["race"]),
            "INCOME": rng.choice(("Under 25k", "25-50k", "50-100k", "Over 100k")),
            "EDUCATION": rng.choice(("High school", "Some college", "Bachelor", "Graduate")),
            "AREA": rng.choice(("Urban", "Suburban", "Rural")),
            "REGION": rng.choice(("Northeast", "Midwest", "South", "West")),
            "EMPLOYMENT": rng.choice(("Employed", "Unemployed", "Retired", "Student")),
            "MARITAL": rng.choice(("Married", "Single", "Divorced", "Widowed")),
            "RELIGIOUS": rng.choice(("Protestant", "Catholic", "None", "Other")),
            "PARTY": rng.choice(taxonomy.categories["partisanship"]),
            "IDEOLOGY": rng.choice(taxonomy.categories["ideology"]),
        }
        answers = {}
        for q in questionnaire:
            if rng.random() < 0.1:
                answers[q.id] = q.refusal_letter
            else:
                substantive = [o.letter for o in q.options if not o.is_refusal]
                answers[q.id] = rng.choice(substantive)
        records.append(
            RespondentRecord(
                respondent_id=f"r{i:04d}",
                tags=tags,
                answers=answers,
                state=DESK_STATES[i % len(DESK_STATES)],
            )
        )
    return records


def write_respondents(path: str | Path, records: list[RespondentRecord]) -> Path:
    write_jsonl(path, (r.to_dict() for r in records))
    return Path(path)


def write_actual_results_csv(
    path: str | Path, states=DESK_STATES, marginal_seed: int = 11, noise_seed: int = 31
) -> Path:
    """Two-party vote totals per state; the last state is flagged battleground.

    Shares derive from the same partisanship weights the marginals use (plus
    a little noise), so distribution-guided simulations land near them.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    taxonomy = Taxonomy()
    cats = taxonomy.categories["partisanship"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "dem", "rep", "battleground"])
        for i, state in enumerate(states):
            # mirror of write_marginals_dir's weight draw for partisanship
            rng = make_rng(marginal_seed, "marginal", state, "partisanship")
            raw = [0.35 + rng.random() for _ in cats]
            weights = dict(zip(cats, raw))
            noise = make_rng(noise_seed, "actual", state).uniform(-0.02, 0.02)
            dem_share = weights["Democrat"] / (weights["Democrat"] + weights["Republican"])
            dem_share = min(0.95, max(0.05, dem_share + noise))
            total = DESK_POPULATIONS.get(state, 500_000) * 0.6
            writer.writerow(
                [
                    state,
                    round(total * dem_share),
                    round(total * (1 - dem_share)),
                    1 if i == len(states) - 1 else 0,
                ]
            )
    return path


def write_prompt_config(path: str | Path, **overrides) -> Path:
    from .prompts import DEFAULT_2020_CANDIDATE_CONTEXT

    cfg = {
        "persona_format": "dict",
        "answer_format": "direct",
        "baseline": 3,
        "temporal_cutoff": "2020-11-01T00:00:00Z",
        "candidate_context": DEFAULT_2020_CANDIDATE_CONTEXT,
        "survey_year": 2020,
    }
    cfg.update(overrides)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg, indent=1), encoding="utf-8")
    return path


def write_backend_config(path: str | Path, backend_id: str = "mock-a", mock_seed: int = 1) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(
            {"backend_id": backend_id, "mock": True, "mock_seed": mock_seed, "max_tokens": 64},
            indent=1,
        ),
        encoding="utf-8",
    )
    return path
