"""Evaluation metrics: per-question micro/macro F1 with refusal adjustment,
state-level agreement (CER) and vote-share error (CVS), divergence between
answer distributions, concentration (HHI), and refusal ratios.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import ResponseRecord, StateResult
from .questionnaire import Questionnaire, RespondentRecord

Pair = tuple[str, str | None]


def refusal_adjust(pairs: Sequence[Pair], refusal_letter: str) -> list[Pair]:
    """Drop pairs whose gold answer is the refusal option; the prediction
    side stays untouched (a predicted refusal still scores as a miss)."""
    return [(g, p) for g, p in pairs if g != refusal_letter]


def build_pair_sets(
    records: Iterable[ResponseRecord],
    gold: Sequence[RespondentRecord],
    questionnaire: Questionnaire,
) -> dict[str, list[Pair]]:
    """Align predictions with gold answers per question, refusal-adjusted."""
    gold_by_id = {r.respondent_id: r for r in gold}
    raw: dict[str, list[Pair]] = {q.id: [] for q in questionnaire}
    for record in records:
        respondent = gold_by_id.get(record.voter_id)
        if respondent is None:
            continue
        expected = respondent.answers.get(record.question_id)
        if expected is None:
            continue
        raw.setdefault(record.question_id, []).append((expected, record.letter))
    adjusted = {}
    for qid, pairs in raw.items():
        question = questionnaire.get(qid)
        adjusted[qid] = (
            refusal_adjust(pairs, question.refusal_letter) if question else list(pairs)
        )
    return adjusted


def _question_micro(pairs: Sequence[Pair]) -> float:
    return sum(1 for g, p in pairs if g == p) / len(pairs)


def _question_macro(pairs: Sequence[Pair]) -> float:
    options = sorted({g for g, _ in pairs} | {p for _, p in pairs if p is not None})
    scores = []
    for opt in options:
        tp = sum(1 for g, p in pairs if g == opt and p == opt)
        fp = sum(1 for g, p in pairs if g != opt and p == opt)
        fn = sum(1 for g, p in pairs if g == opt and p != opt)
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return sum(scores) / len(scores) if scores else 0.0


def _mean_over_questions(
    pairs_per_question: Mapping[str, Sequence[Pair]], scorer
) -> float:
    values = []
    for qid, pairs in pairs_per_question.items():
        if not pairs:
            warnings.warn(f"question {qid}: no pairs after refusal adjustment; excluded")
            continue
        values.append(scorer(pairs))
    if not values:
        raise ValueError("no scorable questions")
    return 100.0 * sum(values) / len(values)


def micro_f1(pairs_per_question: Mapping[str, Sequence[Pair]]) -> float:
    """Unweighted cross-question mean of per-question accuracy, on a 0-100
    scale (micro F1 equals accuracy for single-label multiclass)."""
    return _mean_over_questions(pairs_per_question, _question_micro)


def macro_f1(pairs_per_question: Mapping[str, Sequence[Pair]]) -> float:
    """Unweighted cross-question mean of per-question macro F1 (option set =
    options occurring in gold or prediction), on a 0-100 scale."""
    return _mean_over_questions(pairs_per_question, _question_macro)


def cer(results: Sequence[StateResult]) -> float:
    """Share of states whose simulated winner matches the actual winner.
    Undecided simulations count as mismatches."""
    if not results:
        raise ValueError("cer over empty result list")
    matches = 0
    for r in results:
        if r.actual_winner is None:
            raise ValueError(f"{r.state}: actual winner missing")
        if r.winner is not None and r.winner == r.actual_winner:
            matches += 1
    return matches / len(results)


def cvs(results: Sequence[StateResult]) -> float:
    """Quadratic-mean error of the per-state two-party vote share.

    With two parties the share errors are equal in magnitude, so the
    per-state RMSE reduces to the absolute error of one party's relative
    share; those are aggregated across states as a quadratic mean.
    """
    if not results:
        raise ValueError("cvs over empty result list")
    sq = 0.0
    for r in results:
        if r.dem_share is None:
            raise ValueError(f"{r.state}: simulated share undefined")
        if r.actual_dem_share is None:
            raise ValueError(f"{r.state}: actual share undefined")
        sq += (r.dem_share - r.actual_dem_share) ** 2
    return math.sqrt(sq / len(results))


def _validated_distribution(p: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has negative or non-finite entries")
    if abs(arr.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} does not sum to 1 (sum={arr.sum()!r})")
    return arr


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * np.log(p / q)))


def js_divergence(
    p: Sequence[float],
    q: Sequence[float],
    epsilon: float = 1e-12,
    variant: str = "symmetric_kl",
) -> float:
    """Divergence between two answer distributions, in nats.

    Default variant is the symmetrized KL 0.5*KL(P||Q) + 0.5*KL(Q||P);
    "jensen_shannon" uses the mixture form instead. Zero entries are
    epsilon-smoothed and the vectors renormalized before taking logs.
    """
    parr = _validated_distribution(p, "P")
    qarr = _validated_distribution(q, "Q")
    if parr.shape != qarr.shape:
        raise ValueError(f"dimension mismatch: {parr.shape} vs {qarr.shape}")
    parr = np.where(parr == 0, epsilon, parr)
    qarr = np.where(qarr == 0, epsilon, qarr)
    parr = parr / parr.sum()
    qarr = qarr / qarr.sum()
    if variant == "symmetric_kl":
        return 0.5 * _kl(parr, qarr) + 0.5 * _kl(qarr, parr)
    if variant == "jensen_shannon":
        m = 0.5 * (parr + qarr)
        return 0.5 * _kl(parr, m) + 0.5 * _kl(qarr, m)
    raise ValueError(f"unknown variant {variant!r}")


def hhi(shares: Sequence[float]) -> float:
    """Concentration of a share vector: sum of squared normalized shares."""
    arr = np.asarray(shares, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("shares must be non-negative and finite")
    total = arr.sum()
    if total <= 0:
        raise ValueError("shares sum to zero")
    norm = arr / total
    return float(np.sum(norm * norm))


def negative_response_ratio(
    responses_per_question: Mapping[str, Sequence[str | None]],
    questionnaire: Questionnaire,
) -> dict[str, float]:
    """Per question, the share of valid responses that chose the refusal
    option. Questions with no valid response are omitted."""
    ratios: dict[str, float] = {}
    for qid, letters in responses_per_question.items():
        question = questionnaire.get(qid)
        if question is None:
            continue
        valid = [l for l in letters if l is not None]
        if not valid:
            continue
        refusals = sum(1 for l in valid if l == question.refusal_letter)
        ratios[qid] = refusals / len(valid)
    return ratios


def answer_distribution(
    letters: Iterable[str | None], question, include_refusal: bool = False
) -> list[float]:
    """Empirical distribution over a question's (substantive) options."""
    opts = [o.letter for o in question.options if include_refusal or not o.is_refusal]
    counts = {letter: 0 for letter in opts}
    total = 0
    for letter in letters:
        if letter in counts:
            counts[letter] += 1
            total += 1
    if total == 0:
        return [1.0 / len(opts)] * len(opts)
    return [counts[letter] / total for letter in opts]


def evaluate_voter_run(
    records: Sequence[ResponseRecord],
    gold: Sequence[RespondentRecord],
    questionnaire: Questionnaire,
) -> dict:
    """Voter-wise evaluation: cross-question F1, distribution similarity,
    concentration, and refusal behavior."""
    pair_sets = build_pair_sets(records, gold, questionnaire)
    voting_ids = {q.id for q in questionnaire.voting_subset}
    voting_pairs = {qid: pairs for qid, pairs in pair_sets.items() if qid in voting_ids}

    responses: dict[str, list[str | None]] = {}
    for record in records:
        responses.setdefault(record.question_id, []).append(record.letter)

    per_question = []
    js_values = []
    hhi_values = []
    for question in questionnaire:
        pairs = pair_sets.get(question.id, [])
        row: dict = {"question_id": question.id, "topic": question.topic, "pairs": len(pairs)}
        if pairs:
            row["micro_f1"] = round(100 * _question_micro(pairs), 4)
            row["macro_f1"] = round(100 * _question_macro(pairs), 4)
            gold_dist = answer_distribution((g for g, _ in pairs), question)
            pred_dist = answer_distribution((p for _, p in pairs), question)
            row["js"] = round(js_divergence(pred_dist, gold_dist), 6)
            row["hhi"] = round(hhi(pred_dist), 6)
            js_values.append(row["js"])
            hhi_values.append(row["hhi"])
        per_question.append(row)

    ratios = negative_response_ratio(responses, questionnaire)
    report = {
        "mode": "voter",
        "overall": {
            "micro_f1": round(micro_f1(pair_sets), 4),
            "macro_f1": round(macro_f1(pair_sets), 4),
        },
        "per_question": per_question,
        "mean_js": round(sum(js_values) / len(js_values), 6) if js_values else None,
        "mean_hhi": round(sum(hhi_values) / len(hhi_values), 6) if hhi_values else None,
        "negative_response_ratio": {k: round(v, 6) for k, v in sorted(ratios.items())},
        "max_negative_response_ratio": round(max(ratios.values()), 6) if ratios else None,
    }
    if voting_pairs and any(voting_pairs.values()):
        report["voting_subset"] = {
            "micro_f1": round(micro_f1(voting_pairs), 4),
            "macro_f1": round(macro_f1(voting_pairs), 4),
        }
    return report


def load_actual_results(path: str | Path) -> dict[str, dict]:
    """Actual per-state outcomes from CSV columns state,dem,rep[,battleground].

    dem/rep may be raw votes or percentages; they are reduced to relative
    two-party shares.
    """
    out: dict[str, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        needed = {"state", "dem", "rep"}
        if not needed.issubset(reader.fieldnames or ()):
            raise ValueError(f"{path}: expected columns {sorted(needed)}")
        for row in reader:
            dem = float(row["dem"])
            rep = float(row["rep"])
            total = dem + rep
            if total <= 0:
                raise ValueError(f"{path}: state {row['state']} has no two-party votes")
            dem_share = dem / total
            winner = "dem" if dem > rep else "rep" if rep > dem else None
            out[row["state"].strip()] = {
                "dem_share": dem_share,
                "rep_share": 1.0 - dem_share,
                "winner": winner,
                "battleground": str(row.get("battleground", "")).strip() in ("1", "true", "yes"),
            }
    return out


def attach_actual(results: Sequence[StateResult], actual: Mapping[str, dict]) -> list[StateResult]:
    for r in results:
        if r.state not in actual:
            raise ValueError(f"no actual result for state {r.state}")
        info = actual[r.state]
        r.actual_dem_share = info["dem_share"]
        r.actual_rep_share = info["rep_share"]
        r.actual_winner = info["winner"]
    return list(results)


def evaluate_state_run(
    results: Sequence[StateResult], actual: Mapping[str, dict]
) -> dict:
    """State-wise evaluation: CER and CVS overall plus the battleground
    subset when the actual-results file marks one."""
    results = attach_actual(results, actual)
    report = {
        "mode": "state",
        "overall": {
            "cer": round(cer(results), 6),
            "cvs": round(cvs(results), 6),
            "states": len(results),
        },
        "per_state": [r.to_dict() for r in results],
    }
    battleground = [r for r in results if actual[r.state].get("battleground")]
    if battleground:
        report["battleground"] = {
            "cer": round(cer(battleground), 6),
            "cvs": round(cvs(battleground), 6),
            "states": len(battleground),
        }
    return report


def write_evaluation(out_dir: str | Path, report: dict) -> Path:
    """Write report.json plus CSV exports of the per-question/per-state tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=1), encoding="utf-8")
    if "per_question" in report:
        rows = report["per_question"]
        fields = ["question_id", "topic", "pairs", "micro_f1", "macro_f1", "js", "hhi"]
        with open(out / "per_question.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(rows)
    if "per_state" in report:
        rows = report["per_state"]
        fields = [
            "state",
            "dem_share",
            "rep_share",
            "winner",
            "valid_votes",
            "undecided",
            "actual_dem_share",
            "actual_rep_share",
            "actual_winner",
        ]
        with open(out / "per_state.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
            writer.writeheader()
            writer.writerows(rows)
    return out
