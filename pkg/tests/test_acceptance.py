"""Acceptance suite: one test per primary criterion, each printed with its
runtime. Tolerances are pinned here and must not be loosened.
"""

from __future__ import annotations

import json
import time
import numpy as np
import pytest

from pollsim import synth
from pollsim.backends import BackendConfig, make_backend
from pollsim.corpus import PipelineConfig, repeatability_score, run_pipeline
from pollsim.distribution import (
    AttributeSchema,
    MarginalSet,
    ipf_fit,
    uniform_seed,
)
from pollsim.engine import PromptConfig, render_prompt
from pollsim.metrics import cer, cvs, hhi, js_divergence, macro_f1, refusal_adjust
from pollsim.sampler import build_plan
from pollsim.taxonomy import ATTRIBUTES, Taxonomy
from tests.conftest import make_voter
from tests.test_corpus import _user
from tests.test_metrics import SIX_STATE_FIXTURE, _mock_results, _state_results


class _Timer:
    def __init__(self, name: str, budget_s: float):
        self.name = name
        self.budget_s = budget_s

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.monotonic() - self.start
        if exc_type is None:
            status = "PASS" if elapsed < self.budget_s else "FAIL (over budget)"
            print(f"ACCEPTANCE {status}: {self.name} [{elapsed:.2f}s < {self.budget_s:.0f}s]")
            assert elapsed < self.budget_s, f"{self.name} exceeded {self.budget_s}s"
        else:
            print(f"ACCEPTANCE FAIL: {self.name}")


def test_cvs_six_state_fixture():
    with _Timer("CVS six-state fixture = 0.0439 +/- 0.0005", 1.0):
        value = cvs(_state_results(SIX_STATE_FIXTURE))
        assert value == pytest.approx(0.0439, abs=0.0005)


def test_cer_fixtures():
    with _Timer("CER 47/51 -> 0.922 and 12/15 -> 0.800", 1.0):
        overall = cer(_mock_results(51, 47))
        assert overall == pytest.approx(0.9215686274, abs=1e-9)
        assert round(overall, 3) == 0.922
        assert cer(_mock_results(15, 12)) == pytest.approx(0.800, abs=1e-12)


def test_ipf_oracle():
    with _Timer("IPF randomized 3-attribute oracle + 2x2 odds ratios", 10.0):
        rng = np.random.default_rng(2024)
        for trial in range(22):
            attrs = tuple(f"a{i}" for i in range(3))
            cats = {
                a: tuple(f"c{j}" for j in range(rng.integers(2, 6))) for a in attrs
            }
            schema = AttributeSchema(attributes=attrs, categories=cats)
            truth = rng.uniform(0.3, 5.0, size=schema.shape)
            targets = {
                a: truth.sum(axis=tuple(i for i in range(3) if i != axis))
                for axis, a in enumerate(attrs)
            }
            marginals = MarginalSet(state=f"t{trial}", targets=targets, schema=schema)
            fitted = ipf_fit(
                uniform_seed(f"t{trial}", schema), marginals, max_iter=500, tol=1e-8
            )
            assert fitted.converged and fitted.iteration_count <= 500
            for axis, a in enumerate(attrs):
                est = fitted.values.sum(axis=tuple(i for i in range(3) if i != axis))
                assert np.max(np.abs(est - targets[a]) / targets[a]) < 1e-6

        two = AttributeSchema(
            attributes=("r", "c"), categories={"r": ("r1", "r2"), "c": ("c1", "c2")}
        )
        for trial in range(20):
            from pollsim.distribution import JointTable

            seed_vals = rng.uniform(0.2, 4.0, size=(2, 2))
            rows = rng.uniform(1.0, 6.0, size=2)
            cols = rng.uniform(1.0, 6.0, size=2)
            cols *= rows.sum() / cols.sum()
            fitted = ipf_fit(
                JointTable(state="x", values=seed_vals.copy(), schema=two),
                MarginalSet(state="x", targets={"r": rows, "c": cols}, schema=two),
                max_iter=2000,
                tol=1e-12,
            )
            before = seed_vals[0, 0] * seed_vals[1, 1] / (seed_vals[0, 1] * seed_vals[1, 0])
            after = (
                fitted.values[0, 0]
                * fitted.values[1, 1]
                / (fitted.values[0, 1] * fitted.values[1, 0])
            )
            assert after == pytest.approx(before, rel=1e-9)


def _brute_force_macro(pairs) -> float:
    """Independent oracle: enumerate the confusion matrix option by option."""
    options = sorted({g for g, _ in pairs} | {p for _, p in pairs if p is not None})
    f1s = []
    for opt in options:
        tp = fp = fn = 0
        for g, p in pairs:
            if g == opt and p == opt:
                tp += 1
            elif g != opt and p == opt:
                fp += 1
            elif g == opt and p != opt:
                fn += 1
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(
            0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        )
    return 100.0 * sum(f1s) / len(f1s)


def test_metric_oracles():
    with _Timer("metric oracles: macro-F1 brute force, HHI, divergence, refusals", 5.0):
        rng = np.random.default_rng(99)
        letters = ["A", "B", "C", "D", "E"]
        for _ in range(100):
            n = int(rng.integers(1, 21))
            n_opts = int(rng.integers(2, 6))
            pairs = [
                (letters[rng.integers(n_opts)], letters[rng.integers(n_opts)])
                for _ in range(n)
            ]
            assert macro_f1({"q": pairs}) == pytest.approx(
                _brute_force_macro(pairs), abs=1e-9
            )

        for n in (2, 3, 5, 10, 49, 200):
            assert hhi([1.0 / n] * n) == pytest.approx(1.0 / n, abs=1e-12)

        for _ in range(30):
            p = rng.dirichlet(np.ones(5))
            q = rng.dirichlet(np.ones(5))
            assert js_divergence(p, p) == 0.0
            assert js_divergence(p, q) == pytest.approx(js_divergence(q, p), abs=1e-12)

        # refusal adjustment on hand fixtures: gold-refusal rows leave the pool
        pairs = [("A", "A"), ("A", "A"), ("A", "B"), ("D", "A"), ("D", "D")]
        adjusted = refusal_adjust(pairs, refusal_letter="D")
        assert adjusted == [("A", "A"), ("A", "A"), ("A", "B")]
        from pollsim.metrics import micro_f1

        assert micro_f1({"q": adjusted}) == pytest.approx(100 * 2 / 3)


def test_corpus_pipeline_determinism(tmp_path):
    with _Timer("corpus pipeline: known survivors, byte-identical, shard-proof", 5.0):
        rows, survivors = synth.known_outcome_corpus()
        from pollsim.jsonl import write_jsonl

        write_jsonl(tmp_path / "raw.jsonl", rows)
        outputs = []
        for i, shards in enumerate((1, 1, 3, 7)):
            out = tmp_path / f"pool{i}.jsonl"
            run_pipeline(
                PipelineConfig(
                    input_path=tmp_path / "raw.jsonl",
                    output_path=out,
                    seed=5,
                    shards=shards,
                )
            )
            outputs.append(out.read_bytes())
        assert len(set(outputs)) == 1
        ids = [json.loads(l)["user_id"] for l in outputs[0].decode().splitlines()]
        assert ids == sorted(survivors)

        user = _user("u", ["identical words here"] * 5)
        assert repeatability_score(user, n_sample=5, seed=1) == pytest.approx(0.8, abs=1e-12)


def test_sampler_quota_fidelity():
    with _Timer("sampler quotas track marginals within the cell-count bound", 5.0):
        from pollsim.distribution import JointTable

        taxonomy = Taxonomy()
        rng = np.random.default_rng(31)
        for trial in range(12):
            values = rng.uniform(0.05, 3.0, size=taxonomy.shape)
            joint = JointTable(state=f"s{trial}", values=values)
            plan = build_plan(joint, int(rng.integers(50_000, 2_000_000)), 1e-3, seed=trial)
            n = plan.total_sample_size
            quota_arr = np.asarray(plan.quotas, float).reshape(taxonomy.shape)
            probs = values / values.sum()
            n_cells = quota_arr.size
            for axis in range(len(ATTRIBUTES)):
                other = tuple(i for i in range(len(ATTRIBUTES)) if i != axis)
                deviation = np.abs(quota_arr.sum(axis=other) - n * probs.sum(axis=other))
                assert np.all(deviation < n_cells)
            again = build_plan(joint, n * 1000, 1e-3, seed=trial)
            assert again.quotas == plan.quotas  # deterministic under seed


@pytest.fixture(scope="module")
def desk_run(tmp_path_factory):
    """Full chain twice (same seed) for the end-to-end criterion."""
    from pollsim import annotate as annotate_mod
    from pollsim import corpus as corpus_mod
    from pollsim import distribution, metrics, sampler
    from pollsim import engine as engine_mod
    from pollsim.questionnaire import load_questionnaire

    root = tmp_path_factory.mktemp("desk")
    synth.write_corpus(root / "raw.jsonl", synth.synth_corpus(n_users=200, seed=7))
    instrument_path = synth.write_desk_instrument(root / "instrument.json")
    marginals_dir = synth.write_marginals_dir(root / "marginals", seed=11)
    actual_csv = synth.write_actual_results_csv(root / "actual.csv")

    started = time.monotonic()
    artifacts = []
    for attempt in ("one", "two"):
        out_root = root / attempt
        pool_path, _ = corpus_mod.run_pipeline(
            corpus_mod.PipelineConfig(
                input_path=root / "raw.jsonl",
                output_path=out_root / "pool.jsonl",
                seed=5,
            )
        )
        users = corpus_mod.read_pool(pool_path)
        backends = [
            make_backend(BackendConfig(backend_id=f"anno-{i}", mock=True, mock_seed=i))
            for i in (1, 2, 3)
        ]
        annotate_mod.annotate_pool(users, backends)

        marginal_sets = distribution.load_marginals_csv(sorted(marginals_dir.glob("*.csv")))
        samples = {}
        for state, marginals in marginal_sets.items():
            seed_table = distribution.seed_from_pool(users, state)
            fitted = distribution.ipf_fit(seed_table, marginals, max_iter=1000, tol=1e-6)
            plan = build_plan(fitted, synth.DESK_POPULATIONS[state], 1e-4, seed=5)
            samples[state] = sampler.draw(plan, users)

        questionnaire = load_questionnaire(instrument_path)
        cfg = PromptConfig(
            baseline=3,
            temporal_cutoff="2020-11-01T00:00:00Z",
            candidate_context="Two tickets compete for the presidency.",
        )
        backend = make_backend(BackendConfig(backend_id="sim", mock=True, mock_seed=5))
        records_by_state, results, manifest = engine_mod.run_state_wise(
            samples, questionnaire, cfg, backend, seed=5
        )
        flat = [r for state in sorted(records_by_state) for r in records_by_state[state]]
        run_dir = engine_mod.write_run(
            out_root / "runs",
            manifest,
            flat,
            state_results=results,
            questionnaire_path=instrument_path,
            samples=samples,
        )
        report = metrics.evaluate_state_run(results, metrics.load_actual_results(actual_csv))
        metrics.write_evaluation(out_root / "eval", report)
        artifacts.append(
            {
                "run_dir": run_dir,
                "results": results,
                "manifest": manifest,
                "report": report,
                "out_root": out_root,
            }
        )
    elapsed = time.monotonic() - started
    return artifacts, elapsed


def test_end_to_end_desk_scale(desk_run):
    artifacts, elapsed = desk_run
    with _Timer("end-to-end desk run: 3 states x 50 voters x 5 questions", 60.0):
        first, second = artifacts
        # both passes inside the budget (each ran the whole chain)
        assert elapsed < 60.0

        manifest = first["manifest"]
        assert manifest.reconciled()
        assert manifest.issued == 3 * 50 * 5

        for result in first["results"]:
            if result.dem_share is not None:
                assert result.dem_share + result.rep_share == pytest.approx(1.0, abs=1e-9)

        report = first["report"]
        assert {"cer", "cvs", "states"} <= set(report["overall"])
        assert len(report["per_state"]) == 3
        assert (first["out_root"] / "eval" / "report.json").exists()

        for name in ("manifest.json", "records.jsonl", "state_results.json", "individuals.jsonl"):
            a = (first["run_dir"] / name).read_bytes()
            b = (second["run_dir"] / name).read_bytes()
            assert a == b, f"{name} differs between same-seed runs"
        a = (first["out_root"] / "eval" / "report.json").read_bytes()
        b = (second["out_root"] / "eval" / "report.json").read_bytes()
        assert a == b


def test_prompt_ablations(instrument):
    with _Timer("prompt ablations omit exactly their section", 5.0):
        voter = make_voter()
        question = instrument.get("ECON02")
        base_cfg = dict(
            baseline=3,
            temporal_cutoff="2020-11-01T00:00:00Z",
            candidate_context="Two tickets.",
        )
        full = render_prompt(voter, question, PromptConfig(**base_cfg))

        no_time = render_prompt(
            voter, question, PromptConfig(**base_cfg, include_time_info=False)
        )
        assert "It's 2020" not in no_time
        assert full.endswith(no_time)

        no_ideology = render_prompt(
            voter, question, PromptConfig(**base_cfg, include_ideology=False)
        )
        assert "Ideology" not in no_ideology
        assert no_ideology == full.replace("Ideology: Liberal\n", "")

        no_party = render_prompt(
            voter, question, PromptConfig(**base_cfg, include_party=False)
        )
        assert "Partisanship" not in no_party
        assert no_party == full.replace("\nPartisanship: Democrat", "")
