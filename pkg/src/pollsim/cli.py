"""Command-line entry points for every pipeline stage.

Subcommands: ingest, annotate, fit, sample, simulate, evaluate, serve.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import annotate as annotate_mod
from . import corpus, distribution, metrics, sampler
from . import engine as engine_mod
from .backends import BackendConfig, make_backend
from .questionnaire import load_questionnaire, read_respondents
from .taxonomy import Taxonomy


def _cmd_ingest(args: argparse.Namespace) -> int:
    config = corpus.PipelineConfig(
        input_path=args.input,
        output_path=args.output,
        report_path=args.report,
        keep_lang=args.lang,
        min_posts=args.min_posts,
        sample_size=args.sample,
        jaccard_threshold=args.jaccard_threshold,
        seed=args.seed,
        shards=args.shards,
    )
    out_path, report = corpus.run_pipeline(config)
    print(report.render())
    print(f"pool written to {out_path}")
    return 0


def _cmd_annotate(args: argparse.Namespace) -> int:
    users = corpus.read_pool(args.pool)
    backend_rows = json.loads(Path(args.backends).read_text(encoding="utf-8"))
    if isinstance(backend_rows, dict):
        backend_rows = [backend_rows]
    backends = [make_backend(BackendConfig.from_dict(row)) for row in backend_rows]
    if args.vote != "majority":
        print(f"unsupported vote mode {args.vote!r}", file=sys.stderr)
        return 2
    cache = annotate_mod.AnnotationCache(args.cache) if args.cache else None
    annotate_mod.annotate_pool(users, backends, cache=cache)
    annotate_mod.write_annotated_pool(args.out, users)
    dist = annotate_mod.tag_distribution(users)
    print(json.dumps(dist, indent=1))
    print(f"annotated pool written to {args.out}")
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    taxonomy = Taxonomy()
    csv_paths = sorted(Path(args.marginals).glob("*.csv"))
    if not csv_paths:
        print(f"no marginal CSVs in {args.marginals}", file=sys.stderr)
        return 2
    marginal_sets = distribution.load_marginals_csv(csv_paths, taxonomy)
    pool = corpus.read_pool(args.pool) if args.pool else []
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for state, marginals in marginal_sets.items():
        if args.seed_mode == "uniform" or not pool:
            seed_table = distribution.uniform_seed(state)
        else:
            seed_table = distribution.seed_from_pool(pool, state, taxonomy, args.epsilon)
        fitted = distribution.ipf_fit(seed_table, marginals, args.max_iter, args.tol)
        fitted.save(out / f"{state}.json")
        gaps = fitted.gaps
        print(
            f"{state}: sweeps={fitted.iteration_count} converged={fitted.converged} "
            f"marginals within {gaps.threshold:.0%}: {gaps.within_threshold}/{gaps.total}"
        )
    return 0


def _cmd_sample(args: argparse.Namespace) -> int:
    pool = corpus.read_pool(args.pool)
    populations: dict[str, int] = {}
    with open(args.census, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"state", "population"}.issubset(reader.fieldnames or ()):
            print(f"{args.census}: expected columns state,population", file=sys.stderr)
            return 2
        for row in reader:
            populations[row["state"].strip()] = int(float(row["population"]))
    profiles_by_state: dict[str, list[sampler.VoterProfile]] = {}
    for path in sorted(Path(args.joint).glob("*.json")):
        joint = distribution.JointTable.load(path)
        if joint.state not in populations:
            print(f"skipping {joint.state}: no census population", file=sys.stderr)
            continue
        plan = sampler.build_plan(joint, populations[joint.state], args.fraction, args.seed)
        profiles_by_state[joint.state] = sampler.draw(plan, pool)
        print(f"{joint.state}: drew {len(profiles_by_state[joint.state])} personas")
    sampler.write_samples(args.out, profiles_by_state)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    questionnaire = load_questionnaire(args.questionnaire)
    cfg = engine_mod.PromptConfig.from_file(args.prompt_config)
    backend = make_backend(BackendConfig.from_file(args.backend))
    if args.mode == "voter":
        respondents = read_respondents(args.sample)
        subset = engine_mod.select_respondents(respondents, args.subset, args.seed)
        records, manifest = engine_mod.run_voter_wise(
            subset, questionnaire, cfg, backend, args.seed, args.workers
        )
        run_dir = engine_mod.write_run(
            args.out,
            manifest,
            records,
            questionnaire_path=args.questionnaire,
            respondents=subset,
        )
    else:
        samples = sampler.read_samples(args.sample)
        records_by_state, results, manifest = engine_mod.run_state_wise(
            samples, questionnaire, cfg, backend, args.seed, args.workers
        )
        records = [r for state in sorted(records_by_state) for r in records_by_state[state]]
        run_dir = engine_mod.write_run(
            args.out,
            manifest,
            records,
            state_results=results,
            questionnaire_path=args.questionnaire,
            samples=samples,
        )
    counts = manifest.to_dict()["counts"]
    print(f"run {manifest.run_id}: {counts}")
    if not manifest.reconciled():
        print("warning: manifest counts do not reconcile", file=sys.stderr)
        return 1
    print(f"run written to {run_dir}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    manifest = engine_mod.RunManifest.from_dict(
        json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    )
    questionnaire = load_questionnaire(run_dir / "questionnaire.json")
    records = engine_mod.read_records(run_dir / "records.jsonl")
    if manifest.mode == "voter":
        if not args.gold:
            print("voter-wise evaluation needs --gold", file=sys.stderr)
            return 2
        gold = read_respondents(args.gold)
        report = metrics.evaluate_voter_run(records, gold, questionnaire)
    else:
        if not args.actual:
            print("state-wise evaluation needs --actual", file=sys.stderr)
            return 2
        results = [
            engine_mod.StateResult.from_dict(row)
            for row in json.loads((run_dir / "state_results.json").read_text(encoding="utf-8"))
        ]
        actual = metrics.load_actual_results(args.actual)
        report = metrics.evaluate_state_run(results, actual)
    out = metrics.write_evaluation(args.out, report)
    print(json.dumps(report.get("overall", {}), indent=1))
    print(f"evaluation written to {out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    backend_config = BackendConfig.from_file(args.backend) if args.backend else None
    app = create_app(args.runs, backend_config, sample_cap=args.sample_cap)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pollsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="clean a raw post corpus into a voter pool")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--min-posts", type=int, default=30)
    p.add_argument("--sample", type=int, default=30)
    p.add_argument("--jaccard-threshold", type=float, default=0.28)
    p.add_argument("--lang", default="en")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.add_argument("--shards", type=int, default=1)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("annotate", help="tag pool users via chat backends + majority vote")
    p.add_argument("--pool", required=True)
    p.add_argument("--backends", required=True, help="JSON list of backend configs")
    p.add_argument("--vote", default="majority")
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("fit", help="fit per-state joint distributions to marginals")
    p.add_argument("--marginals", required=True, help="directory of (state,attribute,category,mass) CSVs")
    p.add_argument("--pool", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--seed-mode", choices=("pool", "uniform"), default="pool")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sample", help="draw per-state persona samples from the pool")
    p.add_argument("--joint", required=True, help="directory of fitted joint tables")
    p.add_argument("--pool", required=True)
    p.add_argument("--census", required=True, help="CSV with columns state,population")
    p.add_argument("--fraction", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("simulate", help="run voter-wise or state-wise interviews")
    p.add_argument("--mode", choices=("voter", "state"), required=True)
    p.add_argument("--sample", required=True, help="sample dir (state) or respondent JSONL (voter)")
    p.add_argument("--questionnaire", required=True)
    p.add_argument("--prompt-config", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--subset", type=int, default=1000, help="voter-wise respondent subset size")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="score a finished run")
    p.add_argument("--run", required=True)
    p.add_argument("--gold", default=None, help="respondent JSONL with gold answers")
    p.add_argument("--actual", default=None, help="CSV with columns state,dem,rep[,battleground]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("serve", help="serve runs to the exploration UI")
    p.add_argument("--runs", required=True)
    p.add_argument("--backend", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--sample-cap", type=int, default=5000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
