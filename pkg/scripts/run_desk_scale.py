#!/usr/bin/env python3
"""End-to-end desk-scale experiment on synthetic data: ingest -> annotate ->
fit -> sample -> simulate (context-rich protocol, mock backend) -> evaluate.

Leaves a run directory under <out>/runs ready for `pollsim serve`.

Usage: python scripts/run_desk_scale.py [--out desk] [--seed 5]
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from pollsim.cli import main as cli

SCRIPT_DIR = Path(__file__).resolve().parent


def run(argv: list[str]) -> None:
    print(f"$ pollsim {' '.join(argv)}")
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="desk")
    parser.add_argument("--seed", type=int, default=5)
    parser.add_argument("--users", type=int, default=200)
    args = parser.parse_args()

    out = Path(args.out)
    fixtures = out / "fixtures"
    started = time.monotonic()

    import subprocess

    subprocess.run(
        [
            sys.executable,
            str(SCRIPT_DIR / "make_desk_fixtures.py"),
            "--out",
            str(fixtures),
            "--users",
            str(args.users),
        ],
        check=True,
    )

    run(
        [
            "ingest",
            "--input", str(fixtures / "raw.jsonl"),
            "--output", str(out / "pool.jsonl"),
            "--report", str(out / "cleaning_report.txt"),
            "--seed", str(args.seed),
        ]
    )
    run(
        [
            "annotate",
            "--pool", str(out / "pool.jsonl"),
            "--backends", str(fixtures / "backends.json"),
            "--vote", "majority",
            "--out", str(out / "tagged.jsonl"),
        ]
    )
    run(
        [
            "fit",
            "--marginals", str(fixtures / "marginals"),
            "--pool", str(out / "tagged.jsonl"),
            "--out", str(out / "joint"),
            "--tol", "1e-6",
        ]
    )
    run(
        [
            "sample",
            "--joint", str(out / "joint"),
            "--pool", str(out / "tagged.jsonl"),
            "--census", str(fixtures / "census.csv"),
            "--fraction", "0.0001",
            "--seed", str(args.seed),
            "--out", str(out / "samples"),
        ]
    )
    run(
        [
            "simulate",
            "--mode", "state",
            "--sample", str(out / "samples"),
            "--questionnaire", str(fixtures / "instrument.json"),
            "--prompt-config", str(fixtures / "prompt.json"),
            "--backend", str(fixtures / "backend.json"),
            "--seed", str(args.seed),
            "--out", str(out / "runs"),
        ]
    )
    run_dir = next(p for p in (out / "runs").iterdir() if p.is_dir())
    run(
        [
            "evaluate",
            "--run", str(run_dir),
            "--actual", str(fixtures / "actual.csv"),
            "--out", str(out / "eval"),
        ]
    )

    report = json.loads((out / "eval" / "report.json").read_text())
    print()
    print(f"finished in {time.monotonic() - started:.1f}s")
    print(f"overall: {report['overall']}")
    for row in report["per_state"]:
        print(
            f"  {row['state']:<12} dem {row['dem_share']:.3f} vs actual "
            f"{row['actual_dem_share']:.3f}  winner {row['winner']} "
            f"(actual {row['actual_winner']})"
        )
    print()
    print(f"inspect interactively:  pollsim serve --runs {out / 'runs'} --port 8000")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
