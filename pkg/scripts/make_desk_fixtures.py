#!/usr/bin/env python3
"""Generate the desk-scale input set (corpus, instrument, marginals, census,
respondents, actual results, configs) into a target directory.

Usage: python scripts/make_desk_fixtures.py [--out fixtures] [--users 200]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from pollsim import synth


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="fixtures")
    parser.add_argument("--users", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    synth.write_corpus(out / "raw.jsonl", synth.synth_corpus(n_users=args.users, seed=args.seed))
    synth.write_desk_instrument(out / "instrument.json")
    synth.write_marginals_dir(out / "marginals")
    synth.write_census_csv(out / "census.csv")
    synth.write_actual_results_csv(out / "actual.csv")
    synth.write_respondents(
        out / "respondents.jsonl",
        synth.synth_respondents(synth.desk_instrument(), n=100, seed=23),
    )
    synth.write_prompt_config(out / "prompt.json")
    synth.write_backend_config(out / "backend.json", backend_id="sim", mock_seed=5)
    (out / "backends.json").write_text(
        json.dumps(
            [
                {"backend_id": f"anno-{i}", "mock": True, "mock_seed": i, "max_tokens": 64}
                for i in (1, 2, 3)
            ],
            indent=1,
        )
    )
    print(f"fixtures written to {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
