"""Draw per-state voter personas from the tagged pool so the sample matches
a fitted joint distribution at a configurable population fraction.

Cell quotas come from largest-remainder rounding of the joint probabilities.
When a cell runs out of pool users, the constraint ladder drops attributes
one at a time (partisanship, ideology, age, race, gender) until enough
donors exist; the emitted persona keeps the target cell's tags and the
relaxation is recorded in its provenance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Post, UserRecord, format_time, parse_time
from .distribution import JointTable
from .jsonl import read_jsonl, write_jsonl
from .rng import make_rng
from .taxonomy import ATTRIBUTES, Taxonomy

RELAXATION_ORDER = ("partisanship", "ideology", "age", "race", "gender")


class SamplingError(RuntimeError):
    pass


@dataclass
class SamplePlan:
    state: str
    total_sample_size: int
    fraction: float
    seed: int
    cells: list[tuple[str, ...]]
    quotas: list[int]

    def __post_init__(self) -> None:
        if sum(self.quotas) != self.total_sample_size:
            raise SamplingError(
                f"{self.state}: quotas sum {sum(self.quotas)} != total {self.total_sample_size}"
            )
        if any(q < 0 for q in self.quotas):
            raise SamplingError(f"{self.state}: negative quota")

    def nonzero(self) -> Iterable[tuple[tuple[str, ...], int]]:
        for cell, quota in zip(self.cells, self.quotas):
            if quota > 0:
                yield cell, quota


@dataclass
class VoterProfile:
    user_id: str
    state: str
    tags: dict[str, str]
    post_history: list[Post]
    provenance: dict = field(default_factory=lambda: {"kind": "exact-cell"})

    def __post_init__(self) -> None:
        missing = [a for a in ATTRIBUTES if not self.tags.get(a)]
        if missing:
            raise SamplingError(f"profile {self.user_id}: incomplete tags {missing}")
        self.post_history.sort(key=lambda p: (p.pub_time, p.tweet_id))

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "state": self.state,
            "tags": self.tags,
            "post_history": [
                {"tweet_id": p.tweet_id, "text": p.text, "pub_time": format_time(p.pub_time)}
                for p in self.post_history
            ],
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "VoterProfile":
        return cls(
            user_id=row["user_id"],
            state=row["state"],
            tags=dict(row["tags"]),
            post_history=[
                Post(tweet_id=p["tweet_id"], text=p["text"], pub_time=parse_time(p["pub_time"]))
                for p in row["post_history"]
            ],
            provenance=dict(row.get("provenance", {"kind": "exact-cell"})),
        )


def largest_remainder(weights: Sequence[float], total: int) -> list[int]:
    """Integer apportionment of `total` by weight; ties go to the lower index."""
    weight_sum = float(sum(weights))
    if weight_sum <= 0:
        raise SamplingError("cannot apportion over all-zero weights")
    raw = [total * w / weight_sum for w in weights]
    base = [math.floor(r) for r in raw]
    short = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def build_plan(
    joint: JointTable, state_population: int, fraction: float, seed: int
) -> SamplePlan:
    """Quota plan for one state: round(population x fraction) personas,
    apportioned over cells by largest remainder."""
    if not (0 < fraction <= 1):
        raise SamplingError(f"fraction must be in (0,1], got {fraction}")
    if state_population <= 0:
        raise SamplingError(f"population must be positive, got {state_population}")
    if joint.schema.attributes != ATTRIBUTES:
        raise SamplingError(
            f"{joint.state}: persona sampling needs the pool taxonomy, "
            f"got attributes {joint.schema.attributes}"
        )
    if joint.total_mass() <= 0:
        raise SamplingError(f"{joint.state}: joint table has no mass")
    total = max(1, math.floor(state_population * fraction + 0.5))
    cells = list(joint.schema.cells())
    weights = joint.values.reshape(-1)
    quotas = largest_remainder(weights, total)
    return SamplePlan(
        state=joint.state,
        total_sample_size=total,
        fraction=fraction,
        seed=seed,
        cells=cells,
        quotas=quotas,
    )


def _matches(tags: dict[str, str | None] | None, cell: tuple[str, ...], kept: Sequence[str]) -> bool:
    if tags is None:
        return not kept
    for attr in kept:
        if tags.get(attr) != cell[ATTRIBUTES.index(attr)]:
            return False
    return True


def draw(
    plan: SamplePlan, pool: Sequence[UserRecord], taxonomy: Taxonomy | None = None
) -> list[VoterProfile]:
    """Fill the plan's quotas without replacement within the state.

    Draws are uniform within the candidate set and seeded from
    (plan.seed, state), so they do not depend on pool order. A relaxed
    draw happens only once its exact cell is exhausted.
    """
    taxonomy = taxonomy or Taxonomy()
    rng = make_rng(plan.seed, "draw", plan.state)
    by_id = {u.user_id: u for u in pool}
    ordered_ids = sorted(by_id)
    used: set[str] = set()
    profiles: list[VoterProfile] = []
    shortfall: dict[tuple[str, ...], int] = {}

    for cell, quota in plan.nonzero():
        tags = dict(zip(ATTRIBUTES, cell))
        need = quota
        for level in range(len(RELAXATION_ORDER) + 1):
            if need == 0:
                break
            dropped = RELAXATION_ORDER[:level]
            kept = [a for a in ATTRIBUTES if a not in dropped]
            candidates = [
                uid
                for uid in ordered_ids
                if uid not in used and _matches(by_id[uid].tags, cell, kept)
            ]
            take = min(need, len(candidates))
            if take == 0:
                continue
            chosen = rng.sample(candidates, take) if take < len(candidates) else candidates
            for uid in sorted(chosen):
                user = by_id[uid]
                used.add(uid)
                provenance: dict = {"kind": "exact-cell"} if level == 0 else {
                    "kind": "relaxed",
                    "dropped": list(dropped),
                }
                profiles.append(
                    VoterProfile(
                        user_id=uid,
                        state=plan.state,
                        tags=dict(tags),
                        post_history=list(user.posts),
                        provenance=provenance,
                    )
                )
            need -= take
        if need > 0:
            shortfall[cell] = need

    if shortfall:
        detail = "; ".join(f"{'/'.join(cell)}: short {n}" for cell, n in shortfall.items())
        raise SamplingError(f"{plan.state}: pool exhausted after full relaxation ({detail})")
    return profiles


def write_samples(out_dir: str | Path, profiles_by_state: dict[str, list[VoterProfile]]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for state, profiles in sorted(profiles_by_state.items()):
        write_jsonl(out / f"{state}.jsonl", (p.to_dict() for p in profiles))


def read_samples(path_or_dir: str | Path) -> dict[str, list[VoterProfile]]:
    path = Path(path_or_dir)
    files = sorted(path.glob("*.jsonl")) if path.is_dir() else [path]
    out: dict[str, list[VoterProfile]] = {}
    for file in files:
        for row in read_jsonl(file):
            profile = VoterProfile.from_dict(row)
            out.setdefault(profile.state, []).append(profile)
    return out
