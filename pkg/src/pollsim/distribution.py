"""Per-state joint attribute distributions fitted to category marginals by
iterative proportional fitting.

One fit cycles through the attributes in a fixed order, rescaling the table
so each attribute's marginal matches its target in turn; sweeps stop on
convergence (max relative marginal gap below tol), stabilization (gap no
longer moving), or the iteration cap. Non-convergent fits keep the last
iterate and report their marginal gaps.

The fitter works over any AttributeSchema; the election pipeline uses the
five-attribute pool taxonomy (gender, age, race, ideology, partisanship).
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .corpus import UserRecord
from .taxonomy import ATTRIBUTES, CENSUS_AGE_TO_TAXONOMY, Taxonomy


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attributes and their closed category sets."""

    attributes: tuple[str, ...]
    categories: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        for attr in self.attributes:
            if not self.categories.get(attr):
                raise FitError(f"schema attribute {attr!r} has no categories")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(self.categories[a]) for a in self.attributes)

    def axis(self, attribute: str) -> int:
        return self.attributes.index(attribute)

    def cells(self) -> Iterator[tuple[str, ...]]:
        return product(*(self.categories[a] for a in self.attributes))

    @classmethod
    def from_taxonomy(cls, taxonomy: Taxonomy | None = None) -> "AttributeSchema":
        taxonomy = taxonomy or Taxonomy()
        return cls(
            attributes=ATTRIBUTES,
            categories={a: tuple(taxonomy.categories[a]) for a in ATTRIBUTES},
        )


POOL_SCHEMA = AttributeSchema.from_taxonomy()


@dataclass
class MarginalSet:
    """Target mass per category for every attribute of one state."""

    state: str
    targets: dict[str, np.ndarray]
    schema: AttributeSchema = POOL_SCHEMA

    def __post_init__(self) -> None:
        for attr in self.schema.attributes:
            if attr not in self.targets:
                raise FitError(f"{self.state}: missing marginals for {attr}")
            vec = np.asarray(self.targets[attr], dtype=float)
            expected = len(self.schema.categories[attr])
            if vec.shape != (expected,):
                raise FitError(
                    f"{self.state}/{attr}: expected {expected} categories, got {vec.shape}"
                )
            if not np.all(np.isfinite(vec)):
                raise FitError(f"{self.state}/{attr}: non-finite target mass")
            if np.any(vec < 0):
                raise FitError(f"{self.state}/{attr}: negative target mass")
            self.targets[attr] = vec

    def totals(self) -> dict[str, float]:
        return {attr: float(self.targets[attr].sum()) for attr in self.schema.attributes}

    def max_total_discrepancy(self) -> float:
        totals = list(self.totals().values())
        ref = totals[0]
        if ref <= 0:
            raise FitError(f"{self.state}: zero total mass")
        return max(abs(t - ref) / ref for t in totals)

    def normalized(self, reference: str | None = None) -> "MarginalSet":
        """Rescale every attribute vector to the reference attribute's total
        (default: the first attribute)."""
        reference = reference or self.schema.attributes[0]
        ref_total = float(self.targets[reference].sum())
        if ref_total <= 0:
            raise FitError(f"{self.state}: reference attribute {reference} has zero mass")
        scaled = {}
        for attr in self.schema.attributes:
            total = float(self.targets[attr].sum())
            if total <= 0:
                raise FitError(f"{self.state}: attribute {attr} has zero mass")
            scaled[attr] = self.targets[attr] * (ref_total / total)
        return MarginalSet(state=self.state, targets=scaled, schema=self.schema)


@dataclass
class GapEntry:
    state: str
    attribute: str
    category: str
    gap: float  # relative deviation; inf when target is 0 but estimate is not


@dataclass
class GapReport:
    threshold: float
    entries: list[GapEntry]

    @property
    def total(self) -> int:
        return len(self.entries)

    @property
    def within_threshold(self) -> int:
        return sum(1 for e in self.entries if e.gap < self.threshold)

    @property
    def max_gap(self) -> float:
        return max((e.gap for e in self.entries), default=0.0)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "within_threshold": self.within_threshold,
            "total": self.total,
            "entries": [
                {
                    "attribute": e.attribute,
                    "category": e.category,
                    "gap": e.gap if np.isfinite(e.gap) else "inf",
                }
                for e in self.entries
            ],
        }


@dataclass
class JointTable:
    """Dense nonnegative table over the schema's category cross-product."""

    state: str
    values: np.ndarray
    schema: AttributeSchema = POOL_SCHEMA
    iteration_count: int = 0
    converged: bool = False
    gaps: GapReport | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.schema.shape:
            raise FitError(
                f"{self.state}: table shape {self.values.shape} != {self.schema.shape}"
            )

    def marginal(self, attribute: str) -> np.ndarray:
        axis = self.schema.axis(attribute)
        other = tuple(i for i in range(self.values.ndim) if i != axis)
        return self.values.sum(axis=other)

    def total_mass(self) -> float:
        return float(self.values.sum())

    def probabilities(self) -> np.ndarray:
        total = self.total_mass()
        if total <= 0:
            raise FitError(f"{self.state}: table has no mass")
        return self.values / total

    def to_dict(self) -> dict:
        return {
            "state": self.state,
            "attributes": list(self.schema.attributes),
            "categories": {a: list(self.schema.categories[a]) for a in self.schema.attributes},
            "values": self.values.tolist(),
            "iteration_count": self.iteration_count,
            "converged": self.converged,
            "gaps": self.gaps.to_dict() if self.gaps else None,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "JointTable":
        schema = AttributeSchema(
            attributes=tuple(row["attributes"]),
            categories={a: tuple(c) for a, c in row["categories"].items()},
        )
        table = cls(
            state=row["state"],
            values=np.asarray(row["values"], dtype=float),
            schema=schema,
            iteration_count=int(row.get("iteration_count", 0)),
            converged=bool(row.get("converged", False)),
        )
        gaps = row.get("gaps")
        if gaps:
            table.gaps = GapReport(
                threshold=gaps["threshold"],
                entries=[
                    GapEntry(
                        state=row["state"],
                        attribute=e["attribute"],
                        category=e["category"],
                        gap=float("inf") if e["gap"] == "inf" else float(e["gap"]),
                    )
                    for e in gaps["entries"]
                ],
            )
        return table

    def save(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "JointTable":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def uniform_seed(state: str, schema: AttributeSchema = POOL_SCHEMA) -> JointTable:
    return JointTable(state=state, values=np.ones(schema.shape), schema=schema)


def seed_from_pool(
    pool: Iterable[UserRecord],
    state: str,
    taxonomy: Taxonomy | None = None,
    epsilon: float = 0.1,
) -> JointTable:
    """Empirical joint counts over fully tagged users, plus-epsilon smoothed
    so no cell is structurally empty. Falls back to a uniform seed (with a
    warning) when the pool has no fully tagged user.
    """
    taxonomy = taxonomy or Taxonomy()
    schema = AttributeSchema.from_taxonomy(taxonomy)
    counts = np.zeros(schema.shape)
    tagged = 0
    for user in pool:
        tags = user.tags or {}
        if any(not tags.get(attr) for attr in ATTRIBUTES):
            continue
        try:
            idx = tuple(taxonomy.index(attr, tags[attr]) for attr in ATTRIBUTES)
        except ValueError:
            continue
        counts[idx] += 1
        tagged += 1
    if tagged == 0:
        warnings.warn(f"{state}: no fully tagged users in pool; using uniform seed")
        return uniform_seed(state, schema)
    return JointTable(state=state, values=counts + epsilon, schema=schema)


def _marginal_of(values: np.ndarray, axis: int) -> np.ndarray:
    other = tuple(i for i in range(values.ndim) if i != axis)
    return values.sum(axis=other)


def _max_relative_gap(
    values: np.ndarray, attributes: Sequence[str], targets: Mapping[str, np.ndarray]
) -> float:
    worst = 0.0
    for axis, attr in enumerate(attributes):
        est = _marginal_of(values, axis)
        t = targets[attr]
        positive = t > 0
        if np.any(positive):
            worst = max(worst, float(np.max(np.abs(est[positive] - t[positive]) / t[positive])))
        if np.any(np.logical_and(~positive, est > 0)):
            worst = float("inf")
    return worst


def ipf_fit(
    seed_table: JointTable,
    marginals: MarginalSet,
    max_iter: int = 1000,
    tol: float = 1e-4,
) -> JointTable:
    """Fit the seed table to the target marginals by cyclic rescaling.

    Raises when the seed gives zero support to a category that carries
    target mass, or when any input is negative/non-finite. Convergence is
    reached when the max relative marginal gap drops below tol; a sweep
    that moves the gap by less than tol/10 ends the fit as stabilized.
    """
    if seed_table.schema.attributes != marginals.schema.attributes:
        raise FitError(
            f"{seed_table.state}: seed schema {seed_table.schema.attributes} != "
            f"marginal schema {marginals.schema.attributes}"
        )
    values = np.array(seed_table.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise FitError(f"{seed_table.state}: seed has non-finite cells")
    if np.any(values < 0):
        raise FitError(f"{seed_table.state}: seed has negative cells")
    if marginals.max_total_discrepancy() > 1e-6:
        marginals = marginals.normalized()
    attributes = seed_table.schema.attributes
    targets = {attr: marginals.targets[attr] for attr in attributes}

    unsupported = []
    for axis, attr in enumerate(attributes):
        est = _marginal_of(values, axis)
        for i, cat in enumerate(seed_table.schema.categories[attr]):
            if targets[attr][i] > 0 and est[i] == 0:
                unsupported.append(f"{attr}={cat}")
    if unsupported:
        raise FitError(
            f"{seed_table.state}: seed has zero support for target cells: "
            + ", ".join(unsupported)
        )

    shape = values.shape
    converged = False
    sweeps = 0
    prev_gap: float | None = None
    for _ in range(max_iter):
        sweeps += 1
        for axis, attr in enumerate(attributes):
            est = _marginal_of(values, axis)
            factor = np.divide(targets[attr], est, out=np.zeros_like(est), where=est > 0)
            reshape = [1] * len(shape)
            reshape[axis] = shape[axis]
            values *= factor.reshape(reshape)
        gap = _max_relative_gap(values, attributes, targets)
        if gap < tol:
            converged = True
            break
        if prev_gap is not None and abs(prev_gap - gap) < tol / 10:
            break
        prev_gap = gap

    fitted = JointTable(
        state=seed_table.state,
        values=values,
        schema=seed_table.schema,
        iteration_count=sweeps,
        converged=converged,
    )
    fitted.gaps = gap_report(fitted, marginals)
    return fitted


def gap_report(
    fitted: JointTable, marginals: MarginalSet, threshold: float = 0.05
) -> GapReport:
    """Relative deviation of each estimated marginal from its target."""
    entries: list[GapEntry] = []
    for axis, attr in enumerate(fitted.schema.attributes):
        est = _marginal_of(fitted.values, axis)
        t = marginals.targets[attr]
        if est.shape != t.shape:
            raise FitError(f"{fitted.state}/{attr}: shape mismatch {est.shape} vs {t.shape}")
        for i, cat in enumerate(fitted.schema.categories[attr]):
            if t[i] > 0:
                gap = abs(est[i] - t[i]) / t[i]
            elif est[i] > 0:
                gap = float("inf")
            else:
                gap = 0.0
            entries.append(GapEntry(state=fitted.state, attribute=attr, category=cat, gap=gap))
    return GapReport(threshold=threshold, entries=entries)


def load_marginals_csv(
    paths: Sequence[str | Path], taxonomy: Taxonomy | None = None
) -> dict[str, MarginalSet]:
    """Read (state, attribute, category, mass) rows from one or more CSVs.

    Census-style five-band age categories are folded onto the three-band
    taxonomy; every attribute vector is then rescaled to the state's gender
    total so sources with different units can be combined.
    """
    taxonomy = taxonomy or Taxonomy()
    schema = AttributeSchema.from_taxonomy(taxonomy)
    acc: dict[str, dict[str, np.ndarray]] = {}
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            needed = {"state", "attribute", "category", "mass"}
            if not needed.issubset(reader.fieldnames or ()):
                raise FitError(f"{path}: expected columns {sorted(needed)}")
            for row in reader:
                state = row["state"].strip()
                attr = row["attribute"].strip().lower()
                cat = row["category"].strip()
                if attr not in ATTRIBUTES:
                    raise FitError(f"{path}: unknown attribute {attr!r}")
                if attr == "age" and cat in CENSUS_AGE_TO_TAXONOMY:
                    cat = CENSUS_AGE_TO_TAXONOMY[cat]
                label = taxonomy.normalize(attr, cat)
                if label is None:
                    raise FitError(f"{path}: unknown category {cat!r} for {attr}")
                mass = float(row["mass"])
                vectors = acc.setdefault(
                    state,
                    {a: np.zeros(len(taxonomy.categories[a])) for a in ATTRIBUTES},
                )
                vectors[attr][taxonomy.index(attr, label)] += mass
    out: dict[str, MarginalSet] = {}
    for state in sorted(acc):
        out[state] = MarginalSet(
            state=state, targets=acc[state], schema=schema
        ).normalized(reference="gender")
    return out
