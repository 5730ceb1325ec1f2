"""Demographic label taxonomy shared by annotation, fitting, and sampling.

Attribute order is canonical everywhere (tag cells, fitting sweeps, sample
plans): gender, age, race, ideology, partisanship.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterator

ATTRIBUTES = ("gender", "age", "race", "ideology", "partisanship")

DEFAULT_CATEGORIES: dict[str, tuple[str, ...]] = {
    "gender": ("Male", "Female"),
    "age": ("Youth", "Middle-aged", "Elderly"),
    "race": ("White", "Black", "Asian", "Hispanic"),
    "ideology": ("Liberal", "Moderate", "Conservative"),
    "partisanship": ("Democrat", "Republican", "Independent", "Others"),
}

# Census marginals use five age bands; the pool taxonomy uses three. This
# surjection is applied to age marginals before fitting.
CENSUS_AGE_TO_TAXONOMY: dict[str, str] = {
    "18-24": "Youth",
    "25-34": "Youth",
    "35-44": "Middle-aged",
    "45-64": "Middle-aged",
    "65+": "Elderly",
}


@dataclass(frozen=True)
class Taxonomy:
    """Closed, case-normalized category sets for the five pool attributes."""

    categories: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_CATEGORIES)
    )

    def __post_init__(self) -> None:
        for attr in ATTRIBUTES:
            cats = self.categories.get(attr)
            if not cats:
                raise ValueError(f"taxonomy attribute {attr!r} is missing or empty")

    @property
    def attributes(self) -> tuple[str, ...]:
        return ATTRIBUTES

    def normalize(self, attribute: str, label: object) -> str | None:
        """Canonical label for `label`, or None if it is not in the category set."""
        if label is None:
            return None
        wanted = str(label).strip().casefold()
        for cat in self.categories[attribute]:
            if cat.casefold() == wanted:
                return cat
        return None

    def index(self, attribute: str, label: str) -> int:
        return self.categories[attribute].index(label)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(self.categories[a]) for a in ATTRIBUTES)

    def cells(self) -> Iterator[tuple[str, ...]]:
        """All tag cells (label tuples) in canonical cross-product order."""
        return product(*(self.categories[a] for a in ATTRIBUTES))

    def cell_of(self, tags: dict[str, str]) -> tuple[str, ...]:
        return tuple(tags[a] for a in ATTRIBUTES)
