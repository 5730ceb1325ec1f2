"""Deterministic seed derivation.

Every stochastic step in the pipeline draws from a generator seeded by
(global seed, stable labels) so results do not depend on iteration or
scheduling order.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, *parts: object) -> int:
    """Map (seed, labels...) to a stable 64-bit integer."""
    h = hashlib.sha256(str(seed).encode("utf-8"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def make_rng(seed: int, *parts: object) -> random.Random:
    return random.Random(derive_seed(seed, *parts))
