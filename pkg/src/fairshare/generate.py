"""Seeded random instances and the two hand-built fixtures."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

from fairshare.model import (
    Additive,
    Coverage,
    Instance,
    SplcValuation,
    TruncatedAdditive,
)

FAMILIES = ("splc", "additive", "truncated_additive", "coverage")

# entitlement profiles used for asymmetric runs
ASYMMETRIC = {
    2: (Fraction(1, 4), Fraction(3, 4)),
    3: (Fraction(1, 6), Fraction(1, 3), Fraction(1, 2)),
}


def _copies(rng: random.Random, t: int, max_copies: int, max_total: int) -> tuple[int, ...]:
    if t > max_total:
        raise ValueError(f"{t} types cannot fit in {max_total} copies")
    while True:
        copies = tuple(rng.randint(1, max_copies) for _ in range(t))
        if sum(copies) <= max_total:
            return copies


def random_valuation(
    family: str,
    rng: random.Random,
    m: int = 4,
    max_value: int = 10,
    copies: Sequence[int] | None = None,
):
    if family == "splc":
        if copies is None:
            raise ValueError("SPLC valuations need copy counts")
        rows = tuple(
            tuple(sorted((rng.randint(0, max_value) for _ in range(k)), reverse=True))
            for k in copies
        )
        return SplcValuation(tuple(copies), rows)
    if family == "additive":
        return Additive(tuple(rng.randint(0, max_value) for _ in range(m)))
    if family == "truncated_additive":
        weights = tuple(rng.randint(0, max_value) for _ in range(m))
        return TruncatedAdditive(weights, rng.randint(1, max(1, sum(weights))))
    if family == "coverage":
        universe = rng.randint(m, 2 * m)
        sets = tuple(
            frozenset(e for e in range(universe) if rng.random() < 0.35) for _ in range(m)
        )
        weights = tuple(rng.randint(1, max_value) for _ in range(universe))
        return Coverage(sets, weights)
    raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


def random_instance(
    family: str,
    n: int,
    rng: random.Random,
    *,
    m: int = 4,
    t: int = 2,
    max_copies: int = 2,
    max_total: int = 8,
    max_value: int = 10,
    entitlements: Sequence | None = None,
) -> Instance:
    """One instance; for SPLC, ``t`` types with ``1..max_copies`` copies each."""
    copies = _copies(rng, t, max_copies, max_total) if family == "splc" else None
    vals = [random_valuation(family, rng, m, max_value, copies) for _ in range(n)]
    if entitlements is None:
        return Instance.symmetric(vals)
    return Instance(n, tuple(Fraction(b) for b in entitlements), tuple(vals))


def generate(family: str, n: int, seed: int, count: int, **size) -> list[Instance]:
    """``count`` instances, reproducible from ``seed``."""
    rng = random.Random(seed)
    return [random_instance(family, n, rng, **size) for _ in range(count)]


# --- fixtures -------------------------------------------------------------

def splc_mms_high(n: int) -> Instance:
    """n copies of one good; each agent values its first copy at 1 and later ones at 0."""
    if n < 1:
        raise ValueError("n must be positive")
    row = (Fraction(1),) + (Fraction(0),) * (n - 1)
    return Instance.symmetric([SplcValuation((n,), (row,)) for _ in range(n)])


def greedy_counter(delta=Fraction(1, 32)) -> Instance:
    """4 agents, 8 types with 4 copies each; every agent's MMS is 1.

    A greedy that stops agents at 1/2 can leave agent 0 short (see
    :data:`GREEDY_COUNTER_TIES`).
    """
    d = Fraction(delta)
    if not 0 < d < Fraction(1, 16):
        raise ValueError("delta must lie in (0, 1/16)")
    half = Fraction(1, 2) - d

    def row(*xs):
        return tuple(xs) + (Fraction(0),) * (4 - len(xs))

    zero = row()
    copies = (4,) * 8
    first = SplcValuation(copies, (row(half), row(half), row(2 * d)) + (zero,) * 5)
    middle = SplcValuation(copies, (row(2 * d), row(half, half), row(half, half)) + (zero,) * 5)
    flat = SplcValuation(copies, ((Fraction(1, 8),) * 4,) * 8)
    return Instance.symmetric([first, middle, middle, flat])


# Agent and copy priority orders under which the uncapped greedy reproduces the
# failure on greedy_counter(): agents 1 and 2 take type 1 before agent 0 moves,
# and agent 3 then drains type 2 ahead of type 0.
GREEDY_COUNTER_TIES = (
    (1, 2, 0, 3),
    tuple(range(4, 8)) + tuple(range(8, 12)) + tuple(range(0, 4)) + tuple(range(12, 32)),
)

FIXTURES = {
    "splc-mms-high": splc_mms_high,
    "greedy-counter": greedy_counter,
}
