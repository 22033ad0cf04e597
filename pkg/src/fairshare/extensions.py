"""Truncation, scaling, the concave extension, and the closed-form uniform bound."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

from fairshare.errors import CapabilityError, DomainError
from fairshare.lp import Constraint, LinearProgram, Status, solve
from fairshare.model import (
    Additive,
    Coverage,
    SetValuation,
    SplcValuation,
    TruncatedAdditive,
    as_fraction,
)

__all__ = [
    "ConcaveExtension",
    "ScaledValuation",
    "TruncatedValuation",
    "concave_extension_value",
    "mu_uniform",
    "scale",
    "truncate",
    "value_table",
]

EXTENSION_LIMIT = 16


@dataclass(frozen=True)
class TruncatedValuation(SetValuation):
    """``min(base(S), cap)``."""

    base: SetValuation
    cap: Fraction

    def __post_init__(self):
        cap = as_fraction(self.cap)
        if cap < 0:
            raise ValueError("truncation level must be nonnegative")
        object.__setattr__(self, "cap", cap)

    @property
    def m(self) -> int:
        return self.base.m

    def _value(self, goods):
        return min(self.base._value(goods), self.cap)


@dataclass(frozen=True)
class ScaledValuation(SetValuation):
    base: SetValuation
    factor: Fraction

    def __post_init__(self):
        factor = as_fraction(self.factor)
        if factor < 0:
            raise ValueError("scale factor must be nonnegative")
        object.__setattr__(self, "factor", factor)

    @property
    def m(self) -> int:
        return self.base.m

    def _value(self, goods):
        return self.factor * self.base._value(goods)


def truncate(v: SetValuation, gamma: Any) -> TruncatedValuation:
    return TruncatedValuation(v, as_fraction(gamma))


def scale(v: SetValuation, alpha: Any) -> SetValuation:
    """Pointwise multiple ``alpha * v``, staying inside v's family where possible."""
    a = as_fraction(alpha)
    if a < 0:
        raise ValueError("scale factor must be nonnegative")
    if isinstance(v, Additive):
        return Additive(tuple(a * w for w in v.weights))
    if isinstance(v, TruncatedAdditive):
        return TruncatedAdditive(tuple(a * w for w in v.weights), a * v.cap)
    if isinstance(v, Coverage):
        return Coverage(v.sets, tuple(a * w for w in v.weights))
    if isinstance(v, SplcValuation):
        return SplcValuation(v.copies, tuple(tuple(a * x for x in row) for row in v.values))
    if isinstance(v, TruncatedValuation):
        return TruncatedValuation(scale(v.base, a), a * v.cap)
    return ScaledValuation(v, a)


def value_table(v: SetValuation) -> list[Fraction]:
    """``table[mask] = v(goods in mask)`` for all ``2**m`` masks."""
    m = v.m
    if isinstance(v, SplcValuation):
        types = [v.type_of(g) for g in range(m)]
        table = []
        for mask in range(1 << m):
            counts = [0] * v.t
            for g in range(m):
                if mask >> g & 1:
                    counts[types[g]] += 1
            table.append(v.value_counts(counts))
        return table
    return [v.value_of_mask(mask) for mask in range(1 << m)]


@dataclass(frozen=True)
class ConcaveExtension:
    value: Fraction
    support: tuple[tuple[frozenset[int], Fraction], ...]


def _mask_set(mask: int, m: int) -> frozenset[int]:
    return frozenset(g for g in range(m) if mask >> g & 1)


def extension_from_table(table: Sequence[Fraction], m: int, x: Sequence[Fraction]) -> ConcaveExtension:
    """Solve the concave-extension LP over all subsets given their values."""
    size = 1 << m
    rows = [Constraint((1,) * size, "==", 1)]
    for g in range(m):
        bit = 1 << g
        rows.append(Constraint(tuple(1 if mask & bit else 0 for mask in range(size)), "==", x[g]))
    sol = solve(LinearProgram(tuple(table), rows))
    if sol.status is not Status.OPTIMAL:
        raise AssertionError(f"concave-extension LP returned {sol.status}")
    support = tuple(
        (_mask_set(mask, m), a) for mask, a in enumerate(sol.x) if a > 0
    )
    return ConcaveExtension(sol.objective, support)


def _check_point(v: SetValuation, x: Sequence[Any], limit: int) -> list[Fraction]:
    if v.m > limit:
        raise CapabilityError(
            f"concave extension over {v.m} goods exceeds the enumeration limit {limit}", limit
        )
    if len(x) != v.m:
        raise DomainError(f"point has {len(x)} coordinates, valuation has {v.m} goods")
    pt = [as_fraction(c) for c in x]
    if any(not 0 <= c <= 1 for c in pt):
        raise DomainError("point outside the unit hypercube")
    return pt


def concave_extension_value(
    v: SetValuation, x: Sequence[Any], limit: int = EXTENSION_LIMIT
) -> ConcaveExtension:
    """Concave closure ``v+(x)`` with an optimal distribution over subsets."""
    pt = _check_point(v, x, limit)
    return extension_from_table(value_table(v), v.m, pt)


def mu_uniform(splc: SplcValuation, n: int) -> Fraction:
    """Concave closure of an SPLC valuation at the uniform point ``(1/n, ..., 1/n)``.

    Per type: the first ``floor(k/n)`` marginals in full plus the fractional
    remainder of the next one.
    """
    if n < 1:
        raise ValueError("n must be positive")
    total = Fraction(0)
    for k, row in zip(splc.copies, splc.values):
        whole, rest = divmod(k, n)
        total += sum(row[:whole], Fraction(0))
        if rest:
            total += row[whole] * Fraction(rest, n)
    return total
