"""Instances, valuation families, allocations and their JSON form.

All numbers are exact :class:`fractions.Fraction` values. Goods are indexed
``0..m-1``; for SPLC valuations the goods are the individual copies, laid out
type by type (the ``k_0`` copies of type 0 first, then type 1, ...). Copies of
a type are interchangeable, so SPLC allocations are stored as per-type counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence, Union

from fairshare.errors import AllocationError, DomainError, ParseError

__all__ = [
    "Additive",
    "Allocation",
    "Coverage",
    "FractionalAllocation",
    "Instance",
    "SetValuation",
    "SplcValuation",
    "TruncatedAdditive",
    "ValuationSpec",
    "as_fraction",
    "linear_extension_value",
    "marginal",
    "parse_allocation",
    "parse_instance",
    "value",
    "write_allocation",
    "write_instance",
]


def as_fraction(x: Any) -> Fraction:
    """Convert ints, Fractions and ``"p/q"`` strings; refuse floats and bools."""
    if isinstance(x, bool) or isinstance(x, float):
        raise TypeError(f"not an exact rational: {x!r}")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            if "." in x or "e" in x.lower():
                raise ValueError
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise TypeError(f"not an exact rational: {x!r}") from None
    # gmpy2.mpq and friends
    try:
        return Fraction(int(x.numerator), int(x.denominator))
    except AttributeError:
        raise TypeError(f"not an exact rational: {x!r}") from None


class SetValuation:
    """Monotone set function over goods ``0..m-1`` with ``f(empty) = 0``.

    Subclasses implement ``m`` and ``_value(frozenset)``.
    """

    m: int

    def _value(self, goods: frozenset[int]) -> Fraction:
        raise NotImplementedError

    def _check(self, goods: Iterable[int]) -> frozenset[int]:
        s = frozenset(goods)
        for g in s:
            if not isinstance(g, int) or not 0 <= g < self.m:
                raise DomainError(f"good {g!r} outside universe of {self.m} goods")
        return s

    def value(self, goods: Iterable[int]) -> Fraction:
        return self._value(self._check(goods))

    def marginal(self, good: int, goods: Iterable[int]) -> Fraction:
        s = self._check(goods)
        self._check((good,))
        if good in s:
            return Fraction(0)
        return self._value(s | {good}) - self._value(s)

    def value_of_mask(self, mask: int) -> Fraction:
        return self._value(frozenset(g for g in range(self.m) if mask >> g & 1))

    def total(self) -> Fraction:
        return self._value(frozenset(range(self.m)))

    def singleton_values(self) -> list[Fraction]:
        return [self._value(frozenset((g,))) for g in range(self.m)]


@dataclass(frozen=True)
class Additive(SetValuation):
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        w = tuple(as_fraction(x) for x in self.weights)
        if any(x < 0 for x in w):
            raise ValueError("additive weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return len(self.weights)

    def _value(self, goods):
        return sum((self.weights[g] for g in goods), Fraction(0))


@dataclass(frozen=True)
class TruncatedAdditive(SetValuation):
    weights: tuple[Fraction, ...]
    cap: Fraction

    def __post_init__(self):
        w = tuple(as_fraction(x) for x in self.weights)
        cap = as_fraction(self.cap)
        if any(x < 0 for x in w) or cap < 0:
            raise ValueError("weights and cap must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "cap", cap)

    @property
    def m(self) -> int:
        return len(self.weights)

    def _value(self, goods):
        return min(sum((self.weights[g] for g in goods), Fraction(0)), self.cap)


@dataclass(frozen=True)
class Coverage(SetValuation):
    """Good ``g`` covers ``sets[g]``; a bundle is worth the weight it covers."""

    sets: tuple[frozenset[int], ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        w = tuple(as_fraction(x) for x in self.weights)
        if any(x < 0 for x in w):
            raise ValueError("universe weights must be nonnegative")
        sets = tuple(frozenset(s) for s in self.sets)
        for s in sets:
            if any(not 0 <= e < len(w) for e in s):
                raise ValueError("covered element outside the universe")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "sets", sets)

    @property
    def m(self) -> int:
        return len(self.sets)

    def _value(self, goods):
        covered = frozenset().union(*(self.sets[g] for g in goods))
        return sum((self.weights[e] for e in covered), Fraction(0))


@dataclass(frozen=True)
class SplcValuation(SetValuation):
    """Separable piecewise-linear concave valuation.

    ``values[j][k]`` is the marginal worth of the (k+1)-th copy of type ``j``;
    each row must be nonincreasing.
    """

    copies: tuple[int, ...]
    values: tuple[tuple[Fraction, ...], ...]
    _prefix: tuple[tuple[Fraction, ...], ...] = field(init=False, repr=False, compare=False)
    _type_of: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        copies = tuple(int(k) for k in self.copies)
        values = tuple(tuple(as_fraction(v) for v in row) for row in self.values)
        if len(copies) != len(values):
            raise ValueError("one marginal row per type required")
        for j, (k, row) in enumerate(zip(copies, values)):
            if k <= 0:
                raise ValueError(f"type {j}: copy count must be positive")
            if len(row) != k:
                raise ValueError(f"type {j}: expected {k} marginals, got {len(row)}")
            if any(v < 0 for v in row):
                raise ValueError(f"type {j}: marginals must be nonnegative")
            if any(row[i] < row[i + 1] for i in range(k - 1)):
                raise ValueError(f"type {j}: concavity violated")
        prefix = []
        for row in values:
            acc = [Fraction(0)]
            for v in row:
                acc.append(acc[-1] + v)
            prefix.append(tuple(acc))
        object.__setattr__(self, "copies", copies)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_prefix", tuple(prefix))
        object.__setattr__(
            self, "_type_of", tuple(j for j, k in enumerate(copies) for _ in range(k))
        )

    @property
    def t(self) -> int:
        return len(self.copies)

    @property
    def m(self) -> int:
        return len(self._type_of)

    def type_of(self, good: int) -> int:
        return self._type_of[good]

    def counts_of(self, goods: Iterable[int]) -> tuple[int, ...]:
        counts = [0] * self.t
        for g in goods:
            counts[self._type_of[g]] += 1
        return tuple(counts)

    def value_counts(self, counts: Sequence[int]) -> Fraction:
        if len(counts) != self.t:
            raise DomainError(f"expected {self.t} counts, got {len(counts)}")
        total = Fraction(0)
        for j, c in enumerate(counts):
            if not 0 <= c <= self.copies[j]:
                raise DomainError(f"type {j}: count {c} outside [0, {self.copies[j]}]")
            total += self._prefix[j][c]
        return total

    def copy_marginal(self, j: int, held: int) -> Fraction:
        """Worth of one more copy of type ``j`` to a holder of ``held`` copies."""
        if not 0 <= held < self.copies[j]:
            raise DomainError(f"type {j} has no copy beyond {held}")
        return self.values[j][held]

    def _value(self, goods):
        return self.value_counts(self.counts_of(goods))

    def total(self) -> Fraction:
        return sum((p[-1] for p in self._prefix), Fraction(0))

    def with_copies(self, copies: Sequence[int]) -> SplcValuation:
        """Same marginals restricted to the first ``copies[j]`` copies of each type.

        Types whose new count is zero are dropped.
        """
        keep = [j for j, c in enumerate(copies) if c > 0]
        return SplcValuation(
            tuple(copies[j] for j in keep), tuple(self.values[j][: copies[j]] for j in keep)
        )


ValuationSpec = Union[Additive, SplcValuation, TruncatedAdditive, Coverage, SetValuation]


def value(spec: SetValuation, bundle: Iterable[int]) -> Fraction:
    """Worth of ``bundle`` (a collection of good indices) under ``spec``."""
    return spec.value(bundle)


def marginal(spec: SetValuation, good: int, bundle: Iterable[int]) -> Fraction:
    return spec.marginal(good, bundle)


def linear_extension_value(splc: SplcValuation, row: Sequence[Sequence[Any]]) -> Fraction:
    """``sum_j sum_k v_jk x_jk`` for one agent's fractional copy vector."""
    if len(row) != splc.t:
        raise DomainError(f"expected {splc.t} type rows, got {len(row)}")
    total = Fraction(0)
    for j, xs in enumerate(row):
        if len(xs) != splc.copies[j]:
            raise DomainError(f"type {j}: expected {splc.copies[j]} entries, got {len(xs)}")
        for v, x in zip(splc.values[j], xs):
            x = as_fraction(x)
            if not 0 <= x <= 1:
                raise DomainError(f"type {j}: fraction {x} outside [0, 1]")
            total += v * x
    return total


@dataclass(frozen=True)
class Instance:
    n: int
    entitlements: tuple[Fraction, ...]
    valuations: tuple[SetValuation, ...]

    def __post_init__(self):
        ents = tuple(as_fraction(b) for b in self.entitlements)
        vals = tuple(self.valuations)
        if self.n <= 0:
            raise ValueError("need at least one agent")
        if len(ents) != self.n or len(vals) != self.n:
            raise ValueError("one entitlement and one valuation per agent")
        if any(b <= 0 for b in ents):
            raise ValueError("entitlements must be positive")
        if sum(ents) != 1:
            raise ValueError("entitlements sum != 1")
        splc = [isinstance(v, SplcValuation) for v in vals]
        if any(splc) and not all(splc):
            raise ValueError("SPLC and non-SPLC valuations cannot be mixed")
        if all(splc):
            if len({v.copies for v in vals}) != 1:
                raise ValueError("all SPLC valuations must share types and copy counts")
        elif len({v.m for v in vals}) != 1:
            raise ValueError("all valuations must share the same goods")
        object.__setattr__(self, "entitlements", ents)
        object.__setattr__(self, "valuations", vals)

    @classmethod
    def symmetric(cls, valuations: Sequence[SetValuation]) -> Instance:
        n = len(valuations)
        return cls(n, tuple(Fraction(1, n) for _ in range(n)), tuple(valuations))

    @property
    def m(self) -> int:
        return self.valuations[0].m

    @property
    def is_splc(self) -> bool:
        return isinstance(self.valuations[0], SplcValuation)

    @property
    def is_symmetric(self) -> bool:
        return all(b == Fraction(1, self.n) for b in self.entitlements)

    @property
    def copies(self) -> tuple[int, ...]:
        if not self.is_splc:
            raise TypeError("copy counts are only defined for SPLC instances")
        return self.valuations[0].copies

    def bundle_value(self, agent: int, bundle: Sequence[int]) -> Fraction:
        """Value of an allocation bundle (counts for SPLC, good indices otherwise)."""
        v = self.valuations[agent]
        if self.is_splc:
            return v.value_counts(bundle)
        return v.value(bundle)

    def empty_allocation(self) -> Allocation:
        if self.is_splc:
            return Allocation(tuple((0,) * len(self.copies) for _ in range(self.n)), counts=True)
        return Allocation(tuple(() for _ in range(self.n)), counts=False)

    def allocation_from_sets(self, sets: Sequence[Iterable[int]]) -> Allocation:
        """Build an allocation from per-agent sets of good indices."""
        if self.is_splc:
            v = self.valuations[0]
            return Allocation(tuple(v.counts_of(s) for s in sets), counts=True)
        return Allocation(tuple(tuple(sorted(s)) for s in sets), counts=False)

    def validate_allocation(self, allocation: Allocation) -> None:
        if len(allocation.bundles) != self.n:
            raise AllocationError(f"expected {self.n} bundles, got {len(allocation.bundles)}")
        if self.is_splc:
            if not allocation.counts:
                raise AllocationError("SPLC instances take per-type copy counts")
            k = self.copies
            for i, b in enumerate(allocation.bundles):
                if len(b) != len(k):
                    raise AllocationError(f"agent {i}: expected {len(k)} counts")
                if any(c < 0 for c in b):
                    raise AllocationError(f"agent {i}: negative count")
            for j, kj in enumerate(k):
                used = sum(b[j] for b in allocation.bundles)
                if used > kj:
                    raise AllocationError(f"type {j}: {used} copies assigned, only {kj} exist")
        else:
            if allocation.counts:
                raise AllocationError("non-SPLC instances take sets of good indices")
            owner: dict[int, int] = {}
            for i, b in enumerate(allocation.bundles):
                for g in b:
                    if not 0 <= g < self.m:
                        raise AllocationError(f"agent {i}: good {g} out of range")
                    if g in owner:
                        raise AllocationError(f"good {g} given to agents {owner[g]} and {i}")
                    owner[g] = i


@dataclass(frozen=True)
class Allocation:
    """Per-agent bundles; ``counts`` selects the SPLC copy-count representation."""

    bundles: tuple[tuple[int, ...], ...]
    counts: bool = False

    def __post_init__(self):
        object.__setattr__(self, "bundles", tuple(tuple(int(g) for g in b) for b in self.bundles))


@dataclass(frozen=True)
class FractionalAllocation:
    """``x[i][j][k]``: the share of the (k+1)-th copy of type j held by agent i."""

    copies: tuple[int, ...]
    x: tuple[tuple[tuple[Fraction, ...], ...], ...]

    def __post_init__(self):
        x = tuple(tuple(tuple(as_fraction(v) for v in row) for row in agent) for agent in self.x)
        copies = tuple(self.copies)
        for i, agent in enumerate(x):
            if len(agent) != len(copies):
                raise DomainError(f"agent {i}: expected {len(copies)} type rows")
            for j, row in enumerate(agent):
                if len(row) != copies[j]:
                    raise DomainError(f"agent {i}, type {j}: expected {copies[j]} entries")
                if any(not 0 <= v <= 1 for v in row):
                    raise DomainError(f"agent {i}, type {j}: entry outside [0, 1]")
        for j, kj in enumerate(copies):
            if sum(sum(agent[j]) for agent in x) > kj:
                raise DomainError(f"type {j}: more than {kj} copies handed out")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "copies", copies)

    @property
    def n(self) -> int:
        return len(self.x)

    def mass(self, i: int, j: int) -> Fraction:
        return sum(self.x[i][j], Fraction(0))

    def agent_value(self, i: int, splc: SplcValuation) -> Fraction:
        return linear_extension_value(splc, self.x[i])


# --- JSON ---------------------------------------------------------------

def _rat(x: Any, path: str) -> Fraction:
    try:
        return as_fraction(x)
    except TypeError:
        raise ParseError(f"not a rational number: {x!r}", path) from None


def _rats(xs: Any, path: str) -> tuple[Fraction, ...]:
    if not isinstance(xs, list):
        raise ParseError("expected a list", path)
    return tuple(_rat(x, f"{path}[{i}]") for i, x in enumerate(xs))


def _int(x: Any, path: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"expected an integer, got {x!r}", path)
    return x


def _valuation_from_json(d: Any, path: str) -> SetValuation:
    if not isinstance(d, dict):
        raise ParseError("expected an object", path)
    kind = d.get("kind")
    try:
        if kind == "splc":
            copies = d.get("copies")
            values = d.get("values")
            if not isinstance(copies, list) or not isinstance(values, list):
                raise ParseError("splc needs 'copies' and 'values' lists", path)
            t = _int(d.get("types", len(copies)), f"{path}.types")
            if t != len(copies) or t != len(values):
                raise ParseError(f"'types' is {t} but copies/values have other lengths", path)
            ks = tuple(_int(k, f"{path}.copies[{j}]") for j, k in enumerate(copies))
            rows = tuple(_rats(r, f"{path}.values[{j}]") for j, r in enumerate(values))
            for j, row in enumerate(rows):
                if any(row[i] < row[i + 1] for i in range(len(row) - 1)):
                    raise ParseError("concavity violated", f"{path}.values[{j}]")
            return SplcValuation(ks, rows)
        if kind == "additive":
            return Additive(_rats(d.get("weights"), f"{path}.weights"))
        if kind == "truncated_additive":
            return TruncatedAdditive(
                _rats(d.get("weights"), f"{path}.weights"), _rat(d.get("cap"), f"{path}.cap")
            )
        if kind == "coverage":
            sets = d.get("sets")
            if not isinstance(sets, list):
                raise ParseError("expected a list", f"{path}.sets")
            parsed = []
            for g, s in enumerate(sets):
                if not isinstance(s, list):
                    raise ParseError("expected a list", f"{path}.sets[{g}]")
                parsed.append(frozenset(_int(e, f"{path}.sets[{g}]") for e in s))
            return Coverage(tuple(parsed), _rats(d.get("weights"), f"{path}.weights"))
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), path) from None
    raise ParseError(f"unknown valuation kind {kind!r}", f"{path}.kind")


def _valuation_to_json(v: SetValuation) -> dict:
    if isinstance(v, SplcValuation):
        return {
            "kind": "splc",
            "types": v.t,
            "copies": list(v.copies),
            "values": [[str(x) for x in row] for row in v.values],
        }
    if isinstance(v, Additive):
        return {"kind": "additive", "weights": [str(x) for x in v.weights]}
    if isinstance(v, TruncatedAdditive):
        return {
            "kind": "truncated_additive",
            "weights": [str(x) for x in v.weights],
            "cap": str(v.cap),
        }
    if isinstance(v, Coverage):
        return {
            "kind": "coverage",
            "sets": [sorted(s) for s in v.sets],
            "weights": [str(x) for x in v.weights],
        }
    raise TypeError(f"{type(v).__name__} has no JSON form")


def _load(data: bytes | str | dict) -> Any:
    if isinstance(data, dict):
        return data
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None


def instance_from_dict(doc: Any) -> Instance:
    if not isinstance(doc, dict):
        raise ParseError("expected a JSON object")
    n = _int(doc.get("agents"), "agents")
    if n <= 0:
        raise ParseError("need at least one agent", "agents")
    ents = _rats(doc.get("entitlements"), "entitlements")
    if len(ents) != n:
        raise ParseError(f"expected {n} entitlements, got {len(ents)}", "entitlements")
    if any(b <= 0 for b in ents):
        raise ParseError("entitlements must be positive", "entitlements")
    if sum(ents) != 1:
        raise ParseError(f"entitlements sum != 1 (got {sum(ents)})", "entitlements")
    vals = doc.get("valuations")
    if not isinstance(vals, list) or len(vals) != n:
        raise ParseError(f"expected {n} valuations", "valuations")
    parsed = tuple(_valuation_from_json(v, f"valuations[{i}]") for i, v in enumerate(vals))
    try:
        return Instance(n, ents, parsed)
    except ValueError as exc:
        raise ParseError(str(exc), "valuations") from None


def instance_to_dict(instance: Instance) -> dict:
    return {
        "agents": instance.n,
        "entitlements": [str(b) for b in instance.entitlements],
        "valuations": [_valuation_to_json(v) for v in instance.valuations],
    }


def parse_instance(data: bytes | str | dict) -> Instance:
    return instance_from_dict(_load(data))


def write_instance(instance: Instance) -> bytes:
    return (json.dumps(instance_to_dict(instance), indent=2) + "\n").encode("utf-8")


def parse_allocation(data: bytes | str | dict, instance: Instance) -> Allocation:
    doc = _load(data)
    if not isinstance(doc, dict) or not isinstance(doc.get("bundles"), list):
        raise ParseError("expected an object with a 'bundles' list")
    bundles = []
    for i, b in enumerate(doc["bundles"]):
        if not isinstance(b, list):
            raise ParseError("expected a list", f"bundles[{i}]")
        bundles.append(tuple(_int(g, f"bundles[{i}]") for g in b))
    return Allocation(tuple(bundles), counts=instance.is_splc)


def write_allocation(allocation: Allocation) -> bytes:
    return (json.dumps({"bundles": [list(b) for b in allocation.bundles]}) + "\n").encode("utf-8")
