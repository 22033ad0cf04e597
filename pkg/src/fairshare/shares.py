"""Exact MMS/APS oracles for small instances and the allocation verifier."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

from fairshare.errors import CapabilityError, InvariantError
from fairshare.extensions import (
    EXTENSION_LIMIT,
    concave_extension_value,
    extension_from_table,
    mu_uniform,
    value_table,
)
from fairshare.lp import Constraint, LinearProgram, check_feasibility
from fairshare.model import (
    Additive,
    Allocation,
    Instance,
    SetValuation,
    SplcValuation,
    as_fraction,
)

__all__ = [
    "AgentShare",
    "OracleLimits",
    "ShareReport",
    "aps_value",
    "aps_via_truncated_extension",
    "compute_shares",
    "exact_aps",
    "exact_mms",
    "mms_value",
    "mu_value",
    "support_sets_at_aps",
    "verify",
]


@dataclass(frozen=True)
class OracleLimits:
    mms_agents: int = 4
    mms_goods: int = 10
    aps_goods: int = 14
    extension_goods: int = EXTENSION_LIMIT


DEFAULT_LIMITS = OracleLimits()


# --- MMS ----------------------------------------------------------------

def _compositions(k: int, groups: list[list[int]], n: int):
    """Ways to split ``k`` interchangeable copies over ``n`` parts.

    Parts inside one group are still indistinguishable, so their counts are
    forced to be nonincreasing.
    """
    out = [0] * n
    # (part, previous part of the same group or None)
    flat = [(p, g[gi - 1] if gi else None) for g in groups for gi, p in enumerate(g)]

    def rec(idx: int, left: int):
        if idx == len(flat):
            if left == 0:
                yield tuple(out)
            return
        p, prev = flat[idx]
        hi = left if prev is None else min(left, out[prev])
        for c in range(hi, -1, -1):
            out[p] = c
            yield from rec(idx + 1, left - c)
        out[p] = 0

    yield from rec(0, k)


def _mms_splc(v: SplcValuation, n: int) -> Fraction:
    # types with larger totals first: better early incumbents
    order = sorted(range(v.t), key=lambda j: (-sum(v.values[j]), j))
    prefixes = []
    for j in order:
        acc = [Fraction(0)]
        for x in v.values[j]:
            acc.append(acc[-1] + x)
        prefixes.append(acc)
    copies = [v.copies[j] for j in order]
    rest = [Fraction(0)] * (len(order) + 1)
    for i in range(len(order) - 1, -1, -1):
        rest[i] = rest[i + 1] + prefixes[i][-1]
    upper = mu_uniform(v, n)
    best = Fraction(0)

    def rec(ti: int, vals: list[Fraction], sigs: list[tuple]):
        nonlocal best
        if best >= upper:
            return
        if ti == len(order):
            best = max(best, min(vals))
            return
        if min(vals) + rest[ti] <= best:
            return
        groups: dict[tuple, list[int]] = {}
        for p, s in enumerate(sigs):
            groups.setdefault(s, []).append(p)
        pre = prefixes[ti]
        options = []
        for comp in _compositions(copies[ti], list(groups.values()), n):
            new_vals = [vals[p] + pre[comp[p]] for p in range(n)]
            options.append((min(new_vals), comp, new_vals))
        options.sort(key=lambda o: o[0], reverse=True)
        for low, comp, new_vals in options:
            if low + rest[ti + 1] <= best:
                break
            rec(ti + 1, new_vals, [sigs[p] + (comp[p],) for p in range(n)])
            if best >= upper:
                return

    rec(0, [Fraction(0)] * n, [()] * n)
    return best


def _mms_generic(v: SetValuation, n: int) -> Fraction:
    m = v.m
    goods = sorted(range(m), key=lambda g: (-v.value((g,)), g))
    total = v.total()
    upper = total / n if isinstance(v, Additive) else total
    best = Fraction(0)
    parts: list[set[int]] = []

    def rec(idx: int):
        nonlocal best
        if best >= upper:
            return
        if idx == m:
            vals = [v.value(p) for p in parts] + [Fraction(0)] * (n - len(parts))
            best = max(best, min(vals))
            return
        remaining = goods[idx:]
        optimistic = [v.value(p | set(remaining)) for p in parts]
        if len(parts) < n:
            optimistic.append(v.value(remaining))
        if min(optimistic) <= best:
            return
        g = goods[idx]
        for p in parts:
            p.add(g)
            rec(idx + 1)
            p.discard(g)
        if len(parts) < n:
            parts.append({g})
            rec(idx + 1)
            parts.pop()

    rec(0)
    return best


def mms_value(v: SetValuation, n: int, limits: OracleLimits = DEFAULT_LIMITS) -> Fraction:
    """Best worst-bundle value over all ``n``-part partitions (empty parts allowed)."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > limits.mms_agents:
        raise CapabilityError(f"MMS oracle limited to {limits.mms_agents} agents", limits.mms_agents)
    if n == 1:
        return v.total()
    if isinstance(v, SplcValuation):
        # a part never gains from more than p_j copies of type j (p_j = number of
        # positive marginals), so copies beyond n * p_j are dead weight
        positive = [sum(1 for x in row if x > 0) for row in v.values]
        useful = [min(k, n * p) for k, p in zip(v.copies, positive)]
        if sum(useful) == 0:
            return Fraction(0)
        if sum(useful) > limits.mms_goods:
            raise CapabilityError(
                f"MMS oracle limited to {limits.mms_goods} useful copies", limits.mms_goods
            )
        return _mms_splc(v.with_copies(useful), n)
    if v.m > limits.mms_goods:
        raise CapabilityError(f"MMS oracle limited to {limits.mms_goods} goods", limits.mms_goods)
    return _mms_generic(v, n)


def exact_mms(instance: Instance, agent: int, limits: OracleLimits = DEFAULT_LIMITS) -> Fraction:
    if not instance.is_symmetric:
        raise ValueError("MMS is defined for symmetric entitlements only")
    return mms_value(instance.valuations[agent], instance.n, limits)


# --- APS ----------------------------------------------------------------

def _table(v: SetValuation, limit: int) -> list[Fraction]:
    if v.m > limit:
        raise CapabilityError(f"APS oracle limited to {limit} goods", limit)
    return value_table(v)


def _largest_feasible(levels: list[Fraction], feasible) -> Fraction:
    # levels sorted ascending, levels[0] == 0 is always feasible
    lo, hi = 0, len(levels) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if feasible(levels[mid]):
            lo = mid
        else:
            hi = mid - 1
    return levels[lo]


def _levels(table: Sequence[Fraction]) -> list[Fraction]:
    return sorted(set(table) | {Fraction(0)})


def _set_lp_feasible(table: Sequence[Fraction], m: int, b: Fraction, z: Fraction) -> bool:
    if z <= 0:
        return True
    # a feasible weighting can always swap a set for a minimal subset that
    # still reaches z, so minimal sets suffice
    sets = [
        mask
        for mask, val in enumerate(table)
        if val >= z and all(table[mask ^ (1 << g)] < z for g in range(m) if mask >> g & 1)
    ]
    if not sets:
        return False
    rows = [Constraint((1,) * len(sets), "==", 1)]
    for g in range(m):
        bit = 1 << g
        coeffs = tuple(1 if mask & bit else 0 for mask in sets)
        if any(coeffs):
            rows.append(Constraint(coeffs, "<=", b))
    return check_feasibility(LinearProgram((0,) * len(sets), rows))


def aps_value(v: SetValuation, b, limits: OracleLimits = DEFAULT_LIMITS) -> Fraction:
    """Largest level ``z`` whose sets of worth ``>= z`` admit a weighting of total 1
    with every good covered at most ``b``."""
    b = as_fraction(b)
    table = _table(v, limits.aps_goods)
    return _largest_feasible(_levels(table), lambda z: _set_lp_feasible(table, v.m, b, z))


def exact_aps(instance: Instance, agent: int, limits: OracleLimits = DEFAULT_LIMITS) -> Fraction:
    return aps_value(instance.valuations[agent], instance.entitlements[agent], limits)


def aps_via_truncated_extension(
    v: SetValuation, b, limits: OracleLimits = DEFAULT_LIMITS
) -> Fraction:
    """Largest level ``z`` with ``(v truncated at z)+(b, ..., b) == z``."""
    b = as_fraction(b)
    table = _table(v, min(limits.aps_goods, limits.extension_goods))
    point = [b] * v.m

    def reaches(z: Fraction) -> bool:
        if z <= 0:
            return True
        return extension_from_table([min(t, z) for t in table], v.m, point).value == z

    return _largest_feasible(_levels(table), reaches)


def support_sets_at_aps(
    v: SetValuation, b, limits: OracleLimits = DEFAULT_LIMITS
) -> list[tuple[frozenset[int], Fraction]]:
    """Optimal subset weighting of the truncated extension at the APS level.

    Every returned set is worth exactly APS after truncation, the weights sum
    to 1 and no good carries more than ``b``.
    """
    b = as_fraction(b)
    z = aps_value(v, b, limits)
    table = _table(v, min(limits.aps_goods, limits.extension_goods))
    ext = extension_from_table([min(t, z) for t in table], v.m, [b] * v.m)
    if ext.value != z:
        raise InvariantError(f"truncated extension {ext.value} differs from APS {z}")
    return list(ext.support)


# --- bounds, reports, verification --------------------------------------

def mu_value(instance: Instance, agent: int, limits: OracleLimits = DEFAULT_LIMITS) -> Fraction:
    """Concave-extension upper bound at ``(b_i, ..., b_i)``; closed form for SPLC."""
    v = instance.valuations[agent]
    if isinstance(v, SplcValuation) and instance.is_symmetric:
        return mu_uniform(v, instance.n)
    b = instance.entitlements[agent]
    return concave_extension_value(v, [b] * v.m, limits.extension_goods).value


@dataclass(frozen=True)
class AgentShare:
    agent: int
    achieved: Fraction
    target: Fraction | None = None
    mms: Fraction | None = None
    aps: Fraction | None = None
    mu: Fraction | None = None
    passed: bool = True

    @property
    def ratio(self) -> Fraction | None:
        if self.target is None or self.target == 0:
            return None
        return self.achieved / self.target

    def to_dict(self) -> dict:
        out = {"agent": self.agent, "achieved": str(self.achieved)}
        for name in ("target", "mms", "aps", "mu"):
            val = getattr(self, name)
            if val is not None:
                out[name] = str(val)
        if self.ratio is not None:
            out["ratio"] = str(self.ratio)
        out["passed"] = self.passed
        return out


@dataclass(frozen=True)
class ShareReport:
    factor: Fraction | None
    agents: tuple[AgentShare, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.agents)

    @property
    def worst_ratio(self) -> Fraction:
        """Minimum achieved/target over agents with a positive target (1 if none)."""
        ratios = [a.ratio for a in self.agents if a.ratio is not None]
        return min(ratios) if ratios else Fraction(1)

    def to_dict(self) -> dict:
        return {
            "factor": None if self.factor is None else str(self.factor),
            "passed": self.passed,
            "agents": [a.to_dict() for a in self.agents],
        }


def compute_shares(
    instance: Instance,
    which: Iterable[str] = ("mms", "aps", "mu"),
    limits: OracleLimits = DEFAULT_LIMITS,
) -> ShareReport:
    """Share values per agent; MMS is skipped for asymmetric instances."""
    which = set(which)
    rows = []
    for i in range(instance.n):
        vals = {}
        if "mms" in which and instance.is_symmetric:
            vals["mms"] = exact_mms(instance, i, limits)
        if "aps" in which:
            vals["aps"] = exact_aps(instance, i, limits)
        if "mu" in which:
            vals["mu"] = mu_value(instance, i, limits)
        rows.append(AgentShare(agent=i, achieved=Fraction(0), **vals))
    return ShareReport(None, tuple(rows))


def verify(
    instance: Instance,
    allocation: Allocation,
    targets: Sequence,
    factor=1,
) -> ShareReport:
    """Check ``v_i(A_i) >= factor * target_i`` exactly for every agent."""
    instance.validate_allocation(allocation)
    factor = as_fraction(factor)
    if len(targets) != instance.n:
        raise ValueError(f"expected {instance.n} targets, got {len(targets)}")
    rows = []
    for i, (bundle, target) in enumerate(zip(allocation.bundles, targets)):
        target = as_fraction(target)
        achieved = instance.bundle_value(i, bundle)
        rows.append(
            AgentShare(agent=i, achieved=achieved, target=target, passed=achieved >= factor * target)
        )
    return ShareReport(factor, tuple(rows))


def with_targets(report: ShareReport, shares: ShareReport) -> ShareReport:
    """Copy share columns (mms/aps/mu) from ``shares`` into a verification report."""
    merged = tuple(
        replace(a, mms=s.mms, aps=s.aps, mu=s.mu) for a, s in zip(report.agents, shares.agents)
    )
    return ShareReport(report.factor, merged)
