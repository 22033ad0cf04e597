"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` or ``python3 tests/test_acceptance.py``.
"""

import functools
import itertools
import random
import sys
import time
from fractions import Fraction as F

import pytest

from fairshare.extensions import concave_extension_value, mu_uniform, scale, truncate
from fairshare.generate import (
    ASYMMETRIC,
    FAMILIES,
    GREEDY_COUNTER_TIES,
    greedy_counter,
    random_instance,
    splc_mms_high,
)
from fairshare.lp import check_feasibility
from fairshare.model import SetValuation, SplcValuation
from fairshare.shares import (
    OracleLimits,
    aps_value,
    aps_via_truncated_extension,
    exact_aps,
    exact_mms,
    mms_value,
    mu_value,
)
from fairshare.splc_mms import build_feasibility_lp, find_cycle, solve_half_mms
from fairshare.sub_aps import (
    FailingAgent,
    greedy_internal_audit,
    greedy_uncapped_variant,
    third_aps_search,
)

EPS = F(1, 20)
TIME_BUDGET = 120.0
N_MMS = 240
N_APS = 240
N_PROPERTY = 100

_lines = []


def report(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    _lines.append(line)
    print(line)
    return passed


# --- shared workloads (computed once) -----------------------------------------

@functools.lru_cache(maxsize=None)
def mms_workload():
    """Criterion-1 instances solved, with exact MMS and wall time."""
    rng = random.Random(1001)
    rows = []
    start = time.perf_counter()
    for k in range(N_MMS):
        n = 2 + k % 2
        t = 2 + (k // 2) % 2
        inst = random_instance("splc", n, rng, t=t, max_copies=2, max_total=8, max_value=10)
        alloc, trace = solve_half_mms(inst)
        mms = tuple(exact_mms(inst, i) for i in range(n))
        rows.append((inst, alloc, trace, mms))
    return rows, time.perf_counter() - start


@functools.lru_cache(maxsize=None)
def aps_workload():
    """Criterion-4 instances with search results, exact APS and wall time."""
    rng = random.Random(2002)
    rows = []
    start = time.perf_counter()
    for k in range(N_APS):
        family = FAMILIES[k % 4]
        n = 2 + (k // 4) % 2
        ents = ASYMMETRIC[n] if (k // 8) % 2 else None
        inst = random_instance(
            family, n, rng,
            m=rng.randint(3, 7), t=rng.randint(2, 3), max_copies=2, max_total=7,
            entitlements=ents,
        )
        search = third_aps_search(inst, EPS, keep_states=True)
        aps = tuple(exact_aps(inst, i) for i in range(n))
        rows.append((inst, search, aps))
    return rows, time.perf_counter() - start


# --- criteria ---------------------------------------------------------------------

def test_criterion_1_half_mms():
    rows, elapsed = mms_workload()
    bad = [
        (k, i)
        for k, (inst, alloc, _, mms) in enumerate(rows)
        for i in range(inst.n)
        if 2 * inst.bundle_value(i, alloc.bundles[i]) < mms[i]
    ]
    ok = not bad and len(rows) >= 200 and elapsed < TIME_BUDGET
    report(1, ok, f"{len(rows)} SPLC instances, {len(bad)} agents below MMS/2, {elapsed:.1f}s")
    assert ok, bad[:5]


def test_criterion_2_unit_copies_fixture():
    failures = []
    for n in (2, 3, 4):
        inst = splc_mms_high(n)
        for i in range(n):
            got = (exact_mms(inst, i), exact_aps(inst, i), mu_value(inst, i), inst.valuations[i].total())
            if got != (1, 1, 1, 1):
                failures.append((n, i, got))
        alloc, _ = solve_half_mms(inst)
        if alloc.bundles != tuple((1,) for _ in range(n)):
            failures.append((n, "allocation", alloc.bundles))
    ok = not failures
    report(2, ok, "MMS = APS = mu = v(M) = 1 and one copy each for n = 2, 3, 4")
    assert ok, failures


def test_criterion_3_counter_fixture():
    inst = greedy_counter(F(1, 32))
    limits = OracleLimits(mms_goods=32)
    mms = [exact_mms(inst, i, limits) for i in range(4)]
    agents, goods = GREEDY_COUNTER_TIES
    result, state = greedy_uncapped_variant(inst, [3 * F(1, 2)] * 4, agents, goods)
    first = inst.valuations[0].value(state.bundles[0])
    alloc, _ = solve_half_mms(inst)
    values = [inst.bundle_value(i, alloc.bundles[i]) for i in range(4)]
    ok = (
        mms == [1, 1, 1, 1]
        and isinstance(result, FailingAgent)
        and first < F(1, 2)
        and all(v >= F(1, 2) for v in values)
    )
    report(3, ok, f"MMS {[str(x) for x in mms]}, uncapped greedy leaves agent 0 at {first}, pipeline min {min(values)}")
    assert ok


def test_criterion_4_third_aps():
    rows, elapsed = aps_workload()
    bad = [
        (k, i)
        for k, (inst, search, aps) in enumerate(rows)
        for i in range(inst.n)
        if inst.bundle_value(i, search.allocation.bundles[i]) * 3 * (1 + EPS) < aps[i]
    ]
    families = {type(inst.valuations[0]).__name__ for inst, _, _ in rows}
    asym = sum(1 for inst, _, _ in rows if not inst.is_symmetric)
    ok = not bad and len(rows) >= 200 and elapsed < TIME_BUDGET and len(families) == 4 and asym
    report(4, ok, f"{len(rows)} instances ({asym} asymmetric), {len(bad)} agents below APS/(3(1+eps)), {elapsed:.1f}s")
    assert ok, bad[:5]


def test_criterion_5_oracle_agreement():
    rows, _ = aps_workload()
    bad = [
        (k, i)
        for k, (inst, _, aps) in enumerate(rows)
        for i in range(inst.n)
        if aps_via_truncated_extension(inst.valuations[i], inst.entitlements[i]) != aps[i]
    ]
    ok = not bad
    report(5, ok, f"truncated-extension APS equals set-LP APS on {sum(i.n for i, _, _ in rows)} agents")
    assert ok, bad[:5]


def test_criterion_6_share_ordering():
    checked, bad = 0, []
    for inst, _, _, mms in mms_workload()[0]:
        for i in range(inst.n):
            aps = exact_aps(inst, i)
            mu = mu_uniform(inst.valuations[i], inst.n)
            checked += 1
            if not mms[i] <= aps <= mu:
                bad.append((mms[i], aps, mu))
    for inst, _, aps in aps_workload()[0]:
        if not inst.is_symmetric:
            continue
        for i in range(inst.n):
            checked += 1
            mms = exact_mms(inst, i)
            mu = mu_value(inst, i)
            if not mms <= aps[i] <= mu:
                bad.append((mms, aps[i], mu))
    ok = not bad and checked > 0
    report(6, ok, f"MMS <= APS <= mu on {checked} symmetric agents")
    assert ok, bad[:5]


def _trace_problems(inst, trace):
    problems = []
    if trace.residue is None:
        return problems
    res = trace.residue
    if not check_feasibility(build_feasibility_lp(res, trace.residue_targets)):
        problems.append("share LP infeasible")
    duals = trace.duals
    xc = trace.x_consolidated
    for r, v in enumerate(res.valuations):
        ratios = set()
        for j in range(len(res.copies)):
            for k, share in enumerate(xc.x[r][j]):
                if 0 < share < 1:
                    if duals.prices[j] <= 0:
                        problems.append("fractional type without price")
                    else:
                        ratios.add(v.values[j][k] / duals.prices[j])
        if len(ratios) > 1:
            problems.append("MBB ratios differ")
    if trace.graph_before.node_sums() != trace.graph_after.node_sums():
        problems.append("node sums changed")
    if find_cycle(list(trace.graph_after.weights)) is not None:
        problems.append("cycle left")
    for r, v in enumerate(res.valuations):
        before = xc.agent_value(r, v)
        if trace.x_repriced.agent_value(r, v) != before:
            problems.append("reprice changed value")
        got = v.value_counts(trace.rounding.allocation.bundles[r])
        if got < before - max((row[0] for row in v.values), default=0):
            problems.append("rounding lost too much")
    return problems


def test_criterion_7_structural_invariants():
    traces = 0
    residues = 0
    problems = []
    for inst, _, trace, _ in mms_workload()[0]:
        traces += 1
        full = [mu_uniform(v, inst.n) for v in inst.valuations]
        if not check_feasibility(build_feasibility_lp(inst, full)):
            problems.append("uniform targets infeasible")
        residues += trace.residue is not None
        problems += _trace_problems(inst, trace)
    # LP vertices rarely branch, so also push a denser family through the pipeline
    rng = random.Random(3003)
    for _ in range(150):
        inst = random_instance("splc", rng.randint(2, 4), rng, t=rng.randint(2, 4), max_copies=3, max_total=12, max_value=20)
        _, trace = solve_half_mms(inst)
        traces += 1
        residues += trace.residue is not None
        problems += _trace_problems(inst, trace)
    ok = not problems
    report(7, ok, f"{traces} traces ({residues} with an LP residue), {len(problems)} invariant breaches")
    assert ok, problems[:5]


def test_criterion_8_greedy_audits():
    runs, certificates, problems = 0, 0, []
    for inst, search, aps in aps_workload()[0]:
        for state in search.states:
            runs += 1
            try:
                greedy_internal_audit(state, aps)
            except AssertionError as exc:
                problems.append(str(exc))
        for fail in search.failures:
            certificates += 1
            if not aps[fail.agent] < fail.beta:
                problems.append(f"certificate for agent {fail.agent} not confirmed")
    ok = not problems and runs > 0
    report(8, ok, f"{runs} greedy runs audited, {certificates} failure certificates confirmed")
    assert ok, problems[:5]


class _Without(SetValuation):
    def __init__(self, base, gone):
        self.base, self.gone = base, gone

    @property
    def m(self):
        return self.base.m - 1

    def _value(self, goods):
        return self.base._value(frozenset(g if g < self.gone else g + 1 for g in goods))


def _small(rng, k):
    family = FAMILIES[k % 4]
    return random_instance(family, 1, rng, m=rng.randint(2, 5), t=2, max_total=5).valuations[0]


def test_criterion_9_properties():
    rng = random.Random(4004)
    counts = dict.fromkeys(
        ["mms-reduction", "aps-reduction", "scale-free", "cap-retention", "truncation-submodular", "vertex-agreement"], 0
    )
    bad = []
    for k in range(N_PROPERTY):
        v = _small(rng, k)
        n = rng.choice([2, 3])
        if isinstance(v, SplcValuation):
            j = rng.randrange(v.t)
            fewer = list(v.copies)
            fewer[j] -= 1
            reduced = v.with_copies(fewer)
        else:
            reduced = _Without(v, rng.randrange(v.m))
        if mms_value(reduced, n - 1) < mms_value(v, n):
            bad.append(("mms-reduction", v))
        counts["mms-reduction"] += 1
        if aps_value(reduced, F(1, n - 1)) < aps_value(v, F(1, n)):
            bad.append(("aps-reduction", v))
        counts["aps-reduction"] += 1

        b = rng.choice([F(1, 4), F(1, 3), F(1, 2), F(3, 4), F(1, 6)])
        alpha = F(rng.randint(0, 12), rng.randint(1, 5))
        z = aps_value(v, b)
        if aps_value(scale(v, alpha), b) != alpha * z:
            bad.append(("scale-free", v))
        counts["scale-free"] += 1
        if aps_value(truncate(v, z), b) != z:
            bad.append(("cap-retention", v))
        counts["cap-retention"] += 1

        tv = truncate(v, rng.randint(0, int(v.total()) + 1))
        sets = [frozenset(s) for r in range(v.m + 1) for s in itertools.combinations(range(v.m), r)]
        sub_ok = all(
            tv.value(s | {g}) - tv.value(s) >= tv.value(u | {g}) - tv.value(u)
            for s in sets for u in sets if s <= u
            for g in range(v.m) if g not in u
        )
        if not sub_ok:
            bad.append(("truncation-submodular", v))
        counts["truncation-submodular"] += 1

        s = {g for g in range(v.m) if rng.random() < 0.5}
        if concave_extension_value(v, [1 if g in s else 0 for g in range(v.m)]).value != v.value(s):
            bad.append(("vertex-agreement", v))
        counts["vertex-agreement"] += 1
    ok = not bad and all(c >= 100 for c in counts.values())
    report(9, ok, ", ".join(f"{name} x{c}" for name, c in counts.items()) + f"; {len(bad)} violations")
    assert ok, bad[:5]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
