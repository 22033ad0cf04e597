import random
import sys
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from fairshare.model import Additive, Coverage, SplcValuation, TruncatedAdditive

F = Fraction


@pytest.fixture
def rng():
    return random.Random(20240601)


def splc_strategy(max_types=3, max_copies=3, max_value=10):
    @st.composite
    def build(draw):
        t = draw(st.integers(1, max_types))
        copies = tuple(draw(st.integers(1, max_copies)) for _ in range(t))
        rows = tuple(
            tuple(sorted(draw(st.lists(st.integers(0, max_value), min_size=k, max_size=k)), reverse=True))
            for k in copies
        )
        return SplcValuation(copies, rows)

    return build()


def submodular_strategy(max_goods=5, max_value=10):
    """Additive, truncated-additive or coverage valuations on 1..max_goods goods."""

    @st.composite
    def build(draw):
        m = draw(st.integers(1, max_goods))
        weights = st.lists(st.integers(0, max_value), min_size=m, max_size=m)
        kind = draw(st.sampled_from(["additive", "truncated_additive", "coverage"]))
        if kind == "additive":
            return Additive(tuple(draw(weights)))
        if kind == "truncated_additive":
            w = draw(weights)
            return TruncatedAdditive(tuple(w), draw(st.integers(0, max(1, sum(w)))))
        u = draw(st.integers(1, 2 * m))
        sets = tuple(
            frozenset(draw(st.sets(st.integers(0, u - 1), max_size=u))) for _ in range(m)
        )
        cw = tuple(draw(st.lists(st.integers(1, max_value), min_size=u, max_size=u)))
        return Coverage(sets, cw)

    return build()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
