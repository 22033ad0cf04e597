import itertools
from fractions import Fraction as F

import pytest

from fairshare.errors import CapabilityError, DomainError
from fairshare.extensions import (
    ScaledValuation,
    concave_extension_value,
    mu_uniform,
    scale,
    truncate,
    value_table,
)
from fairshare.model import Additive, Coverage, SetValuation, SplcValuation, TruncatedAdditive

COV = Coverage((frozenset({0, 1}), frozenset({1, 2}), frozenset({3})), (1, 2, 3, 4))


def all_sets(m):
    for r in range(m + 1):
        yield from itertools.combinations(range(m), r)


def test_truncate_zero_and_large():
    assert all(truncate(COV, 0).value(s) == 0 for s in all_sets(3))
    big = truncate(COV, 100)
    assert all(big.value(s) == COV.value(s) for s in all_sets(3))


def test_truncate_rejects_negative():
    with pytest.raises(ValueError):
        truncate(COV, -1)


def test_scale_stays_in_family():
    assert scale(Additive((3, 4)), 2) == Additive((6, 8))
    assert scale(Additive((3, 4)), 1) == Additive((3, 4))
    assert scale(Additive((3, 4)), 0).total() == 0
    assert isinstance(scale(TruncatedAdditive((1, 2), 2), F(1, 2)), TruncatedAdditive)
    assert isinstance(scale(COV, 3), Coverage)
    assert isinstance(scale(SplcValuation((2,), ((2, 1),)), 3), SplcValuation)


def test_scale_fallback():
    class Odd(SetValuation):
        m = 2

        def _value(self, goods):
            return F(len(goods) ** 2)

    s = scale(Odd(), F(1, 2))
    assert isinstance(s, ScaledValuation)
    assert s.value([0, 1]) == 2


def test_value_table_matches_value():
    v = SplcValuation((2, 1), ((3, 1), (2,)))
    table = value_table(v)
    for mask in range(8):
        goods = [g for g in range(3) if mask >> g & 1]
        assert table[mask] == v.value(goods)


def test_extension_on_vertices():
    for s in all_sets(3):
        x = [1 if g in s else 0 for g in range(3)]
        assert concave_extension_value(COV, x).value == COV.value(s)


def test_extension_of_additive_is_linear():
    v = Additive((3, 1, 4, 1))
    x = [F(1, 2), F(1, 3), F(2, 5), 1]
    assert concave_extension_value(v, x).value == sum(w * c for w, c in zip(v.weights, x))


def test_extension_two_unit_copies():
    v = SplcValuation((2,), ((1, 0),))
    ext = concave_extension_value(v, [F(1, 2), F(1, 2)])
    assert ext.value == 1
    assert sum(a for _, a in ext.support) == 1


def test_extension_errors():
    with pytest.raises(CapabilityError) as info:
        concave_extension_value(Additive((1,) * 5), [0] * 5, limit=4)
    assert info.value.limit == 4
    with pytest.raises(DomainError):
        concave_extension_value(Additive((1, 1)), [F(3, 2), 0])
    with pytest.raises(DomainError):
        concave_extension_value(Additive((1, 1)), [0])


@pytest.mark.parametrize(
    "copies,values,n,expected",
    [((3,), ((3, 2, 1),), 2, 4), ((3,), ((3, 2, 1),), 1, 6), ((2,), ((3, 1),), 2, 3)],
)
def test_mu_uniform_values(copies, values, n, expected):
    assert mu_uniform(SplcValuation(copies, values), n) == expected


def test_mu_uniform_matches_lp(rng):
    for _ in range(40):
        t = rng.randint(1, 3)
        copies = tuple(rng.randint(1, 3) for _ in range(t))
        rows = tuple(tuple(sorted((rng.randint(0, 9) for _ in range(k)), reverse=True)) for k in copies)
        v = SplcValuation(copies, rows)
        n = rng.randint(1, 4)
        assert mu_uniform(v, n) == concave_extension_value(v, [F(1, n)] * v.m).value
