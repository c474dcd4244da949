from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coordest.estimators import LSTAR, USTAR, OrderOptimal, estimate
from coordest.functions import RgPPlus
from coordest.order_optimal import (
    EstimatorTable,
    OrderError,
    check_unbiased,
    order_optimal_build,
    order_optimal_estimate,
)
from coordest.sampling import ThresholdScheme, sample_vector

PI = [F(1, 4), F(1, 2), F(3, 4)]
SCHEME = ThresholdScheme.step(PI, [1, 2, 3], r=2)
DOMAIN = [(a, b) for a in range(4) for b in range(4)]
F1 = RgPPlus(1)
CUSTOM = [[(3, 1), (3, 2), (3, 0)], [(2, 0), (2, 1)]]


def by_label(table):
    out = {}
    for (j, key), val in table.cells.items():
        out.setdefault(table.label(j, key), {})[j] = val
    return out


@pytest.fixture(scope="module")
def tables():
    return {name: order_optimal_build(F1, DOMAIN, SCHEME, order)
            for name, order in [("lstar", "lstar"), ("ustar", "ustar"), ("custom", CUSTOM)]}


def test_lstar_order_table(tables):
    t = by_label(tables["lstar"])
    assert t["(1,<=0)"] == {1: 4}
    assert t["(2,1)"] == {1: 2}
    assert t["(2,<=1)"] == {2: 2}
    assert t["(3,2)"] == {1: F(4, 3), 2: F(4, 3)}
    assert t["(3,<=2)"] == {3: F(4, 3)}


def test_ustar_order_table(tables):
    t = by_label(tables["ustar"])
    assert t["(2,<=1)"] == {2: 4}
    assert t["(2,1)"] == {1: 0}
    assert t["(3,<=2)"] == {3: 4}
    assert t["(3,2)"] == {1: 0, 2: 0}


def test_custom_order_table(tables):
    t = by_label(tables["custom"])
    assert t["(3,<=2)"] == {3: F(8, 3)}
    assert t["(3,<=1)"] == {2: F(8, 3)}
    assert t["(3,1)"] == {1: F(8, 3)}
    assert t["(3,<=0)"] == {1: F(20, 3)}
    # the (3,2) outcome covers (0, pi_2]; unbiasedness forces 2/3 there
    assert t["(3,2)"] == {1: F(2, 3), 2: F(2, 3)}
    assert t["(2,1)"] == {1: 0}


@pytest.mark.parametrize("name", ["lstar", "ustar", "custom"])
def test_tables_exactly_unbiased(tables, name):
    assert check_unbiased(tables[name], F1) == []
    for v in DOMAIN:
        assert tables[name].expectation(v) == F1.value(v)


def test_zero_vectors_get_zero(tables):
    for name, table in tables.items():
        for v in DOMAIN:
            if F1.value(v) == 0:
                assert all(val == 0 for _, _, val in table.estimates_for(v))


def test_order_optimal_estimate_lookup(tables):
    t = tables["ustar"]
    assert order_optimal_estimate(t, sample_vector((2, 0), F(3, 8), SCHEME)) == 4
    assert order_optimal_estimate(t, sample_vector((1, 0), F(1, 8), SCHEME)) == 4
    assert order_optimal_estimate(t, sample_vector((0, 3), F(1, 8), SCHEME)) == 0
    assert estimate(OrderOptimal(t), F1, sample_vector((2, 1), F(1, 8), SCHEME)) == 0


@pytest.mark.parametrize("name,kind", [("lstar", LSTAR), ("ustar", USTAR)])
def test_tables_match_continuous_estimators_at_midpoints(tables, name, kind):
    table = tables[name]
    for v in DOMAIN:
        for lo, hi, val in table.estimates_for(v):
            mid = (lo + hi) / 2
            got = estimate(kind, F1, sample_vector(tuple(float(x) for x in v), float(mid), SCHEME))
            assert got == pytest.approx(float(val), abs=1e-9)


def test_json_roundtrip(tables):
    t = tables["custom"]
    back = EstimatorTable.from_json(t.to_json())
    assert back.cells == t.cells
    assert back.edges == t.edges


def test_ambiguous_order_rejected():
    with pytest.raises(OrderError):
        order_optimal_build(F1, DOMAIN, SCHEME, [[(3, 1), (3, 2)]])


def test_cyclic_order_rejected():
    with pytest.raises(OrderError):
        order_optimal_build(F1, DOMAIN, SCHEME, [[(2, 0), (2, 1), (2, 0)]])


def test_values_outside_levels_rejected():
    with pytest.raises(OrderError):
        order_optimal_build(F1, [(5, 0)], SCHEME, "lstar")


def test_pps_scheme_rejected():
    with pytest.raises(OrderError):
        order_optimal_build(F1, DOMAIN, ThresholdScheme.pps([1.0, 1.0]), "lstar")


@settings(max_examples=25, deadline=None)
@given(st.lists(st.fractions(F(1, 20), F(19, 20)), min_size=2, max_size=4, unique=True),
       st.sampled_from(["lstar", "ustar"]))
def test_random_breakpoints_stay_unbiased_and_nonnegative(bps, order):
    bps = sorted(bps)
    n = len(bps)
    scheme = ThresholdScheme.step(bps, list(range(1, n + 1)), r=2)
    dom = [(a, b) for a in range(n + 1) for b in range(n + 1)]
    t = order_optimal_build(F1, dom, scheme, order)
    assert check_unbiased(t, F1) == []
    assert all(val >= 0 for val in t.cells.values())
