import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coordest.curves import curve_from_data, v_optimal
from coordest.estimators import (
    HT,
    LSTAR,
    USTAR,
    EstimatorError,
    VOptOracle,
    estimate,
    ht_estimate,
    ht_may_be_inapplicable,
    lstar_estimate,
    ustar_estimate,
    ustar_profile,
)
from coordest.functions import CustomLowerBound, RgP, RgPPlus, TightFamily
from coordest.sampling import ThresholdScheme, sample_vector

PPS2 = ThresholdScheme.pps([1.0, 1.0])
PPS1 = ThresholdScheme.pps([1.0])


def est(kind, f, v, u, scheme=PPS2):
    return estimate(kind, f, sample_vector(v, u, scheme))


def test_lstar_example_values():
    f = RgPPlus(1)
    for u in (0.21, 0.3, 0.4, 0.6):
        assert est(LSTAR, f, (0.6, 0.2), u) == pytest.approx(math.log(0.6 / u), abs=1e-12)
    for u in (0.01, 0.1, 0.2):
        assert est(LSTAR, f, (0.6, 0.2), u) == pytest.approx(math.log(3), abs=1e-12)
    assert est(LSTAR, f, (0.6, 0.2), 0.7) == 0.0


@pytest.mark.parametrize("p", [0.0, 0.1, 0.25, 0.4])
def test_lstar_tight_family(p):
    for x in (0.05, 0.3, 0.8):
        want = math.log(1 / x) if p == 0 else (x ** -p - 1) / p
        assert est(LSTAR, TightFamily(p), (0.0,), x, PPS1) == pytest.approx(want, rel=1e-10)


def test_ustar_example_values():
    f = RgPPlus(1)
    for u in (0.25, 0.4, 0.6):
        assert est(USTAR, f, (0.6, 0.2), u) == pytest.approx(1.0)
    for u in (0.05, 0.2):
        assert est(USTAR, f, (0.6, 0.2), u) == pytest.approx(0.0, abs=1e-12)
    assert est(USTAR, f, (0.6, 0.2), 0.7) == 0.0
    # with v2 = 0 the witness is the data itself, so U* is v-optimal
    assert est(USTAR, f, (0.6, 0.0), 0.3) == pytest.approx(1.0)


def test_ustar_closed_form_at_p2():
    """For v2 = 0 and p = 2, U* follows the hull of (v1-u)^2, i.e. 2(v1-u) on (0, v1]."""
    f = RgPPlus(2)
    for u in (0.1, 0.3, 0.5):
        assert est(USTAR, f, (0.6, 0.0), u) == pytest.approx(2 * (0.6 - u), rel=1e-9)


def test_ht_example_values():
    f = RgPPlus(1)
    assert est(HT, f, (0.6, 0.2), 0.1) == pytest.approx(2.0)
    assert est(HT, f, (0.6, 0.2), 0.3) == 0.0
    o = sample_vector((0.6, 0.3), 0.5, ThresholdScheme.full(2))
    assert ht_estimate(f, None, o) == pytest.approx(0.3)


def test_ht_zero_probability_is_flagged():
    f = RgPPlus(1)
    o = sample_vector((0.6, 0.0), 0.3, PPS2)
    assert ht_may_be_inapplicable(f, o)
    assert est(HT, f, (0.6, 0.0), 0.3) == 0.0


def test_estimates_are_zero_on_zero_consistent_outcomes():
    f = RgPPlus(1)
    for kind in (LSTAR, USTAR, HT):
        assert est(kind, f, (0.3, 0.2), 0.5) == 0.0


def test_voptimal_oracle_requires_consistency():
    o = sample_vector((0.6, 0.2), 0.3, PPS2)
    assert estimate(VOptOracle((0.6, 0.2)), RgPPlus(1), o) == pytest.approx(2 / 3)
    with pytest.raises(EstimatorError):
        estimate(VOptOracle((0.1, 0.2)), RgPPlus(1), o)


def test_unknown_estimator_rejected():
    with pytest.raises(EstimatorError):
        est("nope", RgPPlus(1), (0.6, 0.2), 0.3)


def _custom_rgplus():
    """RgPPlus(1) expressed only through the lower-bound and witness oracles."""

    def lb(o):
        if 0 not in o.sampled:
            return 0.0
        # an unsampled v2 can come arbitrarily close to its bound
        v2 = o.sampled[1] if 1 in o.sampled else o.bounds[1]
        return max(0.0, o.sampled[0] - v2)

    return CustomLowerBound(
        value_fn=lambda v: max(0.0, v[0] - v[1]),
        lower_bound_fn=lb,
        witness_fn=lambda o: o.representative(),
        label="custom-rg1plus",
    )


def test_custom_lower_bound_matches_closed_forms():
    f = _custom_rgplus()
    for v, u in [((0.6, 0.2), 0.4), ((0.6, 0.2), 0.1), ((0.8, 0.0), 0.3), ((0.5, 0.1), 0.05)]:
        assert est(LSTAR, f, v, u) == pytest.approx(est(LSTAR, RgPPlus(1), v, u), abs=1e-6)
        assert est(USTAR, f, v, u) == pytest.approx(est(USTAR, RgPPlus(1), v, u), abs=1e-4)


vec2 = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
powers = st.sampled_from([0.5, 1.0, 2.0])


@settings(max_examples=80, deadline=None)
@given(vec2, powers, st.floats(1e-4, 1.0), st.floats(1e-4, 1.0))
def test_lstar_monotone_in_seed(v, p, u1, u2):
    f = RgPPlus(p)
    lo, hi = min(u1, u2), max(u1, u2)
    assert est(LSTAR, f, v, lo) >= est(LSTAR, f, v, hi) - 1e-12


@settings(max_examples=60, deadline=None)
@given(vec2, powers)
def test_lstar_and_ustar_unbiased(v, p):
    f = RgPPlus(p)
    e1, _ = curve_from_data(f, PPS2, v).lstar_moments()
    assert e1 == pytest.approx(f.value(v), abs=1e-7)
    pieces = ustar_profile(f, PPS2, v)
    assert sum(pc.y_lo - pc.y_hi for pc in pieces) == pytest.approx(f.value(v), abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(vec2, powers, st.floats(1e-3, 1.0))
def test_estimate_agrees_between_outcome_and_data(v, p, u):
    """The estimate depends on the outcome only: any consistent data gives the same value."""
    f = RgPPlus(p)
    o = sample_vector(v, u, PPS2)
    twin = sample_vector(o.representative(), u, PPS2)
    for kind in (LSTAR, USTAR):
        assert estimate(kind, f, o) == pytest.approx(estimate(kind, f, twin), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0)), st.floats(1e-3, 1.0))
def test_rg_on_three_entries_nonnegative(v, u):
    f = RgP(1)
    val = est(LSTAR, f, v, u, ThresholdScheme.pps([1.0, 1.0, 1.0]))
    assert val >= 0.0 and math.isfinite(val)


@settings(max_examples=30, deadline=None)
@given(vec2, st.floats(0.01, 1.0), st.floats(0.0, 1.0))
def test_vectorized_chord_matches_general_hull_code(v, u, frac):
    from coordest.curves import lambda_value
    from coordest.estimators import _chord_fn

    c = curve_from_data(_custom_rgplus(), PPS2, v)
    M = frac * c(u)
    assert _chord_fn(c)(u, M) == pytest.approx(lambda_value(c, u, M), rel=1e-9, abs=1e-9)
