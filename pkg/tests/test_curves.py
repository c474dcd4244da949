import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from coordest.curves import (
    curve_from_data,
    curve_suffix_from_outcome,
    existence_checks,
    lambda_bounds,
    lambda_value,
    lower_hull,
    v_optimal,
)
from coordest.functions import RgP, RgPPlus, TightFamily
from coordest.sampling import ThresholdScheme, sample_matrix, sample_vector

from conftest import EXAMPLE_MATRIX, EXAMPLE_SEEDS

PPS2 = ThresholdScheme.pps([1.0, 1.0])
PPS1 = ThresholdScheme.pps([1.0])
M_AT_04 = 0.6 * (1 / 3 + (2 / 3) * math.log(2 / 3))  # integral of L* for (0.6, 0.2) over (0.4, 1]


def test_lower_bound_curve_values():
    c = curve_from_data(RgPPlus(1), PPS2, (0.6, 0.2))
    assert c(0.4) == pytest.approx(0.2)
    assert c(0.1) == pytest.approx(0.4)
    assert c(0.7) == pytest.approx(0.0)
    assert c.limit_at_zero() == pytest.approx(0.4)


@pytest.mark.parametrize("p", [0.0, 0.25, 0.4])
def test_tight_family_curve(p):
    c = curve_from_data(TightFamily(p), PPS1, (0.0,))
    for u in (0.01, 0.3, 0.9):
        assert c(u) == pytest.approx((1 - u ** (1 - p)) / (1 - p))


def test_zero_function_gives_zero_curve():
    assert curve_from_data(RgPPlus(1), PPS2, (0.3, 0.5)).is_zero()
    assert curve_from_data(RgP(2), PPS2, (0.4, 0.4)).is_zero()


def test_suffix_curve_from_outcome():
    o = sample_vector((0.6, 0.2), 0.4, PPS2)
    c = curve_suffix_from_outcome(RgPPlus(1), o)
    assert c(0.5) == pytest.approx(0.1)
    assert c(0.4) == pytest.approx(0.2)
    assert c(0.8) == pytest.approx(0.0)
    none = sample_vector((0.3, 0.2), 0.9, PPS2)
    assert curve_suffix_from_outcome(RgPPlus(1), none).is_zero()


def test_suffix_curve_with_swapped_roles():
    ss = sample_matrix(EXAMPLE_MATRIX, ThresholdScheme.pps([1, 1, 1]), seeds=EXAMPLE_SEEDS).by_key()
    o = ss["d"].outcome.project([1, 0])
    c = curve_suffix_from_outcome(RgPPlus(1), o)
    assert c(0.23) == pytest.approx(0.1)


def test_hull_of_concave_then_zero_curve():
    h = lower_hull(curve_from_data(RgPPlus(1), PPS2, (0.6, 0.2)))
    assert h.value(0.3) == pytest.approx(0.4 - 0.3 * 2 / 3)
    assert h.estimate(0.3) == pytest.approx(2 / 3)
    assert h.estimate(0.8) == pytest.approx(0.0)
    assert h.limit_at_zero() == pytest.approx(0.4)


def test_hull_of_convex_curve_is_the_curve():
    c = curve_from_data(TightFamily(0.25), PPS1, (0.0,))
    h = lower_hull(c)
    for u in (0.001, 0.1, 0.5, 0.99):
        assert h.value(u) == pytest.approx(c(u), abs=1e-12)


def test_hull_of_step_curve():
    s = ThresholdScheme.step([Fraction(1, 4), Fraction(1, 2)], [1, 2], r=2)
    h = lower_hull(curve_from_data(RgPPlus(1), s, (2, 0)))
    assert h.value(0.25) == pytest.approx(1.0)
    assert h.estimate(0.3) == pytest.approx(4.0)
    assert h.estimate(0.6) == pytest.approx(0.0)


def test_v_optimal_estimates():
    tight = v_optimal(TightFamily(0.25), PPS1, (0.0,))
    for u in (0.01, 0.2, 0.7):
        assert tight.estimate(u) == pytest.approx(u ** -0.25)
    h = v_optimal(RgPPlus(1), PPS2, (0.6, 0.0))
    assert h.estimate(0.3) == pytest.approx(1.0)
    assert h.estimate(0.7) == pytest.approx(0.0)


def test_lambda_at_zero_witness():
    c = curve_from_data(RgPPlus(1), PPS2, (0.6, 0.0))
    assert lambda_value(c, 0.4, M_AT_04) == pytest.approx(1.4054651081, abs=1e-8)
    # tangent slope for a convex curve anchored on its own hull
    t = curve_from_data(TightFamily(0.3), PPS1, (0.0,))
    h = lower_hull(t)
    assert lambda_value(t, 0.2, h.value(0.2)) == pytest.approx(0.2 ** -0.3, rel=1e-7)


def test_optimal_range_bounds():
    o = sample_vector((0.6, 0.2), 0.4, PPS2)
    rng = lambda_bounds(RgPPlus(1), o, M_AT_04)
    assert rng.lambda_L == pytest.approx(0.4054651081, abs=1e-8)
    assert rng.lambda_U == pytest.approx(1.4054651081, abs=1e-8)
    assert rng.contains(1.0) and not rng.contains(0.3)
    zero = lambda_bounds(RgPPlus(1), sample_vector((0.6, 0.2), 0.9, PPS2), 0.0)
    assert zero.lambda_L == 0.0


def test_full_outcome_has_degenerate_range():
    s = ThresholdScheme.full(2)
    o = sample_vector((0.6, 0.2), 0.5, s)
    rng = lambda_bounds(RgPPlus(1), o, 0.1)
    assert rng.lambda_L == pytest.approx(rng.lambda_U)


def test_existence_checks():
    assert existence_checks(RgPPlus(1), PPS2, (0.6, 0.0)) == {"estimable": True, "finite_variance": True, "bounded": True}
    assert existence_checks(RgPPlus(1), PPS2, (0.6, 0.2)) == {"estimable": True, "finite_variance": True, "bounded": True}
    assert existence_checks(TightFamily(0.25), PPS1, (0.0,)) == {"estimable": True, "finite_variance": True, "bounded": False}


def test_lstar_closed_form_values():
    c = curve_from_data(RgPPlus(1), PPS2, (0.6, 0.2))
    for u in (0.25, 0.4, 0.55):
        assert c.lstar(u) == pytest.approx(math.log(0.6 / u), abs=1e-12)
    assert c.lstar(0.1) == pytest.approx(math.log(3), abs=1e-12)
    assert c.lstar(0.8) == 0.0


def _grid_minorant(us, ys):
    """Lower convex hull of points sorted by u, evaluated back on the grid."""
    hull = []
    for pt in zip(us, ys):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    hx, hy = zip(*hull)
    return np.interp(us, hx, hy)


vec = st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0))


@settings(max_examples=40, deadline=None)
@given(vec, st.sampled_from([0.5, 1.0, 2.0]))
def test_hull_matches_grid_minorant(v, p):
    c = curve_from_data(RgPPlus(p), PPS2, v)
    h = lower_hull(c)
    us = np.linspace(1e-4, 1.0, 4001)
    ys = np.array([c(float(u)) for u in us])
    # the anchor at (1, 0) sits on the curve because no entry is sampled at u=1 unless v=1
    oracle = _grid_minorant(np.r_[us, 1.0], np.r_[ys, 0.0])[:-1]
    got = np.array([h.value(float(u)) for u in us])
    assert np.all(got <= ys + 1e-9)
    assert np.max(np.abs(got - oracle)[us > 0.01]) < 5e-3


@settings(max_examples=60, deadline=None)
@given(vec, st.floats(0.01, 1.0), st.sampled_from([0.5, 1.0, 2.0, 3.0]))
def test_lstar_satisfies_lower_end_equation(v, u, p):
    """L*(u) = LB(u)/u - int_u^1 LB(x)/x^2 dx."""
    c = curve_from_data(RgPPlus(p), PPS2, v)
    cuts = sorted({u, 1.0} | {x for x in (v[0], v[1]) if u < x < 1})
    tail = sum(integrate.quad(lambda x: c(x) / x**2, a, b, epsabs=1e-13)[0] for a, b in zip(cuts, cuts[1:]))
    assert c.lstar(u) == pytest.approx(c(u) / u - tail, abs=1e-8)
