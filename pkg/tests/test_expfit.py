import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bernstein_lab.errors import InsufficientPoints, NonpositiveQuotient
from bernstein_lab.expfit import compare_fit, fit_exponent, fit_report, theoretical_exponent
from bernstein_lab.quotient import QuotientEstimate


def power_law(c, mu, ks=range(2, 11)):
    return [(k, c * k ** mu) for k in ks]


def test_fit_examples():
    assert fit_exponent(power_law(3, 2)).slope == pytest.approx(2.0, abs=1e-9)
    assert fit_exponent(power_law(1, 1)).slope == pytest.approx(1.0, abs=1e-9)


def test_fit_accepts_estimates_and_floor():
    est = [QuotientEstimate(k, 1.0, 2.0 * k ** 1.5, "gram_l2", 512, 64, "c") for k in range(1, 9)]
    fit = fit_exponent(est)
    assert fit.k_range == (2, 8) and fit.points_used == 7
    assert fit.slope == pytest.approx(1.5, abs=1e-9)


def test_fit_errors():
    with pytest.raises(InsufficientPoints):
        fit_exponent(power_law(1, 2, range(2, 5)))
    with pytest.raises(NonpositiveQuotient):
        fit_exponent([(2, 1.0), (3, 0.0), (4, 2.0), (5, 3.0)])
    with pytest.raises(ValueError):
        fit_exponent([(2, 1.0), (2, 2.0), (4, 2.0), (5, 3.0)])


@given(st.floats(0.01, 100), st.floats(0.5, 4), st.floats(0.01, 100))
def test_constant_factor_only_moves_intercept(c, mu, scale):
    a = fit_exponent(power_law(c, mu))
    b = fit_exponent(power_law(c * scale, mu))
    assert abs(a.slope - b.slope) < 1e-9
    assert a.slope == pytest.approx(mu, abs=1e-9)


@given(st.floats(0.01, 100), st.floats(0.5, 4))
def test_dropping_smallest_k(c, mu):
    a = fit_exponent(power_law(c, mu, range(2, 12)))
    b = fit_exponent(power_law(c, mu, range(3, 12)))
    assert abs(a.slope - b.slope) < 1e-9


def test_theory_examples():
    t = theoretical_exponent("exp_curve", 3)
    assert (t.exponent, t.is_optimal) == (4.0, True)
    t = theoretical_exponent("chain", 2)
    assert (t.exponent, t.is_optimal, t.bound) == (4.0, False, "upper")
    assert theoretical_exponent("product", [2, 4]).exponent == 4.0
    assert theoretical_exponent("algebraic").exponent == 1.0
    assert theoretical_exponent("classC_finite_order").exponent == 2.0
    assert theoretical_exponent("lower_bound", 1).exponent == 2.0
    assert theoretical_exponent("lower_bound", 2).exponent == 1.5
    for bad in (("exp_curve", 0), ("lower_bound", 0), ("nonsense", None)):
        with pytest.raises(ValueError):
            theoretical_exponent(*bad)


def _fit_with_slope(s):
    return fit_exponent(power_law(1, s))


def test_compare_examples():
    assert compare_fit(_fit_with_slope(1.95), theoretical_exponent("exp_curve", 1), 0.4)["verdict"] == "consistent"
    assert compare_fit(_fit_with_slope(0.7), theoretical_exponent("lower_bound", 1), 0.4)["verdict"] == "below_lower_bound"
    assert compare_fit(_fit_with_slope(1.02), theoretical_exponent("algebraic"), 0.1)["verdict"] == "consistent"
    assert compare_fit(_fit_with_slope(5.0), theoretical_exponent("chain", 2), 0.4)["verdict"] == "above_upper"
    with pytest.raises(ValueError):
        compare_fit(_fit_with_slope(1.0), theoretical_exponent("algebraic"), 0)


def test_fit_report_json():
    doc = json.loads(fit_report(_fit_with_slope(2.0), theoretical_exponent("exp_curve", 1), "exp", 1.0))
    assert set(doc) == {"curve", "r", "k_range", "slope", "stderr", "theory", "verdict"}
    assert doc["verdict"] == "consistent"
