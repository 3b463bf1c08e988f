import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st
from mpmath import mpc, mpf

from bernstein_lab.errors import TailNotConverged
from bernstein_lab.numerics import (
    LogComplex,
    TaylorSeries,
    log_sum_exp_complex,
    series_derivative,
    series_eval,
    series_exp,
    series_multiply,
)

PREC = 256


def exp_series(J=200, prec=PREC):
    with mpmath.workprec(prec):
        return TaylorSeries.from_log_mags([-mpmath.loggamma(j + 1) for j in range(J + 1)], prec)


def values(s):
    return [complex(c) for c in s.mpc_coeffs]


# ---------------------------------------------------------------- LogComplex


def test_phase_normalized_and_zero_canonical():
    with mpmath.workprec(PREC):
        z = LogComplex(mpf(0), 3 * mpmath.pi)
        assert -mpmath.pi < z.phase <= mpmath.pi
        assert abs(z.phase - mpmath.pi) < mpf(2) ** -200
        zero = LogComplex(mpf("-inf"), 1.0)
        assert zero.is_zero and zero.phase == 0


def test_lse_cancellation_to_zero():
    with mpmath.workprec(PREC):
        out = log_sum_exp_complex([LogComplex(mpf(0), mpf(0)), LogComplex(mpf(0), mpmath.pi)])
        assert out.is_zero


def test_lse_one_plus_one():
    with mpmath.workprec(PREC):
        out = log_sum_exp_complex([LogComplex.one(), LogComplex.one()])
        assert abs(out.log_mag - mpmath.log(2)) < mpf(2) ** -240
        assert out.phase == 0


def test_lse_tiny_addend_against_256_bit_reference():
    with mpmath.workprec(PREC):
        out = log_sum_exp_complex([LogComplex(mpf(-100), 0), LogComplex.one()])
        ref = mpmath.log1p(mpmath.exp(-100))
        assert abs(out.log_mag - ref) <= mpf(2) ** -(PREC - 8) * abs(ref) + mpf(2) ** -(PREC - 8)


def test_lse_huge_magnitudes_do_not_overflow():
    with mpmath.workprec(PREC):
        big = LogComplex(mpf(10) ** 6, 0)
        out = log_sum_exp_complex([big, big])
        assert abs(out.log_mag - (mpf(10) ** 6 + mpmath.log(2))) < mpf(2) ** -200


log_mag = st.floats(min_value=-60, max_value=60, allow_nan=False)
phase = st.floats(min_value=-3.1, max_value=3.1, allow_nan=False)
terms_strategy = st.lists(st.tuples(log_mag, phase), min_size=1, max_size=25)


@given(terms_strategy, st.randoms(use_true_random=False))
def test_lse_permutation_invariant(terms, rnd):
    with mpmath.workprec(PREC):
        ts = [LogComplex(mpf(a), mpf(b)) for a, b in terms]
        perm = ts[:]
        rnd.shuffle(perm)
        a, b = log_sum_exp_complex(ts), log_sum_exp_complex(perm)
        assert a.is_zero == b.is_zero
        if not a.is_zero:
            assert abs(a.log_mag - b.log_mag) <= mpf(2) ** -(PREC - 8) * max(1, abs(a.log_mag))


@given(terms_strategy)
def test_lse_matches_direct_sum(terms):
    with mpmath.workprec(PREC):
        ts = [LogComplex(mpf(a), mpf(b)) for a, b in terms]
        direct = mpmath.fsum(t.to_mpc() for t in ts)
        out = log_sum_exp_complex(ts).to_mpc()
        scale = max(abs(t.to_mpc()) for t in ts)
        assert abs(out - direct) <= mpf(2) ** -(PREC - 16) * scale


# ---------------------------------------------------------------- series_eval


def test_eval_exp_at_one():
    with mpmath.workprec(PREC):
        v = series_eval(exp_series(), LogComplex.one())
        assert abs(v.log_mag - 1) < mpf(2) ** -60


def test_eval_constant():
    s = TaylorSeries.from_values([1], PREC)
    with mpmath.workprec(PREC):
        v = series_eval(s, LogComplex.from_complex(mpc(3, 4)))
    assert v.log_mag == 0 and v.phase == 0


def test_eval_exp_at_5i_trig_oracle():
    with mpmath.workprec(PREC):
        v = series_eval(exp_series(), LogComplex.from_complex(mpc(0, 5)))
        assert abs(v.log_mag) < mpf(2) ** -50
        assert abs(v.phase - (5 - 2 * mpmath.pi)) < mpf(2) ** -50
        assert abs(v.phase - mpmath.atan2(mpmath.sin(5), mpmath.cos(5))) < mpf(2) ** -50


def test_eval_raises_when_series_too_short():
    with pytest.raises(TailNotConverged):
        with mpmath.workprec(PREC):
            series_eval(exp_series(J=20), LogComplex(mpmath.log(30), 0))


@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False), min_size=1,
                max_size=12))
def test_eval_at_zero_is_c0(vals):
    s = TaylorSeries.from_values(vals, PREC)
    with mpmath.workprec(PREC):
        v = series_eval(s, LogComplex.zero())
        c0 = s.coeffs[0]
        assert v.is_zero == c0.is_zero
        if not c0.is_zero:
            assert v.log_mag == c0.log_mag and v.phase == c0.phase


@given(st.floats(min_value=0, max_value=3), st.floats(min_value=-math.pi, max_value=math.pi))
def test_derivative_round_trip_exp(radius, theta):
    s = exp_series(J=120)
    ds = series_derivative(s)
    with mpmath.workprec(PREC):
        z = LogComplex.polar(mpf(radius), mpf(theta))
        a, b = series_eval(s, z, 64).to_mpc(), series_eval(ds, z, 64).to_mpc()
        assert abs(a - b) <= mpf(2) ** -(64 - 4) * abs(a)


# ---------------------------------------------------------------- series algebra


def test_derivative_examples():
    assert values(series_derivative(TaylorSeries.from_values([1, 1, 1], PREC))) == [1, 2]
    with mpmath.workprec(PREC):
        s = TaylorSeries.from_log_mags([-(j * j) for j in range(8)], PREC)
        d = series_derivative(s)
        assert abs(d.coeffs[3].log_mag - (mpmath.log(4) - 16)) < mpf(2) ** -200


def test_derivative_of_exp_is_exp():
    s = exp_series(J=30)
    d = series_derivative(s)
    assert d.J == s.J - 1
    with mpmath.workprec(PREC):
        for a, b in zip(d.coeffs, s.coeffs):
            assert abs(a.log_mag - b.log_mag) < mpf(2) ** -200


def test_multiply_examples():
    out = series_multiply(TaylorSeries.from_values([1, 1], PREC), TaylorSeries.from_values([1, -1], PREC), 2)
    assert [round(abs(v), 12) for v in values(out)] == [1, 0, 1]
    assert values(out)[2].real == pytest.approx(-1)
    e2 = series_multiply(exp_series(30), exp_series(30), 10)
    with mpmath.workprec(PREC):
        for j, c in enumerate(e2.coeffs):
            ref = j * mpmath.log(2) - mpmath.loggamma(j + 1)
            assert abs(c.log_mag - ref) < mpf(2) ** -200
    a = TaylorSeries.from_values([3, -1, 2j, 5], PREC)
    assert values(series_multiply(a, TaylorSeries.from_values([1], PREC), 2)) == values(a)[:3]


series_vals = st.lists(st.complex_numbers(max_magnitude=100, allow_nan=False, allow_infinity=False,
                                          allow_subnormal=False), min_size=1, max_size=8)


def _close(x, y, tol):
    for a, b in zip(x.mpc_coeffs, y.mpc_coeffs):
        assert abs(a - b) <= tol * max(abs(a), abs(b), mpf(1))


@given(series_vals, series_vals)
def test_multiply_commutative(u, v):
    a, b = TaylorSeries.from_values(u, PREC), TaylorSeries.from_values(v, PREC)
    with mpmath.workprec(PREC):
        _close(series_multiply(a, b, 10), series_multiply(b, a, 10), mpf(2) ** -(PREC - 8))


@given(series_vals, series_vals, series_vals)
def test_multiply_associative(u, v, w):
    a, b, c = (TaylorSeries.from_values(x, PREC) for x in (u, v, w))
    with mpmath.workprec(PREC):
        left = series_multiply(series_multiply(a, b, 10), c, 10)
        right = series_multiply(a, series_multiply(b, c, 10), 10)
        scale = mpf(10) ** 6  # sums of products of size 100^3 bound the cancellation
        _close(left, right, mpf(2) ** -(PREC - 8) * scale)


def test_series_exp_examples():
    e = series_exp(TaylorSeries.from_values([0, 1], PREC), 5)
    assert values(e) == pytest.approx([1 / math.factorial(j) for j in range(6)])
    assert values(series_exp(TaylorSeries.from_values([0], PREC), 0)) == [1]
    g = series_exp(TaylorSeries.from_values([0, 0, 1], PREC), 6)
    assert values(g) == pytest.approx([1, 0, 1, 0, 0.5, 0, 1 / 6], abs=1e-30)


def test_series_exp_matches_bell_numbers():
    # e^{e^z} = e * sum B_j z^j / j!
    with mpmath.workprec(PREC):
        inner = TaylorSeries.from_log_mags([-mpmath.loggamma(j + 1) for j in range(41)], PREC)
        out = series_exp(inner, 40)
        for j in (0, 5, 17, 40):
            ref = mpmath.e * mpmath.bell(j) / mpmath.factorial(j)
            assert abs(out.coeffs[j].to_mpc() - ref) < mpf(2) ** -(PREC - 24) * ref


def test_series_exp_complex_inner_against_mpmath_taylor():
    a = TaylorSeries.from_values([0.5j, 1 - 1j, 0.25], PREC)
    out = series_exp(a, 8)
    with mpmath.workprec(PREC):
        ref = mpmath.taylor(lambda z: mpmath.exp(0.5j + (1 - 1j) * z + 0.25 * z * z), 0, 8)
        for c, r in zip(out.mpc_coeffs, ref):
            assert abs(c - r) < mpf(10) ** -40
