"""Log-space complex arithmetic and truncated power series.

Every complex quantity in the lab is carried as a pair (log-modulus, phase)
so that values such as exp(10**6) or coefficients like exp(-j**1.5) for
large j stay representable.  Arithmetic is delegated to mpmath, whose
floats already have unbounded exponents; the log form is what we store and
compare.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import mpmath
from flint import acb, acb_poly, arb, ctx
from mpmath import mpc, mpf

from .errors import TailNotConverged

DEFAULT_PRECISION = 512
MAX_PRECISION = 8192
NEG_INF = mpmath.ninf
LN2 = math.log(2.0)

# number of trailing nonzero terms inspected by the tail test
TAIL_WINDOW = 10


def _normalize_phase(phase):
    pi = mpmath.pi
    if -pi < phase <= pi:
        return phase
    turns = mpmath.ceil((phase - pi) / (2 * pi))
    phase = phase - 2 * pi * turns
    # guard against rounding pushing us just outside the interval; a value
    # within rounding of -pi is the boundary point pi
    if phase <= -pi + mpmath.ldexp(pi, 4 - mpmath.mp.prec):
        return +pi
    if phase > pi:
        phase -= 2 * pi
    return phase


@dataclass(frozen=True)
class LogComplex:
    """A complex number stored as (ln|z|, arg z) with arg in (-pi, pi]."""

    log_mag: mpf
    phase: mpf = field(default_factory=lambda: mpf(0))

    def __post_init__(self):
        lm = mpf(self.log_mag)
        if mpmath.isinf(lm) and lm < 0:
            object.__setattr__(self, "log_mag", NEG_INF)
            object.__setattr__(self, "phase", mpf(0))
            return
        if mpmath.isnan(lm) or mpmath.isinf(lm):
            raise ValueError(f"log_mag must be finite or -inf, got {lm}")
        object.__setattr__(self, "log_mag", lm)
        object.__setattr__(self, "phase", _normalize_phase(mpf(self.phase)))

    @classmethod
    def zero(cls) -> "LogComplex":
        return cls(NEG_INF, mpf(0))

    @classmethod
    def one(cls) -> "LogComplex":
        return cls(mpf(0), mpf(0))

    @classmethod
    def from_complex(cls, z) -> "LogComplex":
        z = mpmath.mpmathify(z)
        if z == 0:
            return cls.zero()
        return cls(mpmath.log(abs(z)), mpmath.arg(z))

    @classmethod
    def polar(cls, r, theta=0) -> "LogComplex":
        """The number r*exp(i*theta) for r >= 0."""
        r = mpf(r)
        if r == 0:
            return cls.zero()
        if r < 0:
            raise ValueError("radius must be nonnegative")
        return cls(mpmath.log(r), mpf(theta))

    @property
    def is_zero(self) -> bool:
        return self.log_mag == NEG_INF

    def to_mpc(self) -> mpc:
        if self.is_zero:
            return mpc(0)
        return mpmath.exp(mpc(self.log_mag, self.phase))

    def __complex__(self) -> complex:
        return complex(self.to_mpc())

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        if self.is_zero or other.is_zero:
            return LogComplex.zero()
        return LogComplex(self.log_mag + other.log_mag, self.phase + other.phase)

    def __truediv__(self, other: "LogComplex") -> "LogComplex":
        if other.is_zero:
            raise ZeroDivisionError("division by LogComplex zero")
        if self.is_zero:
            return LogComplex.zero()
        return LogComplex(self.log_mag - other.log_mag, self.phase - other.phase)

    def __pow__(self, n: int) -> "LogComplex":
        if n == 0:
            return LogComplex.one()
        if self.is_zero:
            return LogComplex.zero()
        return LogComplex(self.log_mag * n, self.phase * n)

    def scale(self, log_factor) -> "LogComplex":
        """Multiply by the positive real exp(log_factor)."""
        if self.is_zero:
            return self
        return LogComplex(self.log_mag + log_factor, self.phase)

    def conjugate(self) -> "LogComplex":
        return LogComplex(self.log_mag, -self.phase)

    def negate(self) -> "LogComplex":
        return LogComplex(self.log_mag, self.phase + mpmath.pi)

    def __repr__(self) -> str:
        return f"LogComplex({mpmath.nstr(self.log_mag, 15)}, {mpmath.nstr(self.phase, 15)})"


def log_sum_exp_complex(terms: Sequence[LogComplex]) -> LogComplex:
    """Sum of the represented complex numbers, scaled by the largest modulus.

    The result is rounded to the ambient mpmath precision.  A sum that
    cancels below the working resolution relative to the largest term is
    returned as exact zero.
    """
    if not terms:
        raise ValueError("log_sum_exp_complex needs at least one term")
    prec = mpmath.mp.prec
    live = [t for t in terms if not t.is_zero]
    if not live:
        return LogComplex.zero()
    with mpmath.workprec(prec + 16):
        top = max(t.log_mag for t in live)
        acc = mpc(0)
        for t in live:
            acc += mpmath.exp(mpc(t.log_mag - top, t.phase))
        size = abs(acc)
        if size <= len(live) * mpmath.ldexp(1, -prec):
            return LogComplex.zero()
        lm = top + mpmath.log(size)
        ph = mpmath.arg(acc)
    return LogComplex(+lm, +ph)


@dataclass(frozen=True)
class TaylorSeries:
    """Coefficients c_0..c_J of a power series at the origin.

    ``exact`` marks a series whose stored coefficients are the whole
    function (a polynomial); such series skip the tail test.
    """

    coeffs: tuple
    precision_bits: int = DEFAULT_PRECISION
    exact: bool = False
    origin: int = 0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))
        if not self.coeffs:
            raise ValueError("a series needs at least one coefficient")
        if self.precision_bits < 64:
            raise ValueError("precision_bits must be at least 64")
        if self.origin != 0:
            raise ValueError("only expansions at the origin are supported")

    @classmethod
    def from_values(cls, values: Iterable, precision_bits: int = DEFAULT_PRECISION,
                    exact: bool = True) -> "TaylorSeries":
        with mpmath.workprec(precision_bits):
            coeffs = [LogComplex.from_complex(v) for v in values]
        return cls(tuple(coeffs), precision_bits, exact)

    @classmethod
    def from_log_mags(cls, log_mags: Iterable, precision_bits: int = DEFAULT_PRECISION,
                      exact: bool = False) -> "TaylorSeries":
        """Series with real nonnegative coefficients exp(log_mags[j])."""
        with mpmath.workprec(precision_bits):
            coeffs = [LogComplex(mpf(v), 0) for v in log_mags]
        return cls(tuple(coeffs), precision_bits, exact)

    @property
    def J(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, j: int) -> LogComplex:
        return self.coeffs[j]

    @cached_property
    def mpc_coeffs(self) -> tuple:
        with mpmath.workprec(self.precision_bits + 16):
            return tuple(c.to_mpc() for c in self.coeffs)

    @cached_property
    def float_log_mags(self) -> tuple:
        return tuple(float(c.log_mag) for c in self.coeffs)

    @cached_property
    def is_real_nonnegative(self) -> bool:
        return all(c.is_zero or c.phase == 0 for c in self.coeffs)

    @cached_property
    def is_real(self) -> bool:
        pi = mpmath.pi
        with mpmath.workprec(self.precision_bits):
            return all(c.is_zero or c.phase == 0 or abs(c.phase - pi) < mpmath.ldexp(1, -self.precision_bits + 8)
                       for c in self.coeffs)

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.coeffs)

    def leading_index(self):
        """Index of the first nonzero coefficient, or None."""
        for j, c in enumerate(self.coeffs):
            if not c.is_zero:
                return j
        return None

    def truncate(self, J: int) -> "TaylorSeries":
        if J >= self.J:
            return self
        return TaylorSeries(self.coeffs[: J + 1], self.precision_bits, False)

    def to_complex_list(self) -> list:
        return [complex(c) for c in self.mpc_coeffs]


def check_tail(s: TaylorSeries, log_radius: float, guard_bits: int) -> None:
    """Raise TailNotConverged unless the stored terms decay geometrically at |z|.

    The last TAIL_WINDOW nonzero terms must shrink by at least a factor 2 per
    index step and the geometric bound on the neglected tail must sit below
    2**-guard_bits times the largest term.
    """
    if s.exact:
        return
    lm = s.float_log_mags
    nz = [j for j, v in enumerate(lm) if v != -math.inf]
    if len(nz) <= 1:
        if nz and nz[-1] == s.J:
            raise TailNotConverged("single nonzero coefficient at the truncation edge")
        return
    window = nz[-(TAIL_WINDOW + 1):] if len(nz) > TAIL_WINDOW else nz
    terms = [lm[j] + j * log_radius for j in window]
    worst = -math.inf
    for (j0, t0), (j1, t1) in zip(zip(window, terms), zip(window[1:], terms[1:])):
        worst = max(worst, (t1 - t0) / (j1 - j0))
    if worst > -LN2:
        raise TailNotConverged(
            f"terms decay by only exp({worst:.3g}) per index at log|z|={log_radius:.4g}; J={s.J}")
    top = max(v + j * log_radius for j, v in enumerate(lm) if v != -math.inf)
    last = terms[-1]
    # tail after the last stored term, starting one index further
    tail = last + worst - math.log1p(-math.exp(worst))
    if tail > top - guard_bits * LN2:
        raise TailNotConverged(
            f"geometric tail bound exp({tail:.4g}) exceeds 2^-{guard_bits} of max term exp({top:.4g})")


def series_eval(s: TaylorSeries, z: LogComplex, guard_bits: int = 64) -> LogComplex:
    """Sum of c_j z^j over the stored coefficients.

    Uses Horner's scheme in mpmath at a precision covering both the series
    and the requested guard bits; the log-sum-exp primitive is the reference
    it is tested against.
    """
    if guard_bits < 32:
        raise ValueError("guard_bits must be at least 32")
    if z.is_zero:
        return s.coeffs[0]
    check_tail(s, float(z.log_mag), guard_bits)
    work = max(s.precision_bits, guard_bits + 32) + 16
    coeffs = s.mpc_coeffs
    with mpmath.workprec(work):
        if z.phase == 0 and s.is_real:
            x = mpmath.exp(z.log_mag)
            acc = mpf(0)
            for c in reversed(coeffs):
                acc = acc * x + c.real
        else:
            w = z.to_mpc()
            acc = mpc(0)
            for c in reversed(coeffs):
                acc = acc * w + c
    with mpmath.workprec(s.precision_bits):
        return LogComplex.from_complex(acc)


def series_derivative(s: TaylorSeries) -> TaylorSeries:
    with mpmath.workprec(s.precision_bits):
        out = [c.scale(mpmath.log(j)) for j, c in enumerate(s.coeffs) if j >= 1]
    if not out:
        out = [LogComplex.zero()]
    return TaylorSeries(tuple(out), s.precision_bits, s.exact)


def series_multiply(a: TaylorSeries, b: TaylorSeries, J: int) -> TaylorSeries:
    """Cauchy product truncated at degree J."""
    if J < 0:
        raise ValueError("J must be nonnegative")
    prec = max(a.precision_bits, b.precision_bits)
    out = []
    with mpmath.workprec(prec):
        for n in range(J + 1):
            terms = []
            for i in range(max(0, n - b.J), min(n, a.J) + 1):
                ai, bj = a.coeffs[i], b.coeffs[n - i]
                if ai.is_zero or bj.is_zero:
                    continue
                terms.append(ai * bj)
            out.append(log_sum_exp_complex(terms) if terms else LogComplex.zero())
    exact = a.exact and b.exact and J >= a.J + b.J
    return TaylorSeries(tuple(out), prec, exact)


def series_exp(a: TaylorSeries, J: int) -> TaylorSeries:
    """exp(a(z)) through degree J, from g' = a' g.

    The recurrence n g_n = sum_k k a_k g_{n-k} runs in python-flint ball
    arithmetic (floating point with unbounded exponents, so tiny and huge
    coefficients keep their relative accuracy) and is converted back to
    log form at the end.
    """
    if J < 0:
        raise ValueError("J must be nonnegative")
    prec = a.precision_bits
    real = a.is_real_nonnegative
    with mpmath.workprec(prec + 32), flint_precision(prec + 32):
        num = arb if real else acb
        conv = (lambda v: arb(mpf(v.real))) if real else to_acb
        vals = a.mpc_coeffs
        ka = [None] + [k * conv(v) for k, v in enumerate(vals) if k >= 1]
        nz = [k for k in range(1, len(ka)) if not vals[k] == 0]
        g = [conv(vals[0]).exp()]
        for n in range(1, J + 1):
            acc = num(0)
            for k in nz:
                if k > n:
                    break
                acc += ka[k] * g[n - k]
            g.append(acc / n)
    with mpmath.workprec(prec):
        if real:
            out = [LogComplex.zero() if x.is_zero() else LogComplex(mpmath.log(arb_to_mpf(x)), 0) for x in g]
        else:
            out = [LogComplex.from_complex(mpc(arb_to_mpf(x.real), arb_to_mpf(x.imag))) for x in g]
    exact = a.exact and a.leading_index() in (0, None) and all(c.is_zero for c in a.coeffs[1:])
    return TaylorSeries(tuple(out), prec, exact)


def series_add(a: TaylorSeries, b: TaylorSeries) -> TaylorSeries:
    prec = max(a.precision_bits, b.precision_bits)
    n = max(len(a), len(b))
    zero = LogComplex.zero()
    with mpmath.workprec(prec):
        out = [log_sum_exp_complex([a.coeffs[j] if j <= a.J else zero,
                                    b.coeffs[j] if j <= b.J else zero]) for j in range(n)]
    return TaylorSeries(tuple(out), prec, a.exact and b.exact)


def series_scale(a: TaylorSeries, c: LogComplex) -> TaylorSeries:
    with mpmath.workprec(a.precision_bits):
        return TaylorSeries(tuple(x * c for x in a.coeffs), a.precision_bits, a.exact)


# ---------------------------------------------------------------------------
# bulk evaluation through python-flint


class flint_precision:
    """Context manager setting python-flint's working precision."""

    def __init__(self, bits: int):
        self.bits = bits

    def __enter__(self):
        self.old = ctx.prec
        ctx.prec = self.bits
        return self

    def __exit__(self, *exc):
        ctx.prec = self.old
        return False


def to_acb(c) -> acb:
    """mpc/mpf/number to acb; exact when python-flint's precision covers the input."""
    c = mpc(c)
    return acb(arb(c.real), arb(c.imag))


def arb_to_mpf(x) -> mpf:
    man, exp = x.mid().man_exp()
    return mpf((int(man), int(exp)))


def series_acb_poly(s: TaylorSeries) -> acb_poly:
    """The stored coefficients as a python-flint polynomial (set precision first)."""
    return acb_poly([to_acb(c) for c in s.mpc_coeffs])


def max_log_abs_on_circle(s: TaylorSeries, r, samples: int, guard_bits: int = 64) -> mpf:
    """max of ln|s| over the points r e^{2 pi i n / samples}; -inf if all vanish.

    Same arithmetic as series_eval (Horner on the stored coefficients, tail
    test at |z| = r) but evaluated in C.
    """
    if s.is_zero:
        return mpf("-inf")
    check_tail(s, float(mpmath.log(r)), guard_bits)
    work = max(s.precision_bits, guard_bits + 32) + 16
    with flint_precision(work):
        poly = series_acb_poly(s)
        rad = arb(mpf(r)) if not isinstance(r, arb) else r
        best = None
        for n in range(samples):
            t = arb(2 * n) / samples
            z = acb(t.cos_pi(), t.sin_pi()) * rad if n else acb(rad)
            v = abs(poly(z).mid()).mid()
            if best is None or v > best:
                best = v
    with mpmath.workprec(s.precision_bits):
        if best == 0:
            return mpf("-inf")
        return mpmath.log(arb_to_mpf(best))
