"""Polynomials on C^{1+m} restricted to the graph of an entire curve.

A GraphPolynomial p(z, w_1, ..., w_m) restricts to p_f(z) = p(z, f(z)).
Monomials are enumerated in graded lexicographic order (by total degree,
then lexicographically descending), which is the column order shared by
the restriction matrix and the Gram matrices.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Tuple

import mpmath
from mpmath import mpc, mpf

from .errors import LabError, NullspaceEmpty, RestrictedIdenticallyZero
from .functions import CurveSpec, coefficients_of
from .numerics import (
    DEFAULT_PRECISION,
    LogComplex,
    TaylorSeries,
    log_sum_exp_complex,
    series_multiply,
)


class KernelVerificationFailed(LabError):
    """The computed nullvector does not restrict to the requested vanishing order."""


def dim_pk(N: int, k: int) -> int:
    """Dimension of polynomials of degree <= k in N variables."""
    if N < 1 or k < 0:
        raise ValueError("need N >= 1 and k >= 0")
    return math.comb(N + k, N)


def sk_formula(n: int, k: int) -> int:
    """floor(k^(1+1/n) / (n+2)^(1/n)), computed exactly in integers."""
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    # largest s with (n+2) s^n <= k^(n+1)
    target = k ** (n + 1)
    s = int((target / (n + 2)) ** (1.0 / n)) if k else 0
    while (n + 2) * (s + 1) ** n <= target:
        s += 1
    while s > 0 and (n + 2) * s ** n > target:
        s -= 1
    return s


@lru_cache(maxsize=None)
def multi_indices(N: int, k: int) -> Tuple[Tuple[int, ...], ...]:
    """All gamma in Z_+^N with |gamma| <= k, graded lexicographic order."""
    out = []
    for deg in range(k + 1):
        out.extend(_compositions(N, deg))
    return tuple(out)


def _compositions(N: int, total: int):
    if N == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(N - 1, total - first):
            yield (first,) + rest


@dataclass(frozen=True)
class GraphPolynomial:
    """sum over gamma of c_gamma z^g0 w_1^g1 ... w_m^gm, with |gamma| <= k."""

    k: int
    m: int
    coeffs: Dict[Tuple[int, ...], mpc] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for g, c in self.coeffs.items():
            g = tuple(int(x) for x in g)
            if len(g) != self.m + 1:
                raise ValueError(f"multi-index {g} has wrong length for m={self.m}")
            if sum(g) > self.k or min(g) < 0:
                raise ValueError(f"multi-index {g} outside degree bound {self.k}")
            c = _as_mpc(c)
            if c != 0:
                clean[g] = c
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def from_vector(cls, k: int, m: int, vec) -> "GraphPolynomial":
        basis = multi_indices(m + 1, k)
        if len(vec) != len(basis):
            raise ValueError("vector length does not match the monomial basis")
        return cls(k, m, {g: v for g, v in zip(basis, vec)})

    @classmethod
    def monomial(cls, gamma, k: Optional[int] = None, coeff=1) -> "GraphPolynomial":
        gamma = tuple(gamma)
        return cls(sum(gamma) if k is None else k, len(gamma) - 1, {gamma: coeff})

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def vector(self):
        return [self.coeffs.get(g, mpc(0)) for g in multi_indices(self.m + 1, self.k)]

    def norm(self):
        return mpmath.sqrt(sum(abs(c) ** 2 for c in self.coeffs.values()))

    def __add__(self, other: "GraphPolynomial") -> "GraphPolynomial":
        if self.m != other.m:
            raise ValueError("polynomials live on different spaces")
        out = dict(self.coeffs)
        for g, c in other.coeffs.items():
            out[g] = out.get(g, 0) + c
        return GraphPolynomial(max(self.k, other.k), self.m, out)

    def scaled(self, a) -> "GraphPolynomial":
        a = mpmath.mpmathify(a)
        return GraphPolynomial(self.k, self.m, {g: a * c for g, c in self.coeffs.items()})

    def to_dict(self) -> dict:
        rows = []
        for g in multi_indices(self.m + 1, self.k):
            c = self.coeffs.get(g)
            if c is None:
                continue
            rows.append({"gamma": list(g), "re": _full_digits(c.real), "im": _full_digits(c.imag),
                         "log_scale": 0})
        return {"k": self.k, "m": self.m, "coeffs": rows}

    @classmethod
    def from_dict(cls, d: dict) -> "GraphPolynomial":
        coeffs = {}
        bits = max([len(str(row["re"])) for row in d["coeffs"]] + [20]) * 3.33
        for row in d["coeffs"]:
            with mpmath.workprec(int(bits) + 16):
                c = mpc(mpf(row["re"]), mpf(row.get("im", 0)))
            scale = row.get("log_scale", 0)
            if scale:
                c *= mpmath.exp(mpf(scale))
            coeffs[tuple(row["gamma"])] = c
        return cls(int(d["k"]), int(d["m"]), coeffs)


def _as_mpc(c):
    """Convert to mpc without rounding away bits of an existing mpmath value."""
    if isinstance(c, mpc):
        return c
    if isinstance(c, mpf):
        with mpmath.workprec(max(53, c._mpf_[3])):
            return mpc(c)
    return mpc(mpmath.mpmathify(c))


def _full_digits(x) -> str:
    """Decimal string carrying every mantissa bit of an mpf."""
    bits = max(53, x._mpf_[3])
    digits = int(bits * 0.30103) + 3
    with mpmath.workprec(bits + 8):
        return mpmath.nstr(x, digits, strip_zeros=True, min_fixed=-4, max_fixed=4)


def random_graph_polynomial(k: int, m: int, rng, scale_by_degree: bool = False) -> GraphPolynomial:
    """Complex Gaussian coefficients drawn from a numpy Generator."""
    basis = multi_indices(m + 1, k)
    re = rng.standard_normal(len(basis))
    im = rng.standard_normal(len(basis))
    return GraphPolynomial(k, m, {g: mpc(float(a), float(b)) for g, a, b in zip(basis, re, im)})


# ---------------------------------------------------------------------------
# monomial restrictions


class _MonomialCache:
    """Powers f_i^b and monomial series per (curve, precision), grown on demand."""

    def __init__(self):
        self._lock = threading.Lock()
        self._powers: Dict[tuple, TaylorSeries] = {}

    def power(self, spec, b: int, J: int, prec: int) -> TaylorSeries:
        key = (spec.digest, b, prec)
        with self._lock:
            hit = self._powers.get(key)
        if hit is not None and hit.J >= J:
            return hit.truncate(J)
        if b == 0:
            s = TaylorSeries((LogComplex.one(),) + (LogComplex.zero(),) * J, prec, exact=True)
        elif b == 1:
            s = coefficients_of(spec, J, prec)
        else:
            half = self.power(spec, b // 2, J, prec)
            s = series_multiply(half, half, J)
            if b % 2:
                s = series_multiply(s, coefficients_of(spec, J, prec), J)
        with self._lock:
            old = self._powers.get(key)
            if old is None or old.J < s.J:
                self._powers[key] = s
        return s

    def clear(self):
        with self._lock:
            self._powers.clear()


MONOMIALS = _MonomialCache()


def _shift(s: TaylorSeries, a: int, J: int) -> TaylorSeries:
    coeffs = ((LogComplex.zero(),) * a + s.coeffs)[: J + 1]
    if len(coeffs) < J + 1:
        coeffs = coeffs + (LogComplex.zero(),) * (J + 1 - len(coeffs))
    return TaylorSeries(coeffs, s.precision_bits, s.exact and a + s.J <= J)


def monomial_series(gamma, curve: CurveSpec, J: int, precision_bits: int = DEFAULT_PRECISION) -> TaylorSeries:
    """Series of z^g0 f_1^g1 ... f_m^gm through degree J."""
    gamma = tuple(gamma)
    if len(gamma) != curve.m + 1:
        raise ValueError("multi-index length does not match the curve")
    acc = None
    for spec, b in zip(curve.coords, gamma[1:]):
        if b == 0:
            continue
        pw = MONOMIALS.power(spec, b, J, precision_bits)
        acc = pw if acc is None else series_multiply(acc, pw, J)
    if acc is None:
        acc = TaylorSeries((LogComplex.one(),) + (LogComplex.zero(),) * J, precision_bits, exact=True)
    return _shift(acc, gamma[0], J)


def restrict_to_graph(p: GraphPolynomial, curve: CurveSpec, J: int,
                      precision_bits: int = DEFAULT_PRECISION) -> TaylorSeries:
    """Taylor series of p(z, f(z)) through degree J."""
    if p.m != curve.m:
        raise ValueError("polynomial and curve dimensions differ")
    items = [(g, c) for g, c in p.coeffs.items()]
    with mpmath.workprec(precision_bits):
        monos = [(monomial_series(g, curve, J, precision_bits), LogComplex.from_complex(c)) for g, c in items]
        out = []
        for j in range(J + 1):
            terms = [cl * s.coeffs[j] for s, cl in monos if not s.coeffs[j].is_zero]
            out.append(log_sum_exp_complex(terms) if terms else LogComplex.zero())
    exact = all(s.exact for s, _ in monos)
    return TaylorSeries(tuple(out) if out else (LogComplex.zero(),), precision_bits, exact)


@dataclass(frozen=True)
class RestrictionMatrix:
    k: int
    s: int
    entries: tuple  # rows j = 0..s, columns in basis_order, mpc values
    basis_order: tuple
    precision_bits: int = DEFAULT_PRECISION

    @property
    def shape(self):
        return (len(self.entries), len(self.basis_order))


def restriction_matrix(k: int, curve: CurveSpec, s: int, precision_bits: int = DEFAULT_PRECISION) -> RestrictionMatrix:
    """Column gamma holds the first s+1 Taylor coefficients of the monomial gamma."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    basis = multi_indices(curve.m + 1, k)
    with mpmath.workprec(precision_bits):
        cols = [monomial_series(g, curve, s, precision_bits).mpc_coeffs for g in basis]
        rows = tuple(tuple(+col[j] for col in cols) for j in range(s + 1))
    return RestrictionMatrix(k, s, rows, basis, precision_bits)


# ---------------------------------------------------------------------------
# kernel polynomials


def default_kernel_precision(k: int) -> int:
    return max(512, 64 * k + 256)


def _nullvector_leading_first(rows, ncols: int, prec: int):
    """A nullvector whose first nonzero entry (in column order) comes as early as possible.

    Elimination runs over the columns from last to first with partial row
    pivoting after row equilibration; the earliest column that fails to
    become a pivot is the smallest achievable leading index.
    """
    A = [list(r) for r in rows]
    for r in A:
        big = max((abs(x) for x in r), default=0)
        if big > 0:
            for i in range(ncols):
                r[i] /= big
    tol = mpmath.ldexp(1, -prec // 2)
    pivots = []  # (column, row index into A)
    remaining = list(range(len(A)))
    free = []
    for col in range(ncols - 1, -1, -1):
        best, best_val = None, tol
        for ri in remaining:
            v = abs(A[ri][col])
            if v > best_val:
                best, best_val = ri, v
        if best is None:
            free.append(col)
            continue
        remaining.remove(best)
        prow = A[best]
        pv = prow[col]
        for ri in remaining:
            f = A[ri][col] / pv
            if f != 0:
                row = A[ri]
                for i in range(ncols):
                    row[i] -= f * prow[i]
                row[col] = mpc(0)
        pivots.append((col, best))
    if not free:
        raise NullspaceEmpty("restriction matrix has full column rank")
    lead = min(free)
    x = [mpc(0)] * ncols
    x[lead] = mpc(1)
    # back substitution: pivots were chosen from the last column downward, so
    # the row of a pivot only involves its own column and earlier ones
    for col, ri in reversed(pivots):
        row = A[ri]
        acc = mpc(0)
        for i in range(ncols):
            if i != col and x[i] != 0:
                acc += row[i] * x[i]
        x[col] = -acc / row[col]
    return x, lead


def vanishing_order(s: TaylorSeries, threshold_log) -> Optional[int]:
    """First index whose coefficient modulus exceeds exp(threshold_log)."""
    for j, c in enumerate(s.coeffs):
        if not c.is_zero and c.log_mag > threshold_log:
            return j
    return None


def kernel_vanishing_poly(k: int, curve: CurveSpec, target_order: int,
                          precision_bits: Optional[int] = None) -> GraphPolynomial:
    """Unit-norm polynomial of degree <= k whose restriction vanishes to order target_order."""
    prec = precision_bits or default_kernel_precision(k)
    d = dim_pk(curve.m + 1, k)
    if target_order > d - 1:
        raise NullspaceEmpty(f"target order {target_order} exceeds d-1 = {d - 1}")
    if target_order < 1:
        raise ValueError("target_order must be >= 1")
    with mpmath.workprec(prec):
        R = restriction_matrix(k, curve, target_order - 1, prec)
        x, lead = _nullvector_leading_first(R.entries, d, prec)
        norm = mpmath.sqrt(sum(abs(v) ** 2 for v in x))
        # unit 2-norm, leading coefficient real positive
        phase = x[lead] / abs(x[lead])
        x = [v / (norm * phase) for v in x]
        p = GraphPolynomial.from_vector(k, curve.m, x)
        verify_kernel(p, curve, target_order, prec)
    return p


def verify_kernel(p: GraphPolynomial, curve: CurveSpec, target_order: int, precision_bits: int) -> int:
    """Re-restrict p and return its numerically verified vanishing order."""
    J = target_order + p.k + 16
    with mpmath.workprec(precision_bits):
        s = restrict_to_graph(p, curve, J, precision_bits)
        thresh = mpmath.log(p.norm()) - precision_bits / 4 * mpmath.log(2)
        order = vanishing_order(s, thresh)
    if order is None:
        raise RestrictedIdenticallyZero(
            f"restriction vanishes through degree {J}: the curve satisfies a polynomial relation of degree <= {p.k}")
    if order < target_order:
        raise KernelVerificationFailed(f"restriction has vanishing order {order} < target {target_order}")
    return order
