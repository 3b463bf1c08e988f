"""Zero counts of restricted polynomials and the Jensen-type upper bound.

Counts come from the argument principle, integrating z s'(z)/s(z) over the
circle with composite Gauss-Legendre panels.  Nothing is ever root-found.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import mpmath
import numpy as np
from flint import acb, arb
from mpmath import mpf

from .errors import ContourNearZero, RestrictedIdenticallyZero, TailNotConverged
from .functions import CurveSpec
from .numerics import TaylorSeries, check_tail, flint_precision, series_acb_poly, series_derivative
from .quotient import quotient_of_polynomial, sup_norm_on_circle
from .restriction import (
    GraphPolynomial,
    default_kernel_precision,
    dim_pk,
    kernel_vanishing_poly,
    restrict_to_graph,
    sk_formula,
    verify_kernel,
)

GL_ORDER = 8
START_PANELS = 16
MAX_PANELS = 1 << 12
MAX_NUDGES = 3
NUDGE = 1e-3
RESIDUAL_TOL = 0.1
EXPERIMENT_RADIUS = 1.0


def jensen_constant(prec: int = 53):
    """ln((1 + e^2) / (2 e)), about 0.433780830483027."""
    with mpmath.workprec(prec):
        e = mpmath.e
        return mpmath.log((1 + e * e) / (2 * e))


@dataclass
class ZeroCountResult:
    r: float
    count: int
    contour_segments: int
    residual: float
    jensen_bound: float
    winding_ok: bool
    nudges: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(d["jensen_bound"]):
            d["jensen_bound"] = None
        return d


_GL_CACHE = {}


def _gl_rule(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


class _Contour:
    """Values of s and s' on |z| = r with running min and max of ln|s|.

    Polynomial evaluation runs in python-flint; only midpoints are used.
    """

    def __init__(self, s: TaylorSeries, ds: TaylorSeries, r: float):
        self.prec = s.precision_bits + 16
        with flint_precision(self.prec):
            self.poly = series_acb_poly(s)
            self.dpoly = series_acb_poly(ds)
            self.r = arb(r)
        self.log_min = math.inf
        self.log_max = -math.inf

    def integrand(self, theta: float) -> complex:
        """z s'(z)/s(z) at z = r e^{i theta}; also tracks min and max of ln|s|."""
        with flint_precision(self.prec):
            t = arb(theta)
            z = acb(t.cos(), t.sin()) * self.r
            v = self.poly(z).mid()
            av = abs(v).mid()
            if av == 0:
                self.log_min = -math.inf
                return complex(math.inf, 0.0)
            lv = float(av.log())
            self.log_min = min(self.log_min, lv)
            self.log_max = max(self.log_max, lv)
            return complex((z * self.dpoly(z).mid() / v).mid())


def _winding(ct: _Contour, panels: int) -> complex:
    x, w = _gl_rule(GL_ORDER)
    h = 2 * math.pi / panels
    total = 0j
    for p in range(panels):
        a = p * h
        # endpoint values feed the near-zero detector
        ct.integrand(a)
        for xi, wi in zip(x, w):
            total += wi * ct.integrand(a + 0.5 * h * (xi + 1))
    return total * 0.5 * h / (2 * math.pi)


def _count_at(s: TaylorSeries, ds: TaylorSeries, r: float):
    """(count, panels, residual) or None if the contour runs too close to a zero."""
    ct = _Contour(s, ds, r)
    prev = None
    panels = START_PANELS
    while panels <= MAX_PANELS:
        val = _winding(ct, panels)
        near = ct.log_min < ct.log_max - s.precision_bits * math.log(2) / 4
        if near or not math.isfinite(val.real):
            return None
        n = round(val.real)
        res = abs(val.real - n)
        if prev is not None and res < RESIDUAL_TOL and prev == n and n >= 0:
            return n, panels, float(res)
        prev = n if res < RESIDUAL_TOL else None
        panels *= 2
    return None


def count_zeros_argument(s: TaylorSeries, r, with_jensen: bool = False) -> ZeroCountResult:
    """Zeros of s in |z| < r counted with multiplicity."""
    r = float(r)
    if r <= 0:
        raise ValueError("radius must be positive")
    if s.is_zero:
        raise RestrictedIdenticallyZero("cannot count zeros of the zero series")
    ds = series_derivative(s)
    radius = r
    for attempt in range(MAX_NUDGES + 1):
        # the tail test at the radius actually used; the derivative decays one index slower
        check_tail(s, math.log(radius), 64)
        out = _count_at(s, ds, radius)
        if out is not None:
            n, panels, res = out
            jb = jensen_upper_bound(s, radius) if with_jensen else math.nan
            return ZeroCountResult(radius, n, panels, res, jb, True, attempt)
        radius += NUDGE * r
    raise ContourNearZero(f"zero on or near |z| = {r} persists after {MAX_NUDGES} nudges")


def jensen_upper_bound(s: TaylorSeries, r, samples: int = 1024) -> float:
    """(m_s(e r) - m_s(r)) / ln((1+e^2)/(2e)), an upper bound for the zero count in |z| < r."""
    if s.is_zero:
        raise RestrictedIdenticallyZero("Jensen bound of the zero series")
    with mpmath.workprec(s.precision_bits):
        r = mpf(r)
        gap = sup_norm_on_circle(s, mpmath.e * r, samples) - sup_norm_on_circle(s, r, samples)
        return float(gap / jensen_constant(s.precision_bits))


def restricted_series_for_radius(p: GraphPolynomial, curve: CurveSpec, radius, precision_bits: int,
                                 start: int = 64) -> TaylorSeries:
    """p_f truncated far enough that the tail test passes on |z| = radius."""
    J = start
    lr = math.log(float(radius))
    while J <= 1 << 14:
        s = restrict_to_graph(p, curve, J, precision_bits)
        try:
            check_tail(s, lr, 64)
            return s
        except TailNotConverged:
            J *= 2
    raise TailNotConverged(f"restricted series needs more than {1 << 14} terms at |z| = {radius}")


def lower_bound_experiment(k: int, curve: CurveSpec, mode: str = "thm14", r: float = EXPERIMENT_RADIUS,
                           precision_bits: Optional[int] = None) -> dict:
    """Kernel witness, its vanishing order, zero count and Jensen bound at radius r.

    mode "thm14" targets vanishing order d - 1 with d the dimension of
    polynomials of degree <= k in 1 + m variables; "thm1c" targets s_k + 1
    with the n = 1 counting function.
    """
    if mode == "thm14":
        target = dim_pk(curve.m + 1, k) - 1
    elif mode == "thm1c":
        target = sk_formula(1, k) + 1
    else:
        raise ValueError(f"unknown mode {mode!r}")
    prec = precision_bits or default_kernel_precision(k)
    p = kernel_vanishing_poly(k, curve, target, prec)
    order = verify_kernel(p, curve, target, prec)
    # one series covers the counting radius (plus nudges) and the outer Jensen circle
    s = restricted_series_for_radius(p, curve, math.e * r * 1.01, prec, start=max(64, target + k + 16))
    zc = count_zeros_argument(s, r)
    jb = jensen_upper_bound(s, r)
    q = quotient_of_polynomial(p, curve, r, precision_bits=prec)
    return {
        "k": k,
        "mode": mode,
        "curve": curve.label,
        "r": r,
        "target_order": target,
        "vanishing_order": order,
        "count": zc.count,
        "count_radius": zc.r,
        "residual": zc.residual,
        "jensen_bound": jb,
        "quotient": q,
        "quotient_floor": float(target * jensen_constant()),
        "chain_holds": bool(order <= zc.count <= jb + 0.5),
        "witness": p,
        "series": s,
    }


def experiment_csv_row(rec: dict) -> list:
    return [rec["k"], rec["mode"], rec["vanishing_order"], rec["count"], f"{rec['jensen_bound']:.10g}",
            rec["chain_holds"]]
