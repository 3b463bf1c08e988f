"""Power-law fits of measured quotients in k and the predicted exponents."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientPoints, NonpositiveQuotient

MIN_POINTS = 4
DEFAULT_K_FLOOR = 2
CURVE_CLASSES = ("algebraic", "exp_curve", "classC_finite_order", "chain", "lower_bound", "product")


@dataclass(frozen=True)
class ExponentFit:
    k_range: tuple
    slope: float
    intercept: float
    stderr: float
    points_used: int
    method: str = "ols_loglog"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_range"] = list(self.k_range)
        return d


@dataclass(frozen=True)
class TheoreticalExponent:
    curve_class: str
    exponent: float
    is_optimal: bool
    source: str
    bound: str = "optimal"  # optimal | upper | lower

    def to_dict(self) -> dict:
        return asdict(self)


def _ols(x: np.ndarray, y: np.ndarray):
    n = x.size
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    dof = n - 2
    s2 = float((resid ** 2).sum() / dof) if dof > 0 else 0.0
    return slope, intercept, math.sqrt(max(s2, 0.0) / sxx)


def fit_exponent(estimates: Sequence, k_floor: int = DEFAULT_K_FLOOR) -> ExponentFit:
    """OLS of ln(log_quotient) on ln k over estimates with k >= k_floor.

    Accepts QuotientEstimate objects or plain (k, value) pairs.
    """
    pts = []
    curves, radii = set(), set()
    for e in estimates:
        if isinstance(e, tuple):
            k, v = e
        else:
            k, v = e.k, e.log_quotient
            curves.add(e.curve_label)
            radii.add(float(e.r))
        pts.append((int(k), float(v)))
    if len(curves) > 1 or len(radii) > 1:
        raise ValueError("estimates must share one curve and one radius")
    ks = [k for k, _ in pts]
    if len(set(ks)) != len(ks):
        raise ValueError("estimates must have distinct k")
    pts = sorted((k, v) for k, v in pts if k >= k_floor)
    if len(pts) < MIN_POINTS:
        raise InsufficientPoints(f"{len(pts)} usable points (k >= {k_floor}); need {MIN_POINTS}")
    for k, v in pts:
        if not v > 0:
            raise NonpositiveQuotient(f"log_quotient {v} at k = {k}")
    x = np.log([k for k, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept, se = _ols(x, y)
    return ExponentFit((pts[0][0], pts[-1][0]), slope, intercept, se, len(pts))


def theoretical_exponent(curve_class: str, param=None) -> TheoreticalExponent:
    """Predicted exponent of the quotient's growth in k for a curve class.

    param is m for exp_curve and chain, n for lower_bound, and the list of
    member exponents for product.
    """
    if curve_class == "algebraic":
        return TheoreticalExponent("algebraic", 1.0, True, "algebraic curves: exponent 1")
    if curve_class == "exp_curve":
        m = int(param)
        if m < 1:
            raise ValueError("m must be >= 1")
        return TheoreticalExponent(f"exp_curve({m})", float(m + 1), True,
                                   "exponential polynomial coordinates: optimal exponent m + 1")
    if curve_class == "classC_finite_order":
        return TheoreticalExponent("classC_finite_order", 2.0, True,
                                   "class C coordinates of finite order: optimal exponent 2")
    if curve_class == "chain":
        m = int(param)
        if m < 1:
            raise ValueError("m must be >= 1")
        return TheoreticalExponent(f"chain({m})", float(2 ** m), False,
                                   "chains of class C coordinates: exponent 2^m", "upper")
    if curve_class == "lower_bound":
        n = int(param)
        if n < 1:
            raise ValueError("n must be >= 1")
        return TheoreticalExponent(f"lower_bound({n})", 1.0 + 1.0 / n, False,
                                   "transcendental maps of n variables: liminf of mu(k)/k^(1+1/n) > 0", "lower")
    if curve_class == "product":
        members = [float(x) for x in param]
        if not members:
            raise ValueError("product needs at least one member")
        return TheoreticalExponent(f"product({members})", max(members), True,
                                   "products of graphs: maximum of the member exponents")
    raise ValueError(f"unknown curve class {curve_class!r}")


def compare_fit(fit: ExponentFit, theory: TheoreticalExponent, band: float) -> dict:
    if not band > 0:
        raise ValueError("band must be positive")
    verdict = "consistent"
    if theory.bound == "lower" and fit.slope + band < theory.exponent:
        verdict = "below_lower_bound"
    elif theory.bound == "upper" and fit.slope - band > theory.exponent:
        verdict = "above_upper"
    return {
        "slope": fit.slope,
        "stderr": fit.stderr,
        "k_range": list(fit.k_range),
        "theory": theory.exponent,
        "theory_class": theory.curve_class,
        "theory_bound": theory.bound,
        "band": band,
        "verdict": verdict,
    }


def fit_report(fit: ExponentFit, theory: Optional[TheoreticalExponent], curve: str, r: float,
               band: float = 0.4) -> str:
    doc = {"curve": curve, "r": r, "k_range": list(fit.k_range), "slope": fit.slope, "stderr": fit.stderr}
    if theory is not None:
        cmp = compare_fit(fit, theory, band)
        doc.update(theory=theory.exponent, verdict=cmp["verdict"])
    else:
        doc.update(theory=None, verdict=None)
    return json.dumps(doc, sort_keys=True)
