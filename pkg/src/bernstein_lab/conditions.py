"""Finite-grid checks of the class C conditions and the chain hypotheses.

Every verdict is "on grid": the underlying conditions are statements about
limits, so a report carries the witness sequence, the trend over the final
third of the grid and the first sample where the tested pattern broke.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import mpmath
import numpy as np
from mpmath import mpf
from scipy.optimize import nnls

from .errors import DegenerateDifference, NotInfiniteOrder, OrdersNotSorted
from .functions import (
    DEFAULT_PRECISION,
    INFINITE_ORDER_THRESHOLD,
    CurveSpec,
    EntireFunctionSpec,
    HSpec,
    growth_m,
    growth_phi,
    log_growth_m,
    order_estimate,
)

CONDITION_IDS = ("cI", "cII", "growth_1_11", "chain_1_4", "chain_1_5", "h_chain_1_13", "h_chain_1_14", "remark_1_22")
SATISFIED = "satisfied_on_grid"
VIOLATED = "violated_at"
INCONCLUSIVE = "inconclusive"

DEGENERATE_DENOMINATOR = 1e-9
# relative slack for "no new maximum" and "nonincreasing" comparisons
FLAT_TOL = 1e-3


@dataclass
class ConditionReport:
    condition_id: str
    grid: List[float]
    witness_values: List[float]
    verdict: str
    violated_at: Optional[float] = None
    trend: float = 0.0
    pair: Optional[tuple] = None
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.condition_id not in CONDITION_IDS:
            raise ValueError(f"unknown condition id {self.condition_id!r}")
        if len(self.grid) != len(self.witness_values):
            raise ValueError("witness_values must match the grid")
        if (self.verdict == VIOLATED) != (self.violated_at is not None):
            raise ValueError("violated_at is set exactly when the verdict is violated_at")

    @property
    def satisfied(self) -> bool:
        return self.verdict == SATISFIED

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else str(x)

        return {
            "condition_id": self.condition_id,
            "grid": list(self.grid),
            "witnesses": [num(w) for w in self.witness_values],
            "verdict": self.verdict,
            "violated_at": self.violated_at,
            "trend": num(self.trend),
            "pair": list(self.pair) if self.pair else None,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# helpers


def _grid(t_grid) -> List[float]:
    g = [float(t) for t in t_grid]
    if len(g) < 3:
        raise ValueError("grid needs at least 3 points")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ValueError("grid must be strictly increasing")
    return g


def _final_third(n: int) -> int:
    """Index where the final third of an n-point grid starts."""
    return min(n - 2, (2 * n) // 3)


def _trend(grid, w) -> float:
    i0 = _final_third(len(grid))
    x, y = np.array(grid[i0:]), np.array(w[i0:], dtype=float)
    if not np.all(np.isfinite(y)):
        return math.inf
    return float(np.polyfit(x, y, 1)[0])


def _first_nonfinite(grid, w):
    for t, v in zip(grid, w):
        if not mpmath.isfinite(v):
            return t
    return None


def _report(cid, grid, w, bad_at, notes=None, pair=None) -> ConditionReport:
    verdict = SATISFIED if bad_at is None else VIOLATED
    return ConditionReport(cid, list(grid), [float(v) for v in w], verdict, bad_at, _trend(grid, w), pair,
                           list(notes or []))


def _bounded_flat_max(grid, w):
    """First sample of the final third that sets a new running maximum, else None."""
    bad = _first_nonfinite(grid, w)
    if bad is not None:
        return bad
    i0 = _final_third(len(grid))
    run = max(w[: i0 + 1])
    for t, v in zip(grid[i0 + 1:], w[i0 + 1:]):
        if v > run * (1 + FLAT_TOL) + FLAT_TOL:
            return t
        run = max(run, v)
    return None


def _nonincreasing(grid, w, use_abs=False):
    """First sample of the final third that increases on its predecessor, else None."""
    bad = _first_nonfinite(grid, w)
    if bad is not None:
        return bad
    vals = [abs(v) for v in w] if use_abs else list(w)
    i0 = _final_third(len(grid))
    for i in range(i0 + 1, len(grid)):
        if vals[i] > vals[i - 1] * (1 + FLAT_TOL):
            return grid[i]
    return None


def _strictly_increasing(grid, w):
    bad = _first_nonfinite(grid, w)
    if bad is not None:
        return bad
    i0 = _final_third(len(grid))
    for i in range(i0 + 1, len(grid)):
        if not w[i] > w[i - 1]:
            return grid[i]
    return None


def _below(grid, w, bound):
    """First sample of the final third at or above `bound`, else None."""
    bad = _first_nonfinite(grid, w)
    if bad is not None:
        return bad
    i0 = _final_third(len(grid))
    for t, v in zip(grid[i0:], w[i0:]):
        if not v < bound:
            return t
    return None


def _is_infinite_order(f: EntireFunctionSpec) -> bool:
    if f.kind in ("exp_of", "iterated_exp"):
        if f.structural_order is not None and math.isfinite(f.structural_order):
            return False
        return True
    return order_estimate(f) > INFINITE_ORDER_THRESHOLD


# ---------------------------------------------------------------------------
# class C


def check_condition_I(f: EntireFunctionSpec, t_grid: Sequence, precision_bits: int = DEFAULT_PRECISION,
                      samples: int = 256) -> ConditionReport:
    """(phi(t+1) - phi(t)) / (phi(t) - phi(t-1)) along the grid; bounded means satisfied."""
    grid = _grid(t_grid)
    if any(b - a < 0.25 - 1e-12 for a, b in zip(grid, grid[1:])):
        raise ValueError("grid step must be at least 0.25")
    if grid[0] < 1:
        raise ValueError("grid must start at t >= 1")
    pts = sorted({round(t + d, 12) for t in grid for d in (-1, 0, 1)})
    with mpmath.workprec(precision_bits):
        phi = {t: growth_phi(f, t, precision_bits, samples) for t in pts}
        w = []
        for t in grid:
            a, b, c = phi[round(t - 1, 12)], phi[round(t, 12)], phi[round(t + 1, 12)]
            den = b - a
            if abs(den) < DEGENERATE_DENOMINATOR:
                raise DegenerateDifference(f"phi(t) - phi(t-1) = {mpmath.nstr(den, 5)} at t = {t}")
            w.append(float((c - b) / den))
    if f.is_polynomial:
        # the class excludes polynomials outright; witnesses are kept for the record
        return _report("cI", grid, w, grid[0], ["polynomial: outside the class by definition"])
    return _report("cI", grid, w, _bounded_flat_max(grid, w))


def convex_increasing_fit(x: Sequence[float], y: Sequence[float]) -> np.ndarray:
    """Least-squares convex nondecreasing piecewise-linear fit with knots at x.

    Writes the fit as c + s0 (x - x0) + sum_j a_j (x - x_j)_+ with s0, a_j >= 0
    and solves the resulting nonnegative least squares problem (the free
    intercept is split into two nonnegative parts).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    # scale columns so nnls sees comparable magnitudes
    cols = [np.ones(n), -np.ones(n), x - x[0]]
    cols += [np.maximum(x - x[j], 0.0) for j in range(1, n - 1)]
    A = np.column_stack(cols)
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    ys = np.max(np.abs(y)) or 1.0
    coef, _ = nnls(A / norms, y / ys, maxiter=50 * A.shape[1])
    return (A / norms) @ coef * ys


def check_condition_II(f: EntireFunctionSpec, t_grid: Sequence, precision_bits: int = DEFAULT_PRECISION,
                       samples: int = 256) -> ConditionReport:
    """t^2 (1/ln psi)' with ln psi the convex increasing fit of ln phi."""
    grid = _grid(t_grid)
    if not _is_infinite_order(f):
        raise NotInfiniteOrder(f"{f.label} has finite order; use check_condition_I")
    with mpmath.workprec(precision_bits):
        log_phi = [float(log_growth_m(f, mpmath.exp(mpf(t)), samples, precision_bits)) for t in grid]
    log_psi = convex_increasing_fit(grid, log_phi)
    notes = []
    if np.any(log_psi <= 0):
        notes.append("ln psi not positive on the whole grid; witnesses there are not finite")
    inv = np.where(log_psi > 0, 1.0 / np.where(log_psi > 0, log_psi, 1.0), np.nan)
    n = len(grid)
    w = []
    for i in range(n):
        lo, hi = max(0, i - 1), min(n - 1, i + 1)
        d = (inv[hi] - inv[lo]) / (grid[hi] - grid[lo])
        w.append(float(grid[i] ** 2 * d) if np.isfinite(d) else math.inf)
    bad = _nonincreasing(grid, w, use_abs=True)
    if bad is None:
        i0 = _final_third(n)
        if not abs(w[-1]) < abs(w[i0]):
            bad = grid[-1]
    return _report("cII", grid, w, bad, notes)


def check_growth_1_11(f: EntireFunctionSpec, t_grid: Sequence, precision_bits: int = DEFAULT_PRECISION,
                      samples: int = 256) -> ConditionReport:
    """phi(t)/t^2 strictly increasing over the final third with final value above 10."""
    grid = _grid(t_grid)
    with mpmath.workprec(precision_bits):
        # compared as mpf: for iterated exponentials phi(t)/t^2 leaves the double range quickly
        exact = [growth_phi(f, t, precision_bits, samples) / mpf(t) ** 2 for t in grid]
        bad = _strictly_increasing(grid, exact)
        if bad is None and not exact[-1] > 10:
            bad = grid[-1]
    w = [float(v) for v in exact]
    notes = ["witness exceeds double range; verdict taken at full precision"] if not all(map(math.isfinite, w)) else []
    return _report("growth_1_11", grid, w, bad, notes)


# ---------------------------------------------------------------------------
# chains of coordinates


def check_chain_conditions(curve: CurveSpec, r_grid: Sequence, precision_bits: int = DEFAULT_PRECISION,
                           samples: int = 256) -> List[ConditionReport]:
    """One report per adjacent coordinate pair.

    The ratio test on increments is used when the later coordinate has
    finite order, and the log-ratio test (bound 1/2) when the earlier one
    has infinite order.  When only the later one is of infinite order
    neither hypothesis is imposed; the increment test is still reported.
    """
    if curve.m < 2:
        raise ValueError("chain conditions need at least two coordinates")
    grid = _grid(r_grid)
    if grid[0] <= 0:
        raise ValueError("radii must be positive")
    orders = []
    for f in curve.coords:
        orders.append(math.inf if _is_infinite_order(f) else order_estimate(f))
    for j in range(curve.m - 1):
        if orders[j] > orders[j + 1] + 1e-9:
            raise OrdersNotSorted(f"order of coordinate {j + 1} ({orders[j]:.4g}) exceeds that of "
                                  f"coordinate {j + 2} ({orders[j + 1]:.4g})")
    reports = []
    with mpmath.workprec(precision_bits):
        e = mpmath.e
        for j in range(curve.m - 1):
            f, g = curve.coords[j], curve.coords[j + 1]
            pair = (j + 1, j + 2)
            if math.isfinite(orders[j]):
                w = []
                for r in grid:
                    r = mpf(r)
                    num = growth_m(f, r, samples, precision_bits) - growth_m(f, r / e, samples, precision_bits)
                    den = growth_m(g, r, samples, precision_bits) - growth_m(g, r / e, samples, precision_bits)
                    w.append(float(num / mpmath.sqrt(den)) if den > 0 else math.inf)
                notes = [] if math.isfinite(orders[j + 1]) else ["later coordinate has infinite order: not required"]
                bad = _nonincreasing(grid, w)
                if bad is None and not w[-1] < w[_final_third(len(grid))]:
                    bad = grid[-1]
                reports.append(_report("chain_1_4", grid, w, bad, notes, pair))
            else:
                w = []
                for r in grid:
                    r = mpf(r)
                    num = log_growth_m(f, r, samples, precision_bits)
                    den = log_growth_m(g, r / e, samples, precision_bits)
                    w.append(float(num / den) if den > 0 else math.inf)
                reports.append(_report("chain_1_5", grid, w, _below(grid, w, 0.5), None, pair))
    return reports


def check_h_chain(h_specs: Sequence[HSpec], split_l: int, t_grid: Sequence,
                  precision_bits: int = DEFAULT_PRECISION) -> List[ConditionReport]:
    """Tests on a list h_1..h_m split after index split_l.

    Pairs inside the lower block get the h_j / sqrt(h_{j+1}) -> 0 test, pairs
    inside the upper block get the integral ratio test (bound 1/2, integrals
    from M = max h_j^{-1}(0) over the upper block) and the sufficient shifted
    ratio h_j(t+1)/h_{j+1}(t) < 1/2.  split_l = 0 makes every pair upper.
    """
    m = len(h_specs)
    if m < 2:
        raise ValueError("need at least two h functions")
    if not 0 <= split_l <= m:
        raise ValueError("split_l must lie in [0, m]")
    grid = _grid(t_grid)
    reports = []
    with mpmath.workprec(precision_bits):
        for j in range(split_l - 1):
            a, b = h_specs[j], h_specs[j + 1]
            w = []
            for t in grid:
                hb = b.h(t)
                w.append(float(a.h(t) / mpmath.sqrt(hb)) if hb > 0 else math.inf)
            bad = _nonincreasing(grid, w)
            if bad is None and not w[-1] < w[_final_third(len(grid))]:
                bad = grid[-1]
            reports.append(_report("h_chain_1_13", grid, w, bad, None, (j + 1, j + 2)))
        upper = list(range(split_l, m))
        if len(upper) >= 2:
            M = max(h_specs[j].h_inv_zero() for j in upper)
            flag = ["h extended linearly below its table"] if any(h_specs[j].below_table for j in upper) else []
            for j in upper[:-1]:
                a, b = h_specs[j], h_specs[j + 1]
                w = []
                for t in grid:
                    den = b.antiderivative_between(M, mpf(t) - 1)
                    w.append(float(a.antiderivative_between(M, t) / den) if den > 0 else math.inf)
                reports.append(_report("h_chain_1_14", grid, w, _below(grid, w, 0.5),
                                       [f"M = {float(M):.6g}"] + flag, (j + 1, j + 2)))
                w = []
                for t in grid:
                    hb = b.h(t)
                    w.append(float(a.h(mpf(t) + 1) / hb) if hb > 0 else math.inf)
                reports.append(_report("remark_1_22", grid, w, _below(grid, w, 0.5), flag, (j + 1, j + 2)))
    return reports
