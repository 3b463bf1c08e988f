"""The ten acceptance criteria as plain functions.

Each criterion returns a CriterionResult.  Criteria share an
AcceptanceContext so that later checks can reuse earlier results: the
witness quotients of criterion 3 feed criterion 4, and every series built
by criteria 1 to 7 is registered for the Jensen consistency sweep of
criterion 8.
"""

from __future__ import annotations

import math
import random
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import mpmath
import numpy as np
from mpmath import mpf

from .conditions import (
    check_chain_conditions,
    check_condition_I,
    check_growth_1_11,
    check_h_chain,
)
from .errors import DegenerateDifference, LabError
from .expfit import fit_exponent
from .functions import (
    CurveSpec,
    EntireFunctionSpec,
    HSpec,
    coefficients_of,
    growth_m,
    growth_phi,
    nu_transform,
    order_estimate,
    required_terms,
    series_for_radius,
)
from .numerics import LogComplex, TaylorSeries, log_sum_exp_complex
from .quotient import extremal_quotient, verify_exp_poly_bound
from .restriction import GraphPolynomial, dim_pk, restrict_to_graph
from .zeros import count_zeros_argument, jensen_constant, jensen_upper_bound, lower_bound_experiment, \
    restricted_series_for_radius

E = EntireFunctionSpec
EXP_CURVE = CurveSpec((E.exp_polynomial([([1], 1)]),), "exp(z)")
ID_CURVE = CurveSpec((E.polynomial([0, 1]),), "z")

# tolerances, kept in one place so the test module can pin them
C1_TOL = 1e-6
C1_SLOPE = (0.95, 1.05)
C1_BUDGET = 60.0
C2_BAND = (1.6, 2.4)
C2_MIN_PRECISION = 1024
C2_BUDGET = 30 * 60.0
C3_BUDGET = 10 * 60.0
C4_MIN_SLOPE = 1.6
C5_DRAWS = 100
C5_RADII = (0.5, 1.0, 2.0)
C5_BUDGET = 5 * 60.0
C6_ORDERS = {"power": (0.0, 0.05), "exponential": (1.0, 0.1)}
C6_BUDGET = 5 * 60.0
C7_REL = 0.01
C7_BUDGET = 5 * 60.0
C8_SLACK = 0.5
C8_BUDGET = 5 * 60.0
C9_GROWTH_TOL = 1e-6
C9_FIT_TOL = 1e-9
C9_BUDGET = 2 * 60.0


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    elapsed: float = 0.0
    measured: dict = field(default_factory=dict)
    detail: str = ""
    skipped: bool = False

    def line(self) -> str:
        tag = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        return f"[{tag}] criterion {self.number:2d} {self.title}: {self.detail} ({self.elapsed:.1f}s)"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "passed": self.passed, "skipped": self.skipped,
                "elapsed": self.elapsed, "detail": self.detail, "measured": _jsonable(self.measured)}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, int, str)) or x is None:
        return x
    try:
        v = float(x)
    except (TypeError, ValueError):
        return str(x)
    return v if math.isfinite(v) else str(v)


@dataclass
class TouchedSeries:
    label: str
    series: TaylorSeries
    r: float


@dataclass
class AcceptanceContext:
    seed: int = 0
    touched: List[TouchedSeries] = field(default_factory=list)
    witness_quotients: Dict[int, float] = field(default_factory=dict)

    def touch(self, label: str, s: TaylorSeries, r: float):
        self.touched.append(TouchedSeries(label, s, float(r)))


def _timed(number: int, title: str, budget: Optional[float]):
    def deco(fn: Callable[..., CriterionResult]):
        def run(ctx: AcceptanceContext) -> CriterionResult:
            t0 = time.perf_counter()
            res = fn(ctx)
            res.number, res.title = number, title
            res.elapsed = time.perf_counter() - t0
            if budget is not None and res.elapsed > budget:
                res.passed = False
                res.detail += f"; runtime {res.elapsed:.0f}s exceeds {budget:.0f}s"
            return res

        run.number, run.title, run.budget = number, title, budget
        return run

    return deco


def _polynomial_restriction(p: GraphPolynomial, curve: CurveSpec, prec: int) -> TaylorSeries:
    """p_f for a curve with polynomial coordinates, as an exact series."""
    deg = max(len(c.params["coeffs"]) - 1 for c in curve.coords)
    J = max(1, p.k * max(1, deg))
    s = restrict_to_graph(p, curve, J, prec)
    return TaylorSeries(s.coeffs, prec, exact=True)


# ---------------------------------------------------------------------------
# criteria


@_timed(1, "algebraic calibration on the curve z", C1_BUDGET)
def criterion_1(ctx: AcceptanceContext) -> CriterionResult:
    worst, slopes = 0.0, {}
    for r in (0.5, 1.0, 2.0):
        ests = []
        for k in range(1, 13):
            q = extremal_quotient(k, ID_CURVE, r)
            worst = max(worst, abs(q.log_quotient - k))
            ests.append(q)
            p = q.metadata["extremal_poly"]
            ctx.touch(f"c1 extremal k={k} r={r}", _polynomial_restriction(p, ID_CURVE, q.precision_bits), r)
        slopes[r] = fit_exponent(ests).slope
    ok = worst <= C1_TOL and all(C1_SLOPE[0] <= s <= C1_SLOPE[1] for s in slopes.values())
    return CriterionResult(1, "", ok, measured={"max_abs_error": worst, "slopes": slopes},
                           detail=f"max |B-k| = {worst:.2e} (tol {C1_TOL:g}); slopes "
                                  + ", ".join(f"r={r}: {s:.4f}" for r, s in slopes.items()))


@_timed(2, "exponent of the exponential curve", C2_BUDGET)
def criterion_2(ctx: AcceptanceContext) -> CriterionResult:
    ests = []
    for k in range(2, 17):
        q = extremal_quotient(k, EXP_CURVE, 1.0)
        if q.precision_bits < C2_MIN_PRECISION:
            q = extremal_quotient(k, EXP_CURVE, 1.0, C2_MIN_PRECISION)
        ests.append(q)
        p = q.metadata["extremal_poly"]
        s = restricted_series_for_radius(p, EXP_CURVE, math.e * 1.01, q.precision_bits)
        ctx.touch(f"c2 extremal k={k}", s, 1.0)
    fit = fit_exponent(ests)
    ok = C2_BAND[0] <= fit.slope <= C2_BAND[1]
    return CriterionResult(2, "", ok, measured={"slope": fit.slope, "stderr": fit.stderr,
                                                "B": {q.k: q.log_quotient for q in ests},
                                                "precision": {q.k: q.precision_bits for q in ests}},
                           detail=f"slope {fit.slope:.4f} +/- {fit.stderr:.4f} over k=2..16, band {C2_BAND}")


@_timed(3, "kernel and Jensen chain on exp(z)", C3_BUDGET)
def criterion_3(ctx: AcceptanceContext) -> CriterionResult:
    bad = []
    rows = {}
    c = float(jensen_constant())
    for k in range(1, 9):
        rec = lower_bound_experiment(k, EXP_CURVE, "thm14", 1.0)
        d = dim_pk(2, k)
        ctx.witness_quotients[k] = rec["quotient"]
        ctx.touch(f"c3 witness k={k}", rec["series"], 1.0)
        rows[k] = {"order": rec["vanishing_order"], "count": rec["count"], "jensen": rec["jensen_bound"],
                   "quotient": rec["quotient"], "floor": (d - 1) * c}
        if rec["vanishing_order"] != d - 1:
            bad.append(f"k={k}: order {rec['vanishing_order']} != {d - 1}")
        if not rec["quotient"] >= (d - 1) * c:
            bad.append(f"k={k}: quotient {rec['quotient']:.4f} < {(d - 1) * c:.4f}")
    return CriterionResult(3, "", not bad, measured=rows,
                           detail="all 8 witnesses verified" if not bad else "; ".join(bad))


@_timed(4, "lower-bound slope of the witness quotients", None)
def criterion_4(ctx: AcceptanceContext) -> CriterionResult:
    for k in range(2, 9):
        if k not in ctx.witness_quotients:
            rec = lower_bound_experiment(k, EXP_CURVE, "thm14", 1.0)
            ctx.witness_quotients[k] = rec["quotient"]
    fit = fit_exponent([(k, ctx.witness_quotients[k]) for k in range(2, 9)])
    # log-log slope of the vanishing-order floor d - 1 itself over the same k
    ks = np.arange(2, 9)
    floor_slope = float(np.polyfit(np.log(ks), np.log((ks + 1) * (ks + 2) / 2 - 1), 1)[0])
    ok = fit.slope >= C4_MIN_SLOPE
    return CriterionResult(4, "", ok, measured={"slope": fit.slope, "floor_slope": floor_slope},
                           detail=f"slope {fit.slope:.4f} (need >= {C4_MIN_SLOPE}); "
                                  f"slope of d-1 alone is {floor_slope:.4f}")


def random_exp_polynomial(rng: random.Random, max_terms: int = 3, max_degree: int = 2,
                          max_freq: float = 2.0) -> EntireFunctionSpec:
    """Seeded exponential polynomial with distinct frequencies."""
    n = rng.randint(1, max_terms)
    terms, seen = [], set()
    while len(terms) < n:
        q = complex(round(rng.uniform(-max_freq, max_freq), 6), round(rng.uniform(-max_freq, max_freq), 6))
        if abs(q) > max_freq or q in seen:
            continue
        seen.add(q)
        deg = rng.randint(0, max_degree)
        p = [[rng.gauss(0, 1), rng.gauss(0, 1)] for _ in range(deg + 1)]
        terms.append((p, [q.real, q.imag]))
    return E.exp_polynomial(terms)


@_timed(5, "exponential polynomial Bernstein bound", C5_BUDGET)
def criterion_5(ctx: AcceptanceContext) -> CriterionResult:
    rng = random.Random(ctx.seed ^ 0x5)
    violations, worst = [], -math.inf
    for i in range(C5_DRAWS):
        g = random_exp_polynomial(rng)
        for r in C5_RADII:
            lhs, rhs, holds = verify_exp_poly_bound(g, r, samples=1024)
            worst = max(worst, lhs - rhs)
            if not holds:
                violations.append((i, r, lhs, rhs))
        ctx.touch(f"c5 g#{i}", series_for_radius(g, math.e * 1.01), 1.0)
    return CriterionResult(5, "", not violations, measured={"violations": violations, "max_lhs_minus_rhs": worst},
                           detail=f"{len(violations)} violations in {C5_DRAWS * len(C5_RADII)} cases; "
                                  f"max lhs-rhs = {worst:.3f}")


def _sandwich(h: HSpec, t_grid, ctx: Optional[AcceptanceContext]):
    f = E.f_h(h)
    rho = order_estimate(f)
    J = required_terms(f, max(t_grid)) + 64
    s = coefficients_of(f, J, 512)
    bad = []
    rows = []
    with mpmath.workprec(512):
        for t in t_grid:
            integral = h.growth_integral(t)
            nu, _ = nu_transform(s, t)
            phi = growth_phi(f, t)
            upper = 2 * (rho + 1) * mpf(t) + nu
            rows.append((t, float(integral), float(nu), float(phi)))
            if not (integral - t <= nu <= integral):
                bad.append(f"{h.kind} t={t}: int-t <= nu <= int fails")
            if not (nu <= phi <= upper):
                bad.append(f"{h.kind} t={t}: nu <= phi <= 2(rho+1)t+nu fails")
    if ctx is not None:
        ctx.touch(f"c6 f_h[{h.kind}]", series_for_radius(f, math.e * 1.01), 1.0)
    return rho, bad, rows


@_timed(6, "growth sandwiches for f_h", C6_BUDGET)
def criterion_6(ctx: AcceptanceContext) -> CriterionResult:
    grid = [5 + 0.5 * i for i in range(15)]
    bad, orders = [], {}
    for h in (HSpec.power(1.5), HSpec.exponential(1)):
        rho, b, _ = _sandwich(h, grid, ctx)
        orders[h.kind] = rho
        bad += b
        centre, tol = C6_ORDERS[h.kind]
        if not abs(rho - centre) <= tol:
            bad.append(f"{h.kind}: order {rho:.4f} outside {centre} +/- {tol}")
    return CriterionResult(6, "", not bad, measured={"orders": orders, "failures": bad},
                           detail=("orders " + ", ".join(f"{k}={v:.4f}" for k, v in orders.items())
                                   + ("" if not bad else "; " + "; ".join(bad[:5]))))


@_timed(7, "class C verdicts", C7_BUDGET)
def criterion_7(ctx: AcceptanceContext) -> CriterionResult:
    bad = []
    ez = E.exp_polynomial([([1], 1)])
    grid = [2 + 0.5 * i for i in range(13)]
    rep = check_condition_I(ez, grid)
    off = max(abs(w / math.e - 1) for w in rep.witness_values)
    if off > C7_REL or not rep.satisfied:
        bad.append(f"cI on exp(z): {rep.verdict}, max rel. offset {off:.2e}")
    if not check_growth_1_11(ez, grid).satisfied:
        bad.append("growth condition on exp(z) not satisfied")
    ctx.touch("c7 exp(z)", series_for_radius(ez, math.e * 1.01), 1.0)
    for coeffs in ([0, 0, 0, 1], [1, -2, 0, 0, 1], [3]):
        poly = E.polynomial(coeffs)
        try:
            rep = check_condition_I(poly, [2, 3, 4, 5, 6])
            if rep.satisfied:
                bad.append(f"cI satisfied on polynomial {coeffs}")
        except DegenerateDifference:
            pass
        ctx.touch(f"c7 poly {coeffs}", TaylorSeries.from_values(coeffs), 1.0)
    rg = [2.0 + i for i in range(19)]
    chains = {
        "exp(z), exp(z^3)": CurveSpec((ez, E.exp_of(E.polynomial([0, 0, 0, 1]))), "a"),
        "exp(exp(z)), exp(exp(6z))": CurveSpec((E.iterated_exp(2, 1), E.iterated_exp(2, 6)), "b"),
        "exp3(z), exp3(3z)": CurveSpec((E.iterated_exp(3, 1), E.iterated_exp(3, 3)), "c"),
        "exp(z^2), exp(exp(z))": CurveSpec((E.exp_of(E.polynomial([0, 0, 1])), E.iterated_exp(2, 1)), "d"),
    }
    for name, curve in chains.items():
        for rep in check_chain_conditions(curve, rg):
            if not rep.satisfied:
                bad.append(f"chain {name}: {rep.condition_id} {rep.verdict} at {rep.violated_at}")
    ee = E.iterated_exp(2, 1)
    ctx.touch("c7 exp(exp(z))", series_for_radius(ee, math.e * 1.01), 1.0)
    P, X = HSpec.power, HSpec.exponential
    tg = [4 + 0.5 * i for i in range(17)]
    patterns = {
        "power pair, lower block": ([P(1.8), P(1.3)], 2),
        "exponential pair, lower block": ([X(1), X(3)], 2),
        "power pair, upper block": ([P(1.7), P(1.4)], 0),
        "exponential pair, upper block": ([X(1), X(2)], 0),
        "exponential pair, shifted ratio": ([X(1), X(3)], 0),
        "mixed four-term chain": ([P(1.8), P(1.3), P(1.7), P(1.4)], 2),
    }
    for name, (hs, l) in patterns.items():
        for rep in check_h_chain(hs, l, tg):
            if not rep.satisfied:
                bad.append(f"h-chain {name}: {rep.condition_id} {rep.verdict}")
    ident = check_h_chain([P(1.5), P(1.5)], 2, tg)
    if any(r.satisfied for r in ident):
        bad.append("identical h pair reported satisfied")
    ident_chain = check_chain_conditions(CurveSpec((ee, ee), "same"), rg)
    if any(r.satisfied for r in ident_chain):
        bad.append("identical coordinate pair reported satisfied")
    return CriterionResult(7, "", not bad, measured={"failures": bad},
                           detail="all verdicts as expected" if not bad else "; ".join(bad))


def _linear_factor_products(seed: int, n: int = 6):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        roots = []
        while len(roots) < rng.randint(3, 7):
            a = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            if abs(abs(a) - 1) > 0.05:
                roots.append(a)
        coeffs = np.poly1d(roots, r=True).coeffs[::-1]
        out.append((roots, [complex(c) for c in coeffs]))
    return out


@_timed(8, "zero counts and Jensen consistency", C8_BUDGET)
def criterion_8(ctx: AcceptanceContext) -> CriterionResult:
    bad = []
    f = E.exp_polynomial([([1], 1), ([-1], 0)])
    s = series_for_radius(f, 13 * math.e * 1.01)
    for r, expected in ((1, 1), (7, 3), (13, 5)):
        n = count_zeros_argument(s, r).count
        if n != expected:
            bad.append(f"e^z-1 at r={r}: {n} != {expected}")
        ctx.touch(f"c8 e^z-1 r={r}", s, r)
    for k in range(1, 11):
        zk = TaylorSeries.from_values([0] * k + [1])
        n = count_zeros_argument(zk, 1.0).count
        if n != k:
            bad.append(f"z^{k}: {n}")
        ctx.touch(f"c8 z^{k}", zk, 1.0)
    for roots, coeffs in _linear_factor_products(ctx.seed ^ 0x8):
        ps = TaylorSeries.from_values(coeffs)
        n = count_zeros_argument(ps, 1.0).count
        expected = sum(abs(a) < 1 for a in roots)
        if n != expected:
            bad.append(f"product with {len(roots)} roots: {n} != {expected}")
        ctx.touch(f"c8 product deg {len(roots)}", ps, 1.0)
    jensen_bad = []
    for item in ctx.touched:
        res = count_zeros_argument(item.series, item.r)
        jb = jensen_upper_bound(item.series, res.r)
        if not res.count <= jb + C8_SLACK:
            jensen_bad.append(f"{item.label}: count {res.count} > bound {jb:.3f}")
    bad += jensen_bad
    return CriterionResult(8, "", not bad, measured={"series_checked": len(ctx.touched), "failures": bad},
                           detail=f"{len(ctx.touched)} series checked against the Jensen bound"
                                  + ("" if not bad else "; " + "; ".join(bad[:5])))


ZOO_FINITE_ORDER = {
    "exp(z)": E.exp_polynomial([([1], 1)]),
    "cosh-like": E.exp_polynomial([([0.5], 1), ([0.5], -1)]),
    "z e^{2z} + 1": E.exp_polynomial([([0, 1], 2), ([1], 0)]),
    "1/j!": E.taylor_rule("inverse_factorial"),
    "alternating 1/j!": E.taylor_rule("inverse_factorial", {"rule": "alternating"}),
    "gaussian": E.taylor_rule("gaussian", a=0.5),
    "exp(z^2)": E.exp_of(E.polynomial([0, 0, 1])),
    "f_h power": E.f_h(HSpec.power(1.5)),
    "f_h exponential": E.f_h(HSpec.exponential(1)),
}


@_timed(9, "numerics properties", C9_BUDGET)
def criterion_9(ctx: AcceptanceContext) -> CriterionResult:
    bad = []
    grid = [0.5 * i for i in range(1, 13)]
    for name, f in ZOO_FINITE_ORDER.items():
        with mpmath.workprec(256):
            phi = [growth_phi(f, t, 256) for t in grid]
            for a, b, c in zip(phi, phi[1:], phi[2:]):
                if a - 2 * b + c < -mpf(2) ** -100 * (1 + abs(b)):
                    bad.append(f"phi not convex for {name}")
                    break
        for r in (0.7, 3.0):
            m1 = growth_m(f, r, 256, 256)
            m2 = growth_m(f, r, 512, 256)
            if abs(m1 - m2) > C9_GROWTH_TOL * max(1, abs(m2)):
                bad.append(f"growth_m({name}, {r}) moves by {float(abs(m1 - m2)):.2e} on doubling")
    rng = random.Random(ctx.seed ^ 0x9)
    with mpmath.workprec(256):
        for _ in range(50):
            terms = [LogComplex(mpf(rng.uniform(-50, 50)), mpf(rng.uniform(-3, 3)))
                     for _ in range(rng.randint(2, 40))]
            a = log_sum_exp_complex(terms)
            perm = terms[:]
            rng.shuffle(perm)
            b = log_sum_exp_complex(perm)
            if a.is_zero != b.is_zero or (not a.is_zero and abs(a.log_mag - b.log_mag)
                                            > mpf(2) ** (-256 + 8) * max(1, abs(a.log_mag))):
                bad.append("log_sum_exp not permutation invariant")
                break
    for c, mu in ((3.0, 2.0), (1.0, 1.0), (0.25, 2.7), (10.0, 1.5)):
        fit = fit_exponent([(k, c * k ** mu) for k in range(2, 11)])
        if abs(fit.slope - mu) > C9_FIT_TOL:
            bad.append(f"fit of {c} k^{mu} gives {fit.slope!r}")
    return CriterionResult(9, "", not bad, measured={"failures": bad},
                           detail="all properties hold" if not bad else "; ".join(bad))


REPRO_CONFIGS = (
    {"experiment": "quotient", "curve": EXP_CURVE.to_dict(), "k_range": [1, 4], "r_values": [0.5, 1.0],
     "methods": ["gram_l2", "random_search"], "random_draws": 4},
    {"experiment": "zeros", "curve": EXP_CURVE.to_dict(), "k_range": [1, 3], "r_values": [1.0], "mode": "thm14"},
)


@_timed(10, "reproducibility of CSV reports", None)
def criterion_10(ctx: AcceptanceContext) -> CriterionResult:
    from .cli import run_config

    bad = []
    with tempfile.TemporaryDirectory() as tmp:
        for i, base in enumerate(REPRO_CONFIGS):
            bodies = []
            for run in range(2):
                out = Path(tmp) / f"cfg{i}_run{run}"
                cfg = dict(base, out_dir=str(out), seed=ctx.seed)
                run_config(cfg)
                text = (out / "report.csv").read_text()
                bodies.append("".join(line for line in text.splitlines(True) if not line.startswith("#")))
            if bodies[0] != bodies[1]:
                bad.append(f"config {i} ({base['experiment']}) differs between runs")
    return CriterionResult(10, "", not bad, measured={"configs": len(REPRO_CONFIGS)},
                           detail="CSV bodies byte-identical" if not bad else "; ".join(bad))


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10)
MIN_PRECISION = {2: C2_MIN_PRECISION}


def run_criterion(fn, ctx: AcceptanceContext) -> CriterionResult:
    """Run one criterion; an exception counts as a failure, never a crash."""
    try:
        return fn(ctx)
    except (LabError, ArithmeticError, ValueError, RuntimeError) as exc:
        return CriterionResult(fn.number, fn.title, False, detail=f"raised {type(exc).__name__}: {exc}")


def run_all(seed: int = 0, selected=None, precision_bits: Optional[int] = None,
            echo: Optional[Callable[[str], None]] = None) -> List[CriterionResult]:
    ctx = AcceptanceContext(seed=seed)
    out = []
    for fn in CRITERIA:
        if selected and fn.number not in selected:
            continue
        need = MIN_PRECISION.get(fn.number)
        if precision_bits is not None and need is not None and precision_bits < need:
            res = CriterionResult(fn.number, fn.title, True, skipped=True,
                                  detail=f"not runnable below {need} bits (configured {precision_bits})")
        else:
            res = run_criterion(fn, ctx)
        out.append(res)
        if echo:
            echo(res.line())
    return out
