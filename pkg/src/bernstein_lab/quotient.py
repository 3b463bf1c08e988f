"""Bernstein quotients of polynomials restricted to an entire curve.

The extremal quotient sup_p [m_{p_f}(e r) - m_{p_f}(r)] over deg p <= k is
replaced by its L2 analogue on the two circles: with Gram matrices

    G_r[a, b] = mean over nodes of conj(b_a(z)) b_b(z),   |z| = r,

of the restricted monomials b_gamma = z^g0 f_1^g1 ... f_m^gm, the L2 quotient
is (1/2) ln lambda_max(G_{er}, G_r).  The pencil is reduced by a pivoted
Cholesky factorization of G_r followed by power iteration.

Gram products are formed exactly in integer arithmetic on fixed-point
images of the node values (python-flint fmpz_mat), so that only the
conversion to fixed point rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import mpmath
import numpy as np
from flint import acb, acb_mat, arb, arb_mat, ctx, fmpz, fmpz_mat
from mpmath import mpc, mpf

from .errors import GramSingular, QuadratureNotStabilized, RestrictedIdenticallyZero
from .functions import (
    CurveSpec,
    EntireFunctionSpec,
    _float_log_mags,
    coefficients_of,
    decode_complex,
    evaluate,
    exp_poly_degree_type,
    growth_m,
)
from .numerics import (
    LogComplex,
    TaylorSeries,
    arb_to_mpf,
    flint_precision,
    max_log_abs_on_circle,
    series_eval,
    to_acb,
)
from .restriction import GraphPolynomial, dim_pk, multi_indices, random_graph_polynomial

MAX_DOUBLINGS = 6
MAX_GRAM_PRECISION = 8192
DEFAULT_SUP_SAMPLES = 1024


@dataclass(frozen=True)
class QuotientEstimate:
    k: int
    r: float
    log_quotient: float
    method: str
    precision_bits: int
    samples: int
    curve_label: str
    metadata: dict = field(default_factory=dict, compare=False)

    def csv_row(self) -> list:
        return [self.curve_label, self.k, self.r, repr(self.log_quotient), self.method,
                self.precision_bits, self.samples]

    def to_dict(self) -> dict:
        meta = {k: v for k, v in self.metadata.items() if k != "extremal_poly"}
        return {"k": self.k, "r": self.r, "log_quotient": self.log_quotient, "method": self.method,
                "precision_bits": self.precision_bits, "samples": self.samples,
                "curve_label": self.curve_label, "metadata": meta}


@dataclass(frozen=True)
class GramPair:
    k: int
    r: float
    inner_gram: list
    outer_gram: list
    quad_points: int
    precision_bits: int
    basis: tuple
    real: bool = False

    @property
    def d(self) -> int:
        return len(self.basis)


def _polynomial_degree(curve: Optional[CurveSpec]) -> Optional[int]:
    if curve is None or not all(s.kind == "polynomial" for s in curve.coords):
        return None
    return max(1, max(len(s.params["coeffs"]) - 1 for s in curve.coords))


def default_gram_precision(k: int, curve: Optional[CurveSpec] = None) -> int:
    """Starting precision for the Gram pencil.

    The smallest genuine Cholesky pivot of the inner Gram falls off roughly
    like 2^(-5 k^2) (measured on the exponential curve at r = 1), and the
    deflation rule discards pivots below 2^(-prec/2); the k^2 term keeps
    those directions.  Algebraic curves have only polynomially many bits of
    dynamic range and start at 64 k + 256.  Precision is escalated further
    on demand.
    """
    if _polynomial_degree(curve) is not None:
        return max(512, 64 * k + 256)
    return max(512, 64 * k + 256, 12 * k * k + 256)


# ---------------------------------------------------------------------------
# sup norms on circles


def _circle(r, samples):
    r = mpf(r)
    return [mpc(r, 0)] + [r * mpmath.expjpi(mpf(2 * n) / samples) for n in range(1, samples)]


def sup_norm_on_circle(s: TaylorSeries, r, samples: int = DEFAULT_SUP_SAMPLES):
    """max of ln|s(z)| over `samples` equispaced points of |z| = r."""
    if samples < 64:
        raise ValueError("samples must be at least 64")
    with mpmath.workprec(s.precision_bits):
        if s.is_real_nonnegative:
            return series_eval(s, LogComplex.polar(r)).log_mag
        return max_log_abs_on_circle(s, r, samples)


def bernstein_index(s: TaylorSeries, r, grid: int = 16, samples: int = DEFAULT_SUP_SAMPLES):
    """max over s_i = (r/e) e^{-i/4}, i < grid, of m(e s_i) - m(s_i)."""
    if grid < 8:
        raise ValueError("grid must be at least 8")
    with mpmath.workprec(s.precision_bits):
        top = mpf(r) / mpmath.e
        best = None
        for i in range(grid):
            si = top * mpmath.exp(-mpf(i) / 4)
            v = sup_norm_on_circle(s, mpmath.e * si, samples) - sup_norm_on_circle(s, si, samples)
            best = v if best is None or v > best else best
    return best


# ---------------------------------------------------------------------------
# monomial values at nodes


def _coordinate_values(spec: EntireFunctionSpec, zs, prec):
    return [evaluate(spec, z, prec).to_mpc() for z in zs]


def _monomial_values(curve: CurveSpec, basis, zs, prec):
    """rows[c][n] = b_{basis[c]}(zs[n])."""
    k = max((sum(g) for g in basis), default=0)
    with mpmath.workprec(prec + 16):
        coord_vals = [_coordinate_values(spec, zs, prec + 16) for spec in curve.coords]
        rows = [[None] * len(zs) for _ in basis]
        for n, z in enumerate(zs):
            pw = [[mpc(1)] for _ in range(curve.m + 1)]
            bases = [z] + [cv[n] for cv in coord_vals]
            for i, b in enumerate(bases):
                for _ in range(k):
                    pw[i].append(pw[i][-1] * b)
            for c, g in enumerate(basis):
                v = pw[0][g[0]]
                for i in range(1, curve.m + 1):
                    if g[i]:
                        v = v * pw[i][g[i]]
                rows[c][n] = v
    return rows


def coordinate_bandwidth(spec: EntireFunctionSpec, radius) -> int:
    """Central index of the coordinate's Taylor series on |z| = radius."""
    lr = math.log(float(radius))
    if spec.kind == "polynomial":
        return max(1, len(spec.params["coeffs"]) - 1)
    if spec.kind == "exp_polynomial":
        m, eps = exp_poly_degree_type(spec)
        return max(1, math.ceil(eps * float(radius)) + m)
    lm = _float_log_mags(spec, 512)
    if lm is None:
        lm = np.array(coefficients_of(spec, 256, 128).float_log_mags)
    vals = lm + np.arange(lm.size) * lr
    return max(1, int(np.argmax(vals)))


def curve_bandwidth(curve: CurveSpec, radius) -> int:
    return max(coordinate_bandwidth(s, radius) for s in curve.coords)


def _to_fixed(x: mpf, shift: int) -> int:
    """floor-ish of x * 2^shift as a Python int, read off the mantissa."""
    sign, man, exp, _ = x._mpf_
    if not man:
        return 0
    e = exp + shift
    v = int(man) << e if e >= 0 else int(man) >> -e
    return -v if sign else v


class _GramAccumulator:
    """Integer sums of conj(b_a) b_b over node batches with fixed column scales."""

    def __init__(self, d: int, prec: int, real: bool):
        self.d, self.prec, self.real = d, prec, real
        self.shifts: Optional[list] = None
        self.re = None
        self.im = None
        self.count = 0

    def add(self, rows):
        if self.shifts is None:
            self.shifts = []
            for row in rows:
                big = max(max(abs(v.real), abs(v.imag)) for v in row)
                e = int(mpmath.floor(mpmath.log(big, 2))) if big > 0 else 0
                self.shifts.append(self.prec - e - 1)
        R = fmpz_mat([[_to_fixed(v.real, s) for v in row] for row, s in zip(rows, self.shifts)])
        I = fmpz_mat([[_to_fixed(v.imag, s) for v in row] for row, s in zip(rows, self.shifts)])
        Rt, It = R.transpose(), I.transpose()
        re = R * Rt + I * It
        im = None if self.real else R * It - I * Rt
        self.re = re if self.re is None else self.re + re
        if im is not None:
            self.im = im if self.im is None else self.im + im
        self.count += len(rows[0])

    def matrix(self, prec: int):
        d, N = self.d, self.count
        out = [[None] * d for _ in range(d)]
        with mpmath.workprec(prec):
            for a in range(d):
                for b in range(d):
                    sc = -(self.shifts[a] + self.shifts[b])
                    re = mpmath.ldexp(mpf(int(self.re[a, b])), sc) / N
                    if self.real:
                        out[a][b] = re
                    else:
                        im = mpmath.ldexp(mpf(int(self.im[a, b])), sc) / N
                        out[a][b] = mpc(re, im)
        return out


def _max_abs(G):
    return max(abs(x) for row in G for x in row)


def gram_matrices(k: int, curve: CurveSpec, r, precision_bits: Optional[int] = None) -> GramPair:
    """Trapezoid-rule Gram matrices of the restricted monomials on |z| = r and |z| = e r."""
    prec = precision_bits or default_gram_precision(k, curve)
    basis = multi_indices(curve.m + 1, k)
    d = len(basis)
    real = curve.has_real_coefficients
    with mpmath.workprec(prec):
        r = mpf(r)
        radii = (r, mpmath.e * r)
        deg = _polynomial_degree(curve)
        if deg is not None:
            # integrands are trigonometric polynomials of degree <= k*deg,
            # so the trapezoid rule is exact once N > 2*k*deg
            N = max(16, 2 * k * deg + 2)
        else:
            N = max(16, 4 * max(k, 1) * max(8, curve_bandwidth(curve, radii[1])))
        accs = [_GramAccumulator(d, prec, real) for _ in radii]

        def batch(acc, rad, idx, total):
            zs = [rad * mpmath.expjpi(mpf(2 * n) / total) if n else mpc(rad, 0) for n in idx]
            if real:
                # conjugate symmetry: b(conj z) = conj b(z) exactly
                half = [i for i, n in enumerate(idx) if 2 * n <= total]
                vals = _monomial_values(curve, basis, [zs[i] for i in half], prec)
                pos = {n: i for i, n in enumerate(idx[j] for j in half)}
                rows = []
                for row in vals:
                    full = []
                    for n in idx:
                        if 2 * n <= total:
                            full.append(row[pos[n]])
                        else:
                            full.append(mpmath.conj(row[pos[total - n]]))
                    rows.append(full)
            else:
                rows = _monomial_values(curve, basis, zs, prec)
            acc.add(rows)

        for acc, rad in zip(accs, radii):
            batch(acc, rad, list(range(N)), N)
        grams = [acc.matrix(prec) for acc in accs]
        stable = deg is not None
        for _ in range(0 if stable else MAX_DOUBLINGS):
            prev = [_max_abs(G) for G in grams]
            N2 = 2 * N
            # the new odd-indexed nodes are closed under conjugation as well
            for acc, rad in zip(accs, radii):
                batch(acc, rad, list(range(1, N2, 2)), N2)
            N = N2
            grams = [acc.matrix(prec) for acc in accs]
            cur = [_max_abs(G) for G in grams]
            if all(abs(c - p) <= mpmath.ldexp(c, -64) for c, p in zip(cur, prev)):
                stable = True
                break
        if not stable:
            raise QuadratureNotStabilized(f"Gram entries still moving after {MAX_DOUBLINGS} doublings (N={N})")
    return GramPair(k, float(r), grams[0], grams[1], N, prec, basis, real)


# ---------------------------------------------------------------------------
# pencil reduction


def _pivoted_cholesky(G, prec: int, real: bool):
    """Diagonal-pivoted Cholesky of a Hermitian PSD matrix.

    Stops at the first pivot below 2^(-prec/2) times the trace.  Returns
    (perm, rank, L, remaining, trace): L[i][j] for i >= j holds the factor in
    permuted positions for all d rows, and `remaining` is the Schur
    complement diagonal at the stopping point.
    """
    d = len(G)
    with mpmath.workprec(prec):
        A = [[+G[i][j] for j in range(d)] for i in range(d)]
        re = (lambda x: x) if real else (lambda x: x.real)
        trace = sum(re(A[i][i]) for i in range(d))
        thr = mpmath.ldexp(trace, -prec // 2)
        perm = list(range(d))
        L = [[None] * d for _ in range(d)]
        rank = 0
        for j in range(d):
            p = max(range(j, d), key=lambda i: re(A[perm[i]][perm[i]]))
            perm[j], perm[p] = perm[p], perm[j]
            L[j], L[p] = L[p], L[j]
            pj = perm[j]
            dj = re(A[pj][pj])
            if dj < thr:
                break
            s = mpmath.sqrt(dj)
            L[j][j] = s
            rest = perm[j + 1:]
            col = [A[q][pj] / s for q in rest]
            cc = col if real else [mpmath.conj(c) for c in col]
            for i, q in enumerate(rest):
                ci = col[i]
                if ci == 0:
                    continue
                Aq = A[q]
                for l, ql in enumerate(rest):
                    Aq[ql] -= ci * cc[l]
            for i in range(j + 1, d):
                L[i][j] = col[i - j - 1]
            rank += 1
        remaining = [re(A[perm[i]][perm[i]]) for i in range(rank, d)]
    return perm, rank, L, remaining, trace


def _to_flint(rows, real: bool):
    if real:
        return arb_mat([[arb(x) for x in row] for row in rows])
    return acb_mat([[acb(arb(x.real), arb(x.imag)) for x in row] for row in rows])


def _block(M, i0, i1, j0, j1, real: bool):
    t = M.table()
    rows = [t[i][j0:j1] for i in range(i0, i1)]
    return (arb_mat if real else acb_mat)(rows) if rows and rows[0] else None


def _tri_inverse(L, real: bool):
    """Inverse of a lower-triangular flint matrix by recursive blocking."""
    n = L.nrows()
    if n <= 16:
        t = L.table()
        zero = arb(0) if real else acb(0)
        X = [[zero] * n for _ in range(n)]
        for j in range(n):
            X[j][j] = (1 / t[j][j]).mid()
            for i in range(j + 1, n):
                acc = zero
                for l in range(j, i):
                    acc += t[i][l] * X[l][j]
                X[i][j] = (-acc / t[i][i]).mid()
        return (arb_mat if real else acb_mat)(X)
    h = n // 2
    A = _block(L, 0, h, 0, h, real)
    C = _block(L, h, n, 0, h, real)
    D = _block(L, h, n, h, n, real)
    Ai = _tri_inverse(A, real)
    Di = _tri_inverse(D, real)
    Ci = (-(Di * C * Ai)).mid()
    ta, tc, td = Ai.table(), Ci.table(), Di.table()
    zero = arb(0) if real else acb(0)
    rows = [ta[i] + [zero] * (n - h) for i in range(h)] + [tc[i] + td[i] for i in range(n - h)]
    return (arb_mat if real else acb_mat)(rows)


def _adjoint(M, real: bool):
    return M.transpose() if real else M.conjugate().transpose()


def _power_iteration(M, real: bool, d: int):
    n = M.nrows()
    v = (arb_mat if real else acb_mat)([[1]] * n)
    lam_prev, lam = None, None
    it = 0
    tol = arb(2) ** -64
    for it in range(1, 10 * d + 1):
        u = (M * v).mid()
        num = (_adjoint(v, real) * u)[0, 0]
        den = (_adjoint(v, real) * v)[0, 0]
        lam = (num.real if not real else num) / (den.real if not real else den)
        lam = lam.mid()
        nrm = (_adjoint(u, real) * u)[0, 0]
        nrm = (nrm.real if not real else nrm).sqrt().mid()
        v = (u * (1 / nrm)).mid()
        if lam_prev is not None and abs(lam - lam_prev) < (abs(lam) * tol):
            return lam, v, it, True
        lam_prev = lam
    return lam, v, it, False


def _arb_to_mpf(x):
    man, exp = x.mid().man_exp()
    return mpf((int(man), int(exp)))


def _reduce_pencil(gp: GramPair):
    """lambda_max of (outer, inner) after whitening the inner Gram."""
    prec, real, d = gp.precision_bits, gp.real, gp.d
    old_prec = ctx.prec
    ctx.prec = prec
    try:
        perm, rank, L, remaining, trace_in = _pivoted_cholesky(gp.inner_gram, prec, real)
        if rank == 0:
            raise GramSingular("inner Gram vanishes to working precision")
        L11 = _to_flint([[L[i][j] if j <= i else 0 for j in range(rank)] for i in range(rank)], real)
        Linv = _tri_inverse(L11, real)
        Go = gp.outer_gram
        Gpp = _to_flint([[Go[perm[i]][perm[j]] for j in range(rank)] for i in range(rank)], real)
        M = (Linv * Gpp * _adjoint(Linv, real)).mid()
        lam, v, iters, converged = _power_iteration(M, real, d)
        deflated = d - rank
        suspicious = False
        outer_leak = False
        if deflated:
            with mpmath.workprec(prec):
                worst = max(remaining)
                suspicious = worst > mpmath.ldexp(trace_in, -(3 * prec) // 4)
                # outer norm of each deflated direction x = e_i - (projection on kept pivots)
                L21 = _to_flint([[L[i][j] for j in range(rank)] for i in range(rank, d)], real)
                Y = (_adjoint(Linv, real) * _adjoint(L21, real)).mid()
                Gfull = _to_flint([[Go[perm[i]][perm[j]] for j in range(d)] for i in range(d)], real)
                yt = Y.table()
                one, zero = (arb(1), arb(0)) if real else (acb(1), acb(0))
                X = [[-yt[i][c] for c in range(deflated)] for i in range(rank)]
                X += [[one if c == i else zero for c in range(deflated)] for i in range(deflated)]
                Xm = (arb_mat if real else acb_mat)(X)
                Q = (_adjoint(Xm, real) * Gfull * Xm).mid()
                trace_out = sum((Go[i][i] if real else Go[i][i].real) for i in range(d))
                qmax = max(_arb_to_mpf(Q[c, c] if real else Q[c, c].real) for c in range(deflated))
                outer_leak = qmax > mpmath.ldexp(trace_out, -prec // 2)
        coeff = (_adjoint(Linv, real) * v).mid()
        vec = [mpc(0)] * d
        with mpmath.workprec(prec):
            for i in range(rank):
                x = coeff[i, 0]
                vec[perm[i]] = mpc(_arb_to_mpf(x)) if real else mpc(_arb_to_mpf(x.real), _arb_to_mpf(x.imag))
            lam_mpf = _arb_to_mpf(lam)
        return {
            "lam": lam_mpf, "rank": rank, "deflated": deflated, "iterations": iters, "converged": converged,
            "suspicious": suspicious, "outer_leak": outer_leak, "vector": vec,
        }
    finally:
        ctx.prec = old_prec


def extremal_quotient(k: int, curve: CurveSpec, r, precision_bits: Optional[int] = None) -> QuotientEstimate:
    """L2 surrogate of the degree-k Bernstein quotient on |z| <= r versus |z| <= e r."""
    r = float(r)
    if k == 0:
        return QuotientEstimate(0, r, 0.0, "gram_l2", precision_bits or default_gram_precision(0), 1,
                                curve.label, {"rank": 1, "deflated": 0})
    prec = precision_bits or default_gram_precision(k, curve)
    escalations = 0
    while True:
        gp = gram_matrices(k, curve, r, prec)
        red = _reduce_pencil(gp)
        if not (red["suspicious"] or red["outer_leak"]):
            break
        if prec * 2 > MAX_GRAM_PRECISION:
            raise GramSingular(
                f"k={k}: {red['deflated']} deflated directions still carry outer mass at {prec} bits")
        prec *= 2
        escalations += 1
    d = gp.d
    with mpmath.workprec(prec):
        logq = float(mpmath.log(red["lam"]) / 2)
        p = GraphPolynomial.from_vector(k, curve.m, red["vector"])
    deg = _polynomial_degree(curve)
    n0 = max(16, 2 * k * deg + 2) if deg is not None else max(16, 4 * k * max(8, curve_bandwidth(curve, math.e * r)))
    meta = {
        "rank": red["rank"], "deflated": red["deflated"], "iterations": red["iterations"],
        "converged": red["converged"], "quad_points": gp.quad_points, "escalations": escalations,
        "l2_sup_gap": math.log(d) + 0.5 * math.log(gp.quad_points / n0),
        "extremal_poly": p,
    }
    return QuotientEstimate(k, r, max(logq, 0.0), "gram_l2", prec, gp.quad_points, curve.label, meta)


# ---------------------------------------------------------------------------
# single polynomials


def graph_values(p: GraphPolynomial, curve: CurveSpec, zs, prec: int):
    """p(z, f(z)) at the given points, evaluated directly from the coordinates.

    Returns acb values and, per point, the sum of the moduli of the
    individual terms (the scale against which cancellation is judged).
    """
    basis = list(p.coeffs)
    k = max((sum(g) for g in basis), default=0)
    with mpmath.workprec(prec + 16):
        coord_vals = [_coordinate_values(spec, zs, prec + 16) for spec in curve.coords]
    out, scale = [], []
    with flint_precision(prec + 16):
        coeffs = [to_acb(p.coeffs[g]) for g in basis]
        for n, z in enumerate(zs):
            bases = [to_acb(z)] + [to_acb(cv[n]) for cv in coord_vals]
            pw = []
            for b in bases:
                row = [acb(1)]
                for _ in range(k):
                    row.append(row[-1] * b)
                pw.append(row)
            acc, mag = acb(0), arb(0)
            for c, g in zip(coeffs, basis):
                term = c
                for i, e in enumerate(g):
                    if e:
                        term = term * pw[i][e]
                acc += term
                mag += abs(term)
            out.append(acc.mid())
            scale.append(mag.mid())
    return out, scale


def _log_sup_on_circle(p, curve, r, samples, prec):
    with mpmath.workprec(prec):
        zs = _circle(r, samples)
        vals, scale = graph_values(p, curve, zs, prec)
        with flint_precision(prec + 16):
            top = arb_to_mpf(max(abs(v).mid() for v in vals))
            ref = arb_to_mpf(max(scale))
        if top <= mpmath.ldexp(ref, -prec // 2):
            return None
        return mpmath.log(top)


def quotient_of_polynomial(p: GraphPolynomial, curve: CurveSpec, r, samples: int = DEFAULT_SUP_SAMPLES,
                           precision_bits: Optional[int] = None) -> float:
    """Sampled sup of ln|p_f| on |z| = e r minus the same on |z| = r."""
    prec = precision_bits or max(512, 64 * p.k + 256)
    if p.is_zero:
        raise RestrictedIdenticallyZero("zero polynomial")
    with mpmath.workprec(prec):
        r = mpf(r)
        outer = _log_sup_on_circle(p, curve, mpmath.e * r, samples, prec)
        inner = _log_sup_on_circle(p, curve, r, samples, prec)
        if outer is None or inner is None:
            raise RestrictedIdenticallyZero("p vanishes on the graph to working precision")
        return float(outer - inner)


def random_search(k: int, curve: CurveSpec, r, draws: int, rng, samples: int = 512,
                  precision_bits: Optional[int] = None) -> QuotientEstimate:
    """Best quotient over `draws` random polynomials (a lower bound)."""
    best, best_p = -math.inf, None
    for _ in range(draws):
        p = random_graph_polynomial(k, curve.m, rng)
        try:
            q = quotient_of_polynomial(p, curve, r, samples, precision_bits)
        except RestrictedIdenticallyZero:
            continue
        if q > best:
            best, best_p = q, p
    return QuotientEstimate(k, float(r), max(best, 0.0), "random_search", precision_bits or max(512, 64 * k + 256),
                            samples, curve.label, {"draws": draws, "best_poly": best_p})


def kernel_witness_estimate(p: GraphPolynomial, curve: CurveSpec, r, samples: int = DEFAULT_SUP_SAMPLES,
                            precision_bits: Optional[int] = None) -> QuotientEstimate:
    q = quotient_of_polynomial(p, curve, r, samples, precision_bits)
    return QuotientEstimate(p.k, float(r), q, "kernel_witness", precision_bits or max(512, 64 * p.k + 256),
                            samples, curve.label, {})


# ---------------------------------------------------------------------------
# exponential polynomial bound


def verify_exp_poly_bound(g: EntireFunctionSpec, r, samples: int = 4096):
    """(lhs, rhs, holds) for m_g(e r) - m_g(r) <= m(g) + 2 e r eps(g)."""
    if g.kind != "exp_polynomial":
        raise ValueError("verify_exp_poly_bound needs an exp_polynomial spec")
    m, eps = exp_poly_degree_type(g)
    with mpmath.workprec(128):
        r = mpf(r)
        lhs = float(growth_m(g, mpmath.e * r, samples, 128) - growth_m(g, r, samples, 128))
    rhs = m + 2 * math.e * float(r) * eps
    return lhs, rhs, lhs <= rhs + 1e-9
