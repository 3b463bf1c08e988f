"""Declarative entire functions, their Taylor coefficients and growth.

A function is described by an :class:`EntireFunctionSpec` (``kind`` plus a
JSON-compatible ``params`` mapping).  From a spec we can materialize Taylor
coefficients, evaluate ln|f| on circles, and compute growth quantities:

* m_f(r), the log of the maximum modulus on |z| = r (sampled),
* phi_f(t) = m_f(e^t),
* nu_f(t) = max_j (ln|c_j| + j t),
* an order estimate from the coefficients.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import mpmath
import numpy as np
from flint import acb, arb
from mpmath import mpc, mpf

from .errors import (
    AllCoefficientsZero,
    DuplicateFrequency,
    InverseNotBracketed,
    MaximizerAtBoundary,
    TailNotConverged,
    UnsupportedDepth,
)
from .numerics import (
    DEFAULT_PRECISION,
    LN2,
    LogComplex,
    TaylorSeries,
    arb_to_mpf,
    flint_precision,
    log_sum_exp_complex,
    max_log_abs_on_circle,
    series_eval,
    series_exp,
    to_acb,
)

KINDS = ("exp_polynomial", "taylor_rule", "theorem_1_11", "iterated_exp", "exp_of", "polynomial")
H_KINDS = ("power", "exponential", "shifted", "tabulated")
MAX_ITERATED_DEPTH = 4
DEFAULT_SAMPLES = 256
# estimated orders above this count as infinite when routing class checks
INFINITE_ORDER_THRESHOLD = 50.0
MAX_SERIES_TERMS = 1 << 18


# ---------------------------------------------------------------------------
# complex parameter encoding


def encode_complex(z) -> list:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def decode_complex(v):
    """Accept a number, [re, im] or {"re": .., "im": ..} and return an mpc."""
    if isinstance(v, dict):
        return mpc(mpf(v.get("re", 0)), mpf(v.get("im", 0)))
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError(f"complex value must be [re, im], got {v!r}")
        return mpc(mpf(v[0]), mpf(v[1]))
    if isinstance(v, str):
        return mpmath.mpmathify(v)
    return mpmath.mpmathify(v)


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# h functions of the coefficient construction


@dataclass(frozen=True)
class HSpec:
    """An increasing function h on R+ used to build f_h.

    kinds and params:
      power        {"alpha": a}            h(t) = (t/a)^(1/(a-1)), 1 < a < 2
      exponential  {"alpha": a}            h(t) = exp(a t - 1) - 1, a > 0
      shifted      {"base": HSpec, "c": c} h(t) = base(t) - c, c > 0
      tabulated    {"t": [...], "h": [...]} piecewise linear through the table
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in H_KINDS:
            raise ValueError(f"unknown HSpec kind {self.kind!r}")
        p = self.params
        if self.kind in ("power", "exponential"):
            a = float(p["alpha"])
            if self.kind == "power" and not 1 < a < 2:
                raise ValueError("power HSpec needs alpha in (1, 2)")
            if self.kind == "exponential" and not a > 0:
                raise ValueError("exponential HSpec needs alpha > 0")
        elif self.kind == "shifted":
            base = p["base"]
            if isinstance(base, dict):
                object.__setattr__(self, "params", {**p, "base": HSpec.from_dict(base)})
            if not float(p["c"]) > 0:
                raise ValueError("shift constant must be positive")
        else:
            t, h = list(map(float, p["t"])), list(map(float, p["h"]))
            if len(t) != len(h) or len(t) < 2:
                raise ValueError("tabulated HSpec needs matching t and h tables of length >= 2")
            if any(b <= a for a, b in zip(t, t[1:])) or any(b <= a for a, b in zip(h, h[1:])):
                raise ValueError("tabulated HSpec needs strictly increasing tables")

    @classmethod
    def power(cls, alpha) -> "HSpec":
        return cls("power", {"alpha": alpha})

    @classmethod
    def exponential(cls, alpha) -> "HSpec":
        return cls("exponential", {"alpha": alpha})

    @classmethod
    def shifted(cls, base: "HSpec", c) -> "HSpec":
        return cls("shifted", {"base": base, "c": c})

    @classmethod
    def tabulated(cls, t, h) -> "HSpec":
        return cls("tabulated", {"t": list(t), "h": list(h)})

    @classmethod
    def from_dict(cls, d: dict) -> "HSpec":
        return cls(d["kind"], dict(d.get("params", {})))

    def to_dict(self) -> dict:
        p = dict(self.params)
        if self.kind == "shifted":
            p["base"] = p["base"].to_dict()
        return {"kind": self.kind, "params": p}

    @property
    def base(self) -> "HSpec":
        return self.params["base"]

    @property
    def below_table(self) -> bool:
        """True when a tabulated h must be extrapolated to reach h = 0."""
        return self.kind == "tabulated" and float(self.params["h"][0]) > 0

    def h(self, t):
        t = mpf(t)
        k, p = self.kind, self.params
        if k == "power":
            a = mpf(p["alpha"])
            return (t / a) ** (1 / (a - 1)) if t > 0 else mpf(0)
        if k == "exponential":
            a = mpf(p["alpha"])
            return mpmath.exp(a * t - 1) - 1
        if k == "shifted":
            return self.base.h(t) - mpf(p["c"])
        return _interp(t, p["t"], p["h"])

    def h_inv(self, s):
        s = mpf(s)
        k, p = self.kind, self.params
        if k == "power":
            a = mpf(p["alpha"])
            return a * s ** (a - 1) if s > 0 else mpf(0)
        if k == "exponential":
            a = mpf(p["alpha"])
            return (1 + mpmath.log1p(s)) / a
        if k == "shifted":
            return self.base.h_inv(s + mpf(p["c"]))
        hs, ts = p["h"], p["t"]
        if s > hs[-1]:
            raise InverseNotBracketed(f"h^-1({mpmath.nstr(s, 8)}) lies beyond the table maximum {hs[-1]}")
        return _interp(s, hs, ts)

    def h_inv_zero(self):
        """h^{-1}(0), the lower limit of the growth integral."""
        return self.h_inv(0)

    def log_coefficient(self, j):
        """ln c_j = -int_0^j h^{-1}(s) ds."""
        j = mpf(j)
        if j == 0:
            return mpf(0)
        k, p = self.kind, self.params
        if k == "power":
            return -(j ** mpf(p["alpha"]))
        if k == "exponential":
            return -(j + 1) * mpmath.log(j + 1) / mpf(p["alpha"])
        if k == "shifted":
            c = mpf(p["c"])
            return self.base.log_coefficient(j + c) - self.base.log_coefficient(c)
        return -self._tabulated_inverse_integral(0, j)

    def _tabulated_inverse_integral(self, a, b):
        hs = [mpf(x) for x in self.params["h"]]
        if b > hs[-1]:
            raise InverseNotBracketed(f"integral of h^-1 up to {mpmath.nstr(b, 8)} exceeds table range {hs[-1]}")
        pts = [mpf(a)] + [x for x in hs if a < x < b] + [mpf(b)]
        with mpmath.workprec(2 * mpmath.mp.prec):
            val = mpmath.quad(self.h_inv, pts)
        return +val

    def growth_integral(self, t):
        """int_{h^{-1}(0)}^t h(s) ds (closed form where available)."""
        t = mpf(t)
        k, p = self.kind, self.params
        if k == "power":
            a = mpf(p["alpha"])
            return (a - 1) * (t / a) ** (a / (a - 1)) if t > 0 else mpf(0)
        if k == "exponential":
            a = mpf(p["alpha"])
            return mpmath.exp(a * t - 1) / a - t
        if k == "shifted":
            c = mpf(p["c"])
            t0 = self.h_inv_zero()
            base = self.base
            return base.growth_integral(t) - base.growth_integral(t0) - c * (t - t0)
        t0 = self.h_inv_zero()
        ts = [mpf(x) for x in p["t"]]
        pts = [t0] + [x for x in ts if t0 < x < t] + [t]
        return mpmath.quad(self.h, pts)

    def antiderivative_between(self, a, b):
        """int_a^b h(s) ds."""
        return self.growth_integral(b) - self.growth_integral(a)

    def float_log_coefficients(self, J: int) -> np.ndarray:
        """ln c_j for j = 0..J in double precision (used to size series)."""
        j = np.arange(J + 1, dtype=float)
        k, p = self.kind, self.params
        if k == "power":
            return -(j ** float(p["alpha"]))
        if k == "exponential":
            return -(j + 1) * np.log(j + 1) / float(p["alpha"])
        if k == "shifted":
            c = float(p["c"])
            base = self.base
            if base.kind in ("power", "exponential"):
                shifted = HSpec(base.kind, base.params)
                whole = _float_closed_log_coeff(shifted, j + c)
                return whole - _float_closed_log_coeff(shifted, np.array([c]))[0]
        return np.array([float(self.log_coefficient(i)) for i in range(J + 1)])


def _float_closed_log_coeff(h: HSpec, x: np.ndarray) -> np.ndarray:
    a = float(h.params["alpha"])
    if h.kind == "power":
        return -(x ** a)
    return -(x + 1) * np.log(x + 1) / a


def _interp(x, xs, ys):
    """Piecewise linear interpolation with linear extension at both ends."""
    xs = [mpf(v) for v in xs]
    ys = [mpf(v) for v in ys]
    if x <= xs[0]:
        i = 0
    elif x >= xs[-1]:
        i = len(xs) - 2
    else:
        lo, hi = 0, len(xs) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if xs[mid] <= x:
                lo = mid
            else:
                hi = mid
        i = lo
    x0, x1, y0, y1 = xs[i], xs[i + 1], ys[i], ys[i + 1]
    return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


# ---------------------------------------------------------------------------
# function specs


@dataclass(frozen=True)
class EntireFunctionSpec:
    """A declarative entire function.

    params per kind:
      polynomial      {"coeffs": [c0, c1, ...]}
      exp_polynomial  {"terms": [{"p": [coeffs], "q": freq}, ...]}
      taylor_rule     {"rule": name, "args": {...}, "phase": {"rule": "zero"|"alternating"|"linear", "theta": x}}
      theorem_1_11    {"h": HSpec document}
      iterated_exp    {"depth": p, "scale": n}      e^{o p}(n z)
      exp_of          {"inner": EntireFunctionSpec document}
    Complex numbers are written as plain numbers or [re, im].
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}")
        p = self.params
        if self.kind == "iterated_exp":
            if int(p["depth"]) < 1:
                raise ValueError("iterated_exp depth must be >= 1")
            if not float(p["scale"]) > 0:
                raise ValueError("iterated_exp scale must be positive")
        elif self.kind == "exp_polynomial":
            if not p.get("terms"):
                raise ValueError("exp_polynomial needs at least one term")
        elif self.kind == "polynomial":
            if not p.get("coeffs"):
                raise ValueError("polynomial needs a coefficient list")
        elif self.kind == "taylor_rule":
            if p.get("rule") not in TAYLOR_RULES:
                raise ValueError(f"unknown taylor rule {p.get('rule')!r}")
        elif self.kind == "theorem_1_11":
            if not isinstance(p.get("h"), HSpec):
                object.__setattr__(self, "params", {**p, "h": HSpec.from_dict(p["h"])})
        elif self.kind == "exp_of":
            if not isinstance(p.get("inner"), EntireFunctionSpec):
                object.__setattr__(self, "params", {**p, "inner": EntireFunctionSpec.from_dict(p["inner"])})

    # constructors -----------------------------------------------------------

    @classmethod
    def polynomial(cls, coeffs: Sequence) -> "EntireFunctionSpec":
        return cls("polynomial", {"coeffs": [_enc(c) for c in coeffs]})

    @classmethod
    def exp_polynomial(cls, terms: Sequence) -> "EntireFunctionSpec":
        """terms: iterable of (polynomial coefficient list, frequency)."""
        return cls("exp_polynomial", {"terms": [{"p": [_enc(c) for c in p], "q": _enc(q)} for p, q in terms]})

    @classmethod
    def taylor_rule(cls, rule: str, phase: Optional[dict] = None, **args) -> "EntireFunctionSpec":
        params = {"rule": rule, "args": args}
        if phase:
            params["phase"] = phase
        return cls("taylor_rule", params)

    @classmethod
    def f_h(cls, h: HSpec) -> "EntireFunctionSpec":
        return cls("theorem_1_11", {"h": h})

    @classmethod
    def iterated_exp(cls, depth: int, scale=1) -> "EntireFunctionSpec":
        return cls("iterated_exp", {"depth": int(depth), "scale": scale})

    @classmethod
    def exp_of(cls, inner: "EntireFunctionSpec") -> "EntireFunctionSpec":
        return cls("exp_of", {"inner": inner})

    @classmethod
    def from_dict(cls, d: dict) -> "EntireFunctionSpec":
        return cls(d["kind"], dict(d.get("params", {})))

    def to_dict(self) -> dict:
        p = dict(self.params)
        if self.kind == "theorem_1_11":
            p["h"] = p["h"].to_dict()
        elif self.kind == "exp_of":
            p["inner"] = p["inner"].to_dict()
        return {"kind": self.kind, "params": p}

    @property
    def digest(self) -> str:
        return hashlib.sha256(_canonical(self.to_dict()).encode()).hexdigest()

    def __hash__(self):
        return hash(self.digest)

    def __eq__(self, other):
        return isinstance(other, EntireFunctionSpec) and self.digest == other.digest

    # structural facts --------------------------------------------------------

    @property
    def is_polynomial(self) -> bool:
        if self.kind == "polynomial":
            return True
        if self.kind == "exp_polynomial":
            return all(decode_complex(t["q"]) == 0 for t in self.params["terms"])
        return False

    @property
    def series_backed(self) -> bool:
        """Evaluation goes through a truncated Taylor series."""
        if self.kind in ("taylor_rule", "theorem_1_11"):
            return True
        if self.kind == "exp_of":
            return self.params["inner"].series_backed
        return False

    @property
    def has_nonnegative_coefficients(self) -> bool:
        k, p = self.kind, self.params
        if k == "theorem_1_11" or k == "iterated_exp":
            return True
        if k == "taylor_rule":
            return p.get("phase", {}).get("rule", "zero") == "zero"
        if k == "exp_of":
            return p["inner"].has_nonnegative_coefficients
        if k == "polynomial":
            return all(_nonneg_real(decode_complex(c)) for c in p["coeffs"])
        if k == "exp_polynomial":
            return all(_nonneg_real(decode_complex(t["q"])) and all(_nonneg_real(decode_complex(c)) for c in t["p"])
                       for t in p["terms"])
        return False

    @property
    def has_real_coefficients(self) -> bool:
        """f(conj z) = conj f(z), read off the spec."""
        k, p = self.kind, self.params
        if k in ("theorem_1_11", "iterated_exp"):
            return True
        if k == "taylor_rule":
            return p.get("phase", {}).get("rule", "zero") in ("zero", "alternating")
        if k == "exp_of":
            return p["inner"].has_real_coefficients
        if k == "polynomial":
            return all(decode_complex(c).imag == 0 for c in p["coeffs"])
        return all(decode_complex(t["q"]).imag == 0 and all(decode_complex(c).imag == 0 for c in t["p"])
                   for t in p["terms"])

    @property
    def structural_order(self):
        """Exact order when the spec determines it, else None."""
        k, p = self.kind, self.params
        if self.is_polynomial:
            return 0.0
        if k == "exp_polynomial":
            return 1.0
        if k == "iterated_exp":
            return 1.0 if int(p["depth"]) == 1 else math.inf
        if k == "exp_of":
            inner = p["inner"]
            if inner.kind == "polynomial":
                return float(_poly_degree([decode_complex(c) for c in inner.params["coeffs"]]))
            return math.inf
        return None

    @property
    def label(self) -> str:
        k, p = self.kind, self.params
        if k == "theorem_1_11":
            return f"f_h[{p['h'].kind}]"
        if k == "exp_of":
            return f"exp({p['inner'].label})"
        if k == "iterated_exp":
            return f"exp^{p['depth']}({p['scale']}z)"
        return k


def _enc(c):
    if isinstance(c, (list, tuple, dict, str)):
        return c
    z = complex(c)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _nonneg_real(z) -> bool:
    return z.imag == 0 and z.real >= 0


def _poly_degree(coeffs) -> int:
    for i in range(len(coeffs) - 1, -1, -1):
        if coeffs[i] != 0:
            return i
    return 0


@dataclass(frozen=True)
class CurveSpec:
    """An entire map f = (f_1, ..., f_m) from C to C^m."""

    coords: tuple
    label: str = ""

    def __post_init__(self):
        coords = tuple(c if isinstance(c, EntireFunctionSpec) else EntireFunctionSpec.from_dict(c)
                       for c in self.coords)
        if not coords:
            raise ValueError("a curve needs at least one coordinate")
        object.__setattr__(self, "coords", coords)
        if not self.label:
            object.__setattr__(self, "label", "(" + ", ".join(c.label for c in coords) + ")")

    @property
    def m(self) -> int:
        return len(self.coords)

    @classmethod
    def from_dict(cls, d: dict) -> "CurveSpec":
        return cls(tuple(EntireFunctionSpec.from_dict(c) for c in d["coords"]), d.get("label", ""))

    def to_dict(self) -> dict:
        return {"coords": [c.to_dict() for c in self.coords], "label": self.label}

    @property
    def digest(self) -> str:
        return hashlib.sha256(_canonical(self.to_dict()).encode()).hexdigest()

    @property
    def has_real_coefficients(self) -> bool:
        return all(c.has_real_coefficients for c in self.coords)

    def __hash__(self):
        return hash(self.digest)


# ---------------------------------------------------------------------------
# closed-form Taylor rules: ln|c_j| as a function of j


def _rule_inverse_factorial(j, args):
    return -mpmath.loggamma(j + 1)


def _rule_gaussian(j, args):
    return -mpf(args.get("a", 1)) * j * j


def _rule_power(j, args):
    return -(mpf(j) ** mpf(args["alpha"]))


def _rule_exp_type(j, args):
    j = mpf(j)
    return -(j + 1) * mpmath.log(j + 1) / mpf(args.get("alpha", 1))


def _rule_shifted_power(j, args):
    a, c = mpf(args["alpha"]), mpf(args["c"])
    return -((j + c) ** a) + c ** a


TAYLOR_RULES = {
    "inverse_factorial": _rule_inverse_factorial,
    "gaussian": _rule_gaussian,
    "power": _rule_power,
    "exp_type": _rule_exp_type,
    "shifted_power": _rule_shifted_power,
}


def _float_rule(rule: str, args: dict, J: int) -> np.ndarray:
    j = np.arange(J + 1, dtype=float)
    if rule == "inverse_factorial":
        from scipy.special import gammaln
        return -gammaln(j + 1)
    if rule == "gaussian":
        return -float(args.get("a", 1)) * j * j
    if rule == "power":
        return -(j ** float(args["alpha"]))
    if rule == "exp_type":
        return -(j + 1) * np.log(j + 1) / float(args.get("alpha", 1))
    a, c = float(args["alpha"]), float(args["c"])
    return -((j + c) ** a) + c ** a


def _phase(j, phase: dict):
    rule = phase.get("rule", "zero")
    if rule == "zero":
        return mpf(0)
    if rule == "alternating":
        return mpmath.pi * (j % 2)
    if rule == "linear":
        return mpf(phase.get("theta", 0)) * j
    raise ValueError(f"unknown phase rule {rule!r}")


# ---------------------------------------------------------------------------
# coefficients


def build_fh_coefficients(h: HSpec, J: int, precision_bits: int = DEFAULT_PRECISION) -> TaylorSeries:
    """Positive coefficients with ln c_j = -int_0^j h^{-1}."""
    if J < 0:
        raise ValueError("J must be nonnegative")
    with mpmath.workprec(precision_bits):
        if h.kind == "tabulated":
            logs, acc = [mpf(0)], mpf(0)
            for j in range(1, J + 1):
                acc -= h._tabulated_inverse_integral(j - 1, j)
                logs.append(acc)
        else:
            logs = [h.log_coefficient(j) for j in range(J + 1)]
    return TaylorSeries.from_log_mags(logs, precision_bits)


def _float_log_mags(spec: EntireFunctionSpec, J: int) -> Optional[np.ndarray]:
    """Cheap double-precision ln|c_j| for series-backed kinds."""
    if spec.kind == "taylor_rule":
        return _float_rule(spec.params["rule"], spec.params.get("args", {}), J)
    if spec.kind == "theorem_1_11":
        h = spec.params["h"]
        if h.kind == "tabulated":
            return None
        return h.float_log_coefficients(J)
    return None


@lru_cache(maxsize=64)
def _coefficients_cached(digest: str, spec_json: str, J: int, precision_bits: int) -> TaylorSeries:
    spec = EntireFunctionSpec.from_dict(json.loads(spec_json))
    return _coefficients(spec, J, precision_bits)


def coefficients_of(spec: EntireFunctionSpec, J: int, precision_bits: int = DEFAULT_PRECISION) -> TaylorSeries:
    """Taylor coefficients of f at 0 through degree J."""
    if J < 0:
        raise ValueError("J must be nonnegative")
    return _coefficients_cached(spec.digest, _canonical(spec.to_dict()), J, precision_bits)


def _coefficients(spec: EntireFunctionSpec, J: int, prec: int) -> TaylorSeries:
    k, p = spec.kind, spec.params
    with mpmath.workprec(prec):
        if k == "polynomial":
            vals = [decode_complex(c) for c in p["coeffs"]]
            exact = J >= _poly_degree(vals)
            vals = (vals + [0] * (J + 1))[: J + 1]
            return TaylorSeries.from_values(vals, prec, exact=exact)
        if k == "exp_polynomial":
            return _exp_poly_coefficients(p["terms"], J, prec)
        if k == "taylor_rule":
            fn = TAYLOR_RULES[p["rule"]]
            args = p.get("args", {})
            phase = p.get("phase", {})
            coeffs = [LogComplex(fn(j, args), _phase(j, phase)) for j in range(J + 1)]
            return TaylorSeries(tuple(coeffs), prec)
        if k == "theorem_1_11":
            return build_fh_coefficients(p["h"], J, prec)
        if k == "iterated_exp":
            depth, scale = int(p["depth"]), mpf(p["scale"])
            if depth > MAX_ITERATED_DEPTH:
                raise UnsupportedDepth(f"iterated_exp depth {depth} exceeds {MAX_ITERATED_DEPTH}")
            s = TaylorSeries.from_log_mags(
                [j * mpmath.log(scale) - mpmath.loggamma(j + 1) for j in range(J + 1)], prec)
            for _ in range(depth - 1):
                s = series_exp(s, J)
            return s
        inner = coefficients_of(p["inner"], J, prec)
        return series_exp(inner, J)


def _exp_poly_coefficients(terms, J: int, prec: int) -> TaylorSeries:
    parsed = [([decode_complex(c) for c in t["p"]], decode_complex(t["q"])) for t in terms]
    exact = all(q == 0 for _, q in parsed)
    out = []
    for n in range(J + 1):
        pieces = []
        for poly, q in parsed:
            for i, a in enumerate(poly):
                if a == 0 or i > n:
                    continue
                e = n - i
                if q == 0:
                    if e == 0:
                        pieces.append(LogComplex.from_complex(a))
                    continue
                lm = mpmath.log(abs(a)) + e * mpmath.log(abs(q)) - mpmath.loggamma(e + 1)
                pieces.append(LogComplex(lm, mpmath.arg(a) + e * mpmath.arg(q)))
        out.append(log_sum_exp_complex(pieces) if pieces else LogComplex.zero())
    if exact:
        exact = J >= max(_poly_degree(p) for p, _ in parsed)
    return TaylorSeries(tuple(out), prec, exact)


# ---------------------------------------------------------------------------
# sizing truncated series


def _tail_ok(lm: np.ndarray, log_r: float, guard_bits: int) -> bool:
    nz = np.flatnonzero(np.isfinite(lm))
    if len(nz) < 2:
        return False
    window = nz[-11:]
    terms = lm[window] + window * log_r
    steps = np.diff(terms) / np.diff(window)
    worst = steps.max()
    if worst > -LN2:
        return False
    top = np.max(lm[nz] + nz * log_r)
    tail = terms[-1] + worst - math.log1p(-math.exp(worst))
    return tail <= top - guard_bits * LN2


def required_terms(spec: EntireFunctionSpec, log_r: float, guard_bits: int = 64) -> int:
    """Smallest power-of-two-ish J whose truncation passes the tail test at |z| = e^log_r."""
    J = 64
    while J <= MAX_SERIES_TERMS:
        lm = _float_log_mags(spec, J)
        if lm is None:
            return _required_terms_generic(spec, log_r, guard_bits)
        if _tail_ok(lm, log_r, guard_bits):
            # trim to the first J that works, to avoid carrying dead weight
            lo, hi = J // 2, J
            while hi - lo > 8:
                mid = (lo + hi) // 2
                if _tail_ok(lm[: mid + 1], log_r, guard_bits):
                    hi = mid
                else:
                    lo = mid
            return hi
        J *= 2
    raise TailNotConverged(f"{spec.label}: more than {MAX_SERIES_TERMS} terms needed at log|z|={log_r:.4g}")


def _required_terms_generic(spec, log_r, guard_bits, precision_bits=128) -> int:
    J = 64
    while J <= 1 << 14:
        s = coefficients_of(spec, J, precision_bits)
        lm = np.array(s.float_log_mags)
        if _tail_ok(lm, log_r, guard_bits):
            return J
        J *= 2
    raise TailNotConverged(f"{spec.label}: series too long at log|z|={log_r:.4g}")


def series_for_radius(spec: EntireFunctionSpec, r, precision_bits: int = DEFAULT_PRECISION,
                      guard_bits: int = 64) -> TaylorSeries:
    J = required_terms(spec, float(mpmath.log(r)), guard_bits)
    return coefficients_of(spec, J, precision_bits)


# ---------------------------------------------------------------------------
# evaluation


def _poly_eval(coeffs, z):
    acc = mpc(0)
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def _log_exp_poly(terms, z) -> LogComplex:
    pieces = []
    for t in terms:
        pz = _poly_eval([decode_complex(c) for c in t["p"]], z)
        if pz == 0:
            continue
        qz = decode_complex(t["q"]) * z
        pieces.append(LogComplex(mpmath.log(abs(pz)) + qz.real, mpmath.arg(pz) + qz.imag))
    if not pieces:
        return LogComplex.zero()
    return log_sum_exp_complex(pieces)


def _max_log_abs_exp_poly(terms, r, samples: int, precision_bits: int):
    """Circle maximum of ln|sum p_i(z) e^{q_i z}| in python-flint; None on total cancellation."""
    with flint_precision(precision_bits + 32):
        polys = [([to_acb(decode_complex(c)) for c in t["p"]], to_acb(decode_complex(t["q"]))) for t in terms]
        rad = arb(mpf(r))
        best = None
        for n in range(samples):
            a = arb(2 * n) / samples
            z = acb(a.cos_pi(), a.sin_pi()) * rad if n else acb(rad)
            total = acb(0)
            for coeffs, q in polys:
                pz = acb(0)
                for c in reversed(coeffs):
                    pz = pz * z + c
                total += pz * (q * z).exp()
            v = abs(total.mid()).mid()
            if best is None or v > best:
                best = v
    if best is None or best == 0:
        return None
    return mpmath.log(arb_to_mpf(best))


def _exponent_value(spec: EntireFunctionSpec, z, precision_bits: int):
    """g(z) as an mpc for a spec whose value is exp(g)."""
    if spec.kind == "iterated_exp":
        depth, scale = int(spec.params["depth"]), mpf(spec.params["scale"])
        if depth > MAX_ITERATED_DEPTH:
            raise UnsupportedDepth(f"iterated_exp depth {depth} exceeds {MAX_ITERATED_DEPTH}")
        w = scale * z
        for _ in range(depth - 1):
            w = mpmath.exp(w)
        return w
    return evaluate(spec.params["inner"], z, precision_bits).to_mpc()


def evaluate(spec: EntireFunctionSpec, z, precision_bits: int = DEFAULT_PRECISION) -> LogComplex:
    """f(z) in log form."""
    with mpmath.workprec(precision_bits):
        z = mpmath.mpmathify(z)
        k, p = spec.kind, spec.params
        if k == "polynomial":
            return LogComplex.from_complex(_poly_eval([decode_complex(c) for c in p["coeffs"]], z))
        if k == "exp_polynomial":
            return _log_exp_poly(p["terms"], z)
        if k in ("iterated_exp", "exp_of"):
            g = _exponent_value(spec, z, precision_bits)
            return LogComplex(g.real, g.imag)
        if z == 0:
            return coefficients_of(spec, 0, precision_bits)[0]
        s = series_for_radius(spec, abs(z), precision_bits)
        return series_eval(s, LogComplex.from_complex(z))


def log_abs(spec: EntireFunctionSpec, z, precision_bits: int = DEFAULT_PRECISION):
    return evaluate(spec, z, precision_bits).log_mag


def circle_points(r, samples: int):
    """z_n = r exp(2 pi i n / N) for n = 0..N-1 (exact at n = 0)."""
    r = mpf(r)
    pts = [mpc(r, 0)]
    for n in range(1, samples):
        pts.append(r * mpmath.expjpi(mpf(2 * n) / samples))
    return pts


def growth_m(f: EntireFunctionSpec, r, samples: int = DEFAULT_SAMPLES,
             precision_bits: int = DEFAULT_PRECISION):
    """max of ln|f| over `samples` equispaced points of |z| = r."""
    if samples < 64:
        raise ValueError("samples must be at least 64")
    if not r > 0:
        raise ValueError("r must be positive")
    with mpmath.workprec(precision_bits):
        r = mpf(r)
        if f.has_nonnegative_coefficients:
            # |f(z)| <= f(|z|) and the first sample sits on the positive axis
            return log_abs(f, r, precision_bits)
        if f.kind in ("iterated_exp", "exp_of"):
            return max(_exponent_value(f, z, precision_bits).real for z in circle_points(r, samples))
        if f.series_backed:
            s = series_for_radius(f, r, precision_bits)
            return max_log_abs_on_circle(s, r, samples)
        if f.kind == "exp_polynomial":
            fast = _max_log_abs_exp_poly(f.params["terms"], r, samples, precision_bits)
            if fast is not None:
                return fast
        return max(log_abs(f, z, precision_bits) for z in circle_points(r, samples))


def growth_phi(f: EntireFunctionSpec, t, precision_bits: int = DEFAULT_PRECISION,
               samples: int = DEFAULT_SAMPLES):
    with mpmath.workprec(precision_bits):
        return growth_m(f, mpmath.exp(mpf(t)), samples, precision_bits)


def log_growth_m(f: EntireFunctionSpec, r, samples: int = DEFAULT_SAMPLES,
                 precision_bits: int = DEFAULT_PRECISION):
    """ln m_f(r), computed without forming m_f when f = exp(g).

    For iterated exponentials and exp_of with nonnegative inner coefficients
    m_f(r) = g(r) (the value of the exponent on the positive axis), so
    ln m_f(r) = ln g(r) is available in one level of log form.
    """
    with mpmath.workprec(precision_bits):
        r = mpf(r)
        if f.kind == "iterated_exp" and f.has_nonnegative_coefficients:
            depth, scale = int(f.params["depth"]), mpf(f.params["scale"])
            if depth > MAX_ITERATED_DEPTH:
                raise UnsupportedDepth(f"iterated_exp depth {depth} exceeds {MAX_ITERATED_DEPTH}")
            if depth == 1:
                return mpmath.log(scale * r)
            w = scale * r
            for _ in range(depth - 2):
                w = mpmath.exp(w)
            return w
        if f.kind == "exp_of" and f.params["inner"].has_nonnegative_coefficients:
            return log_abs(f.params["inner"], r, precision_bits)
        return mpmath.log(growth_m(f, r, samples, precision_bits))


# ---------------------------------------------------------------------------
# coefficient transforms


def nu_transform(coeffs: TaylorSeries, t):
    """(max_{j >= 1} ln|c_j| + j t, argmax)."""
    t = float(t)
    lm = np.array(coeffs.float_log_mags[1:])
    if lm.size == 0 or not np.isfinite(lm).any():
        raise AllCoefficientsZero("no nonzero coefficient with j >= 1")
    vals = lm + np.arange(1, lm.size + 1) * t
    j = int(np.argmax(vals)) + 1
    if j >= coeffs.J - 5:
        raise MaximizerAtBoundary(f"argmax j={j} within 5 of J={coeffs.J} at t={t}")
    with mpmath.workprec(coeffs.precision_bits):
        return coeffs[j].log_mag + j * mpf(t), j


def estimate_order(coeffs: TaylorSeries) -> float:
    """max over the last half of j of j ln j / (-ln|c_j|)."""
    lm = coeffs.float_log_mags
    nonzero = [j for j, v in enumerate(lm) if v != -math.inf]
    if not nonzero:
        raise AllCoefficientsZero("every coefficient is zero")
    if len(nonzero) < 32:
        raise ValueError("need at least 32 nonzero coefficients")
    best = 0.0
    for j in range(max(2, coeffs.J // 2), coeffs.J + 1):
        v = lm[j]
        if v == -math.inf:
            continue
        if v >= 0:
            return math.inf
        best = max(best, j * math.log(j) / -v)
    return best


ORDER_TERMS = 1 << 17


def order_estimate(f: EntireFunctionSpec, J: Optional[int] = None) -> float:
    """Structural order when known, otherwise estimate_order on a long prefix."""
    known = f.structural_order
    if known is not None:
        return known
    if J is None:
        J = ORDER_TERMS if f.kind in ("taylor_rule", "theorem_1_11") else 512
    lm = _float_log_mags(f, J)
    if lm is not None:
        s = TaylorSeries.from_log_mags(lm.tolist(), 64)
    else:
        s = coefficients_of(f, J, 128)
    return estimate_order(s)


def exp_poly_degree_type(g: EntireFunctionSpec):
    """(m(g), eps(g)) = (sum of (1 + deg p_j), max |q_j|)."""
    if g.kind != "exp_polynomial":
        raise ValueError("exp_poly_degree_type needs an exp_polynomial spec")
    seen = []
    m, eps = 0, 0.0
    for t in g.params["terms"]:
        q = complex(decode_complex(t["q"]))
        if any(abs(q - s) == 0 for s in seen):
            raise DuplicateFrequency(f"frequency {q} appears twice")
        seen.append(q)
        m += 1 + _poly_degree([decode_complex(c) for c in t["p"]])
        eps = max(eps, abs(q))
    return m, eps


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class GrowthProfile:
    t_samples: tuple
    phi_values: tuple
    nu_values: Optional[tuple]
    rho_hat: float
    source_spec_hash: str
    precision_bits: int = DEFAULT_PRECISION

    def to_dict(self) -> dict:
        digits = int(self.precision_bits * math.log10(2)) + 3
        with mpmath.workprec(self.precision_bits):
            phi = [mpmath.nstr(v, digits, strip_zeros=False) for v in self.phi_values]
            nu = None if self.nu_values is None else [mpmath.nstr(v, digits, strip_zeros=False)
                                                      for v in self.nu_values]
        return {
            "t_samples": list(self.t_samples),
            "phi_values": phi,
            "nu_values": nu,
            "rho_hat": self.rho_hat,
            "source_spec_hash": self.source_spec_hash,
            "precision_bits": self.precision_bits,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GrowthProfile":
        nu = d.get("nu_values")
        prec = int(d.get("precision_bits", DEFAULT_PRECISION))
        with mpmath.workprec(prec):
            phi = tuple(mpf(v) for v in d["phi_values"])
            nu = None if nu is None else tuple(mpf(v) for v in nu)
        return cls(tuple(d["t_samples"]), phi, nu, float(d["rho_hat"]), d["source_spec_hash"], prec)


def profile_key(f: EntireFunctionSpec, t_grid, precision_bits: int) -> str:
    doc = {"spec": f.to_dict(), "grid": [float(t) for t in t_grid], "precision": precision_bits}
    return hashlib.sha256(_canonical(doc).encode()).hexdigest()


def growth_profile(f: EntireFunctionSpec, t_grid: Sequence, precision_bits: int = DEFAULT_PRECISION,
                   samples: int = DEFAULT_SAMPLES) -> GrowthProfile:
    t_grid = [float(t) for t in t_grid]
    phi = tuple(growth_phi(f, t, precision_bits, samples) for t in t_grid)
    nu = None
    if f.kind in ("taylor_rule", "theorem_1_11"):
        J = max(required_terms(f, max(t_grid)), 64)
        s = coefficients_of(f, J, precision_bits)
        nu = tuple(nu_transform(s, t)[0] for t in t_grid)
    rho = order_estimate(f)
    return GrowthProfile(tuple(t_grid), phi, nu, rho, f.digest, precision_bits)
