import json
import math

import pytest

from bernstein_lab.conditions import (
    SATISFIED,
    VIOLATED,
    check_chain_conditions,
    check_condition_I,
    check_condition_II,
    check_growth_1_11,
    check_h_chain,
    convex_increasing_fit,
)
from bernstein_lab.errors import DegenerateDifference, NotInfiniteOrder, OrdersNotSorted
from bernstein_lab.functions import CurveSpec, EntireFunctionSpec as E, HSpec

EXP = E.exp_polynomial([([1], 1)])
EE = E.iterated_exp(2, 1)
P, X = HSpec.power, HSpec.exponential
GRID = [2 + 0.5 * i for i in range(13)]


def test_cI_exp():
    rep = check_condition_I(EXP, GRID)
    assert rep.verdict == SATISFIED
    assert all(abs(w / math.e - 1) < 0.01 for w in rep.witness_values)
    assert len(rep.witness_values) == len(rep.grid)
    assert rep.violated_at is None


def test_cI_preconditions():
    with pytest.raises(ValueError):
        check_condition_I(EXP, [0.5, 1.5, 2.5])
    with pytest.raises(ValueError):
        check_condition_I(EXP, [1.0, 1.1, 1.2])


def test_cI_fh_power_bounded():
    rep = check_condition_I(E.f_h(P(1.5)), [4 + 0.5 * i for i in range(13)])
    assert rep.verdict == SATISFIED
    assert max(rep.witness_values) < 10


def test_cI_double_exponential_violated():
    rep = check_condition_I(EE, [1.0, 1.5, 2.0, 2.5, 3.0])
    assert rep.verdict == VIOLATED and rep.violated_at is not None
    # closed-form ratio for phi(t) = e^{e^t}
    t = rep.grid[-1]
    phi = lambda u: math.exp(math.exp(u))
    ref = (phi(t + 1) - phi(t)) / (phi(t) - phi(t - 1)) if t + 1 < 6 else None
    if ref is not None:
        assert rep.witness_values[-1] == pytest.approx(ref, rel=1e-6)


def test_cI_polynomial():
    for coeffs in ([0, 0, 0, 1], [3]):
        try:
            rep = check_condition_I(E.polynomial(coeffs), [2, 3, 4, 5, 6])
        except DegenerateDifference:
            continue
        assert rep.verdict != SATISFIED


def test_cII():
    rep = check_condition_II(EE, [1 + 0.5 * i for i in range(11)])
    assert rep.verdict == SATISFIED
    with pytest.raises(NotInfiniteOrder):
        check_condition_II(EXP, GRID)
    rep = check_condition_II(E.exp_of(E.f_h(P(1.5))), [4 + 0.5 * i for i in range(13)])
    assert rep.condition_id == "cII"


def test_mutual_exclusivity():
    for f in (EXP, EE, E.f_h(P(1.5)), E.exp_of(E.polynomial([0, 0, 1]))):
        verdicts = []
        for fn in (check_condition_I, check_condition_II):
            try:
                verdicts.append(fn(f, [2 + 0.5 * i for i in range(9)]).verdict)
            except (NotInfiniteOrder, DegenerateDifference):
                pass
        assert verdicts.count(SATISFIED) <= 1


def test_growth_1_11():
    rep = check_growth_1_11(EXP, [2 + 0.5 * i for i in range(13)])
    assert rep.verdict == SATISFIED
    assert rep.witness_values[-1] == pytest.approx(math.exp(8) / 64, rel=1e-9)
    assert check_growth_1_11(E.polynomial([0, 0, 0, 1]), GRID).verdict == VIOLATED
    assert check_growth_1_11(EE, [2.0 + i for i in range(9)]).verdict == SATISFIED


@pytest.mark.parametrize("h", [P(1.5), X(1)], ids=["power", "exponential"])
def test_fh_in_class_C_on_wide_grid(h):
    grid = [4 + 4 * i for i in range(20)] if h.kind == "power" else [4 + 0.5 * i for i in range(13)]
    assert check_condition_I(E.f_h(h), [4 + 0.5 * i for i in range(13)]).verdict == SATISFIED
    assert check_growth_1_11(E.f_h(h), grid).verdict == SATISFIED


def test_chain_examples():
    rg = [2.0 + i for i in range(19)]
    reps = check_chain_conditions(CurveSpec((EXP, E.exp_of(E.polynomial([0, 0, 0, 1])))), rg)
    assert [r.condition_id for r in reps] == ["chain_1_4"] and reps[0].verdict == SATISFIED
    r = rg[-1]
    assert reps[0].witness_values[-1] == pytest.approx((r - r / math.e) / math.sqrt(r ** 3 - (r / math.e) ** 3),
                                                       rel=1e-6)
    with pytest.raises(OrdersNotSorted):
        check_chain_conditions(CurveSpec((E.exp_of(E.polynomial([0, 0, 0, 1])), EXP)), rg)
    # ln m_1(r) / ln m_2(r/e) = r / (n r / e) = e/n for e^{e^z}, e^{e^{nz}}
    reps = check_chain_conditions(CurveSpec((EE, E.iterated_exp(2, 6))), rg)
    assert reps[0].condition_id == "chain_1_5" and reps[0].verdict == SATISFIED
    assert reps[0].witness_values[-1] == pytest.approx(math.e / 6, rel=1e-9)
    reps = check_chain_conditions(CurveSpec((EE, E.iterated_exp(2, 3))), rg)
    assert reps[0].verdict == VIOLATED
    assert reps[0].witness_values[-1] == pytest.approx(math.e / 3, rel=1e-9)
    assert all(x.verdict != SATISFIED for x in check_chain_conditions(CurveSpec((EE, EE)), rg))


def test_h_chain_examples():
    tg = [4 + 0.5 * i for i in range(17)]
    assert all(r.verdict == SATISFIED for r in check_h_chain([P(1.8), P(1.3)], 2, tg))
    reps = check_h_chain([X(1), X(3)], 0, tg)
    assert all(r.verdict == SATISFIED for r in reps)
    assert "remark_1_22" in [r.condition_id for r in reps]
    assert any(r.verdict == VIOLATED for r in check_h_chain([P(1.5), P(1.5)], 2, tg))


def test_reports_deterministic_and_serializable():
    a = check_condition_I(EXP, GRID).to_dict()
    b = check_condition_I(EXP, GRID).to_dict()
    assert a == b
    doc = json.loads(check_condition_I(EXP, GRID).to_json())
    assert {"condition_id", "grid", "witnesses", "verdict", "trend"} <= set(doc)


def test_convex_fit_is_convex_increasing():
    import numpy as np

    x = np.linspace(0, 5, 20)
    y = np.exp(x) + np.sin(7 * x)
    fit = convex_increasing_fit(x, y)
    d = np.diff(fit) / np.diff(x)
    assert np.all(d >= -1e-9)
    assert np.all(np.diff(d) >= -1e-7)
