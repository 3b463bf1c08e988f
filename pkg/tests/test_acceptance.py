"""The ten acceptance criteria, one test each, run in order on a shared context.

Each test prints a single "[PASS|FAIL|SKIP] criterion N ..." line (visible
with pytest -s, and in the captured output of failures).  The tolerance
constants are pinned first so that a criterion cannot pass because its
threshold drifted.
"""

import pytest

from bernstein_lab import acceptance as acc
from bernstein_lab.cli import DEFAULT_SEED


def test_tolerances_pinned():
    assert acc.C1_TOL == 1e-6 and acc.C1_SLOPE == (0.95, 1.05) and acc.C1_BUDGET == 60
    assert acc.C2_BAND == (1.6, 2.4) and acc.C2_MIN_PRECISION == 1024 and acc.C2_BUDGET == 30 * 60
    assert acc.C3_BUDGET == 10 * 60
    assert acc.C4_MIN_SLOPE == 1.6
    assert acc.C5_DRAWS == 100 and acc.C5_RADII == (0.5, 1.0, 2.0) and acc.C5_BUDGET == 5 * 60
    assert acc.C6_ORDERS == {"power": (0.0, 0.05), "exponential": (1.0, 0.1)} and acc.C6_BUDGET == 5 * 60
    assert acc.C7_REL == 0.01 and acc.C7_BUDGET == 5 * 60
    assert acc.C8_SLACK == 0.5 and acc.C8_BUDGET == 5 * 60
    assert acc.C9_GROWTH_TOL == 1e-6 and acc.C9_FIT_TOL == 1e-9 and acc.C9_BUDGET == 2 * 60
    assert [fn.number for fn in acc.CRITERIA] == list(range(1, 11))


@pytest.fixture(scope="module")
def ctx():
    return acc.AcceptanceContext(seed=DEFAULT_SEED)


@pytest.mark.parametrize("fn", acc.CRITERIA, ids=[f"criterion_{fn.number:02d}" for fn in acc.CRITERIA])
def test_criterion(fn, ctx, capsys):
    res = acc.run_criterion(fn, ctx)
    with capsys.disabled():
        print("\n" + res.line(), flush=True)
    print(res.line())
    assert res.passed, res.line()
