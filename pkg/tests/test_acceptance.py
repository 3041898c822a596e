"""Acceptance suite: one test per headline criterion.

Each test drives the corresponding check in capwidth.verify with the
default seed and budgets and prints a single PASS/FAIL line; the final
test confirms the whole battery fits the wall-clock budget.
"""
import pytest

from capwidth.verify import CRITERIA, VerifyContext, run_criterion

TOTAL_BUDGET_SECONDS = 900.0

_RESULTS = []


@pytest.fixture(scope="module")
def ctx():
    return VerifyContext(seed=7)


@pytest.mark.parametrize(
    "index", range(1, len(CRITERIA) + 1), ids=[name for name, _ in CRITERIA]
)
def test_criterion(index, ctx):
    res = run_criterion(index, ctx)
    _RESULTS.append(res)
    status = "PASS" if res.passed else "FAIL"
    print(f"criterion {res.index:2d} {status} [{res.seconds:6.1f}s] {res.name}: {res.details}")
    assert res.passed, f"criterion {res.index} ({res.name}): {res.details}"


def test_all_criteria_ran_within_budget():
    assert len(_RESULTS) == len(CRITERIA)
    total = sum(r.seconds for r in _RESULTS)
    print(f"total acceptance time {total:.1f}s (budget {TOTAL_BUDGET_SECONDS:.0f}s)")
    assert total <= TOTAL_BUDGET_SECONDS
