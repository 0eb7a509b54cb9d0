"""End-to-end acceptance: one `verify-example` run, one test per criterion."""

import time

import pytest

from soulgeom.config import SuiteConfig
from soulgeom.verification import run_command

CRITERIA = {
    1: ("soul Gauss curvature", ("C1.",)),
    2: ("Cheeger matrix", ("C2.",)),
    3: ("fibre metric", ("C3.",)),
    4: ("horizontal space", ("C4.",)),
    5: ("normal curvature", ("C5.",)),
    6: ("normal holonomy", ("C6.",)),
    7: ("vertical curvatures", ("C7.",)),
    8: ("connection family", ("C8.",)),
    9: ("rigidity suite", ("C9.",)),
    10: ("nonnegativity certification", ("C10.",)),
    11: ("cross-backend and determinism", ("C11.",)),
}


@pytest.fixture(scope="module")
def verify_report():
    start = time.perf_counter()
    report = run_command("verify-example", SuiteConfig())
    report.seconds = time.perf_counter() - start
    return report


def _line(number, checks, ok):
    name = CRITERIA[number][0]
    worst = [f"{c.id} observed={c.observed!r} expected={c.expected!r} tol={c.tol}" for c in checks if c.passed is not True]
    detail = f"{len(checks)} checks" + (": " + "; ".join(worst) if worst else "")
    return f"criterion {number:2d} {name:32s} {'PASS' if ok else 'FAIL'} ({detail})"


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, verify_report, capsys):
    prefixes = CRITERIA[number][1]
    checks = [c for c in verify_report.checks if c.id.startswith(prefixes)]
    ok = bool(checks) and all(c.passed is True for c in checks)
    with capsys.disabled():
        print("\n" + _line(number, checks, ok))
    assert checks, f"no checks recorded for criterion {number}"
    assert ok


@pytest.mark.slow
def test_verify_example_exit_contract(verify_report, capsys):
    s = verify_report.summary
    with capsys.disabled():
        print(f"\nverify-example: {s['pass']} passed, {s['fail']} failed, {s['indeterminate']} indeterminate in {verify_report.seconds:.0f} s")
    assert verify_report.ok(0)
    assert s["pass"] == len(verify_report.checks)
