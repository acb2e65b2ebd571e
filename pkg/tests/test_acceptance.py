"""Acceptance criteria 1-10.

The suite runs twice with the same master seed: once in-process, once through
the ``selftest`` subcommand.  Criteria 1-9 are judged on the first run; the
byte comparison of the two report directories is criterion 10.  Each test
prints one PASS/FAIL line to the terminal.
"""
import pytest

from orbitbayes import acceptance, cli
from orbitbayes import config as cfgmod

SEED = 1
REPORTS = ("selftest.json", "selftest.csv")


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    first = tmp_path_factory.mktemp("selftest-a")
    second = tmp_path_factory.mktemp("selftest-b")
    cfg = cfgmod.load(None, {"seed": SEED})
    results = acceptance.run_suite(SEED, echo=None)
    acceptance.write_report(results, first, SEED, cfg.hash())
    code = cli.main(["selftest", "--seed", str(SEED), "--out", str(second)])
    return {r.number: r for r in results}, first, second, code


@pytest.mark.parametrize("number", [c.number for c in acceptance.CRITERIA])
def test_criterion(runs, number, capsys):
    result = runs[0][number]
    within = result.elapsed <= result.budget
    with capsys.disabled():
        print("\n" + result.line() + ("" if within else "  OVER BUDGET"))
    assert result.passed, result.metrics
    assert within, f"{result.elapsed:.1f}s exceeds the {result.budget:.0f}s budget"


def test_criterion_10_determinism(runs, capsys):
    _, first, second, code = runs
    same = all((first / n).read_bytes() == (second / n).read_bytes() for n in REPORTS)
    with capsys.disabled():
        print(f"\ncriterion 10 {'PASS' if same else 'FAIL'}  selftest reports are byte-identical "
              f"across two runs")
    assert code == cli.EXIT_OK
    assert same
