import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from orbitbayes.energy import EXACT_LIMIT, energy_distance, energy_test
from orbitbayes.errors import DomainError


def test_energy_distance_two_points():
    assert energy_distance([[0.0]], [[1.0]]) == pytest.approx(2.0)


def test_energy_distance_identical_samples_is_zero():
    x = np.random.default_rng(0).standard_normal((30, 3))
    assert energy_distance(x, x) == pytest.approx(0.0, abs=1e-14)


@given(st.integers(0, 2 ** 32 - 1))
def test_sliced_statistic_is_exact_in_one_dimension(seed):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal(40), r.standard_normal(25) + 0.3
    exact = energy_test(x, y, np.random.default_rng(1), permutations=19, method="exact")
    sliced = energy_test(x, y, np.random.default_rng(1), permutations=19, method="sliced")
    assert sliced.statistic == pytest.approx(exact.statistic, rel=1e-10, abs=1e-13)
    assert exact.statistic == pytest.approx(energy_distance(x, y), rel=1e-10, abs=1e-13)


def test_sliced_statistic_approximates_exact(rng):
    x = rng.standard_normal((400, 3))
    y = rng.standard_normal((400, 3)) * 1.5
    ex = energy_test(x, y, np.random.default_rng(2), permutations=19, method="exact")
    sl = energy_test(x, y, np.random.default_rng(2), permutations=19, method="sliced",
                     directions=512)
    assert sl.statistic == pytest.approx(ex.statistic, rel=0.05)


def test_auto_method_switches_at_limit(rng):
    small = energy_test(rng.standard_normal((10, 2)), rng.standard_normal((10, 2)), rng,
                        permutations=19)
    assert small.method == "exact"
    n = EXACT_LIMIT // 2 + 1
    big = energy_test(rng.standard_normal((n, 2)), rng.standard_normal((n, 2)), rng,
                      permutations=19)
    assert big.method == "sliced" and big.directions == 32


def test_rejects_shifted_sample(rng):
    res = energy_test(rng.standard_normal((3000, 2)), rng.standard_normal((3000, 2)) + 0.2, rng,
                      permutations=199)
    assert res.pvalue == pytest.approx(1 / 200)


def test_pvalues_uniform_under_null():
    pvals = []
    for seed in range(60):
        r = np.random.default_rng(seed)
        res = energy_test(r.standard_normal((60, 2)), r.standard_normal((60, 2)), r,
                          permutations=99)
        pvals.append(res.pvalue)
    # discrete p-values on a 1/100 grid; KS against the uniform is conservative enough here
    assert stats.kstest(pvals, "uniform").pvalue > 0.01


def test_deterministic_given_seed():
    r = np.random.default_rng(5)
    x, y = r.standard_normal((2000, 3)), r.standard_normal((2000, 3))
    a = energy_test(x, y, np.random.default_rng(7), permutations=49)
    b = energy_test(x, y, np.random.default_rng(7), permutations=49)
    assert a == b


@pytest.mark.parametrize("x, y", [
    (np.zeros((1, 2)), np.zeros((5, 2))),
    (np.zeros((5, 2)), np.zeros((5, 3))),
    (np.full((5, 2), np.nan), np.zeros((5, 2))),
])
def test_input_validation(x, y, rng):
    with pytest.raises(DomainError):
        energy_test(x, y, rng)
