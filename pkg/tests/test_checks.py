import numpy as np
import pytest

from replica_portfolio import checks


@pytest.mark.parametrize("name", list(checks.CHECKS))
def test_check_passes(name):
    result = checks.CHECKS[name]()
    assert result.passed, result
    assert result.worst <= result.tolerance


@pytest.mark.parametrize("fault", [1e-6, -1e-6, 1e-9])
def test_fault_injection_trips_pythagorean(fault):
    assert not checks.check_pythagorean(n=50, fault=fault).passed


def test_run_checks_covers_all():
    names = [r.name for r in checks.run_checks()]
    assert names == list(checks.CHECKS)


def test_kkt_solve_matches_closed_form():
    # min w'w/2 subject to sum(w) = n: uniform weights.
    n = 4
    w = checks.kkt_solve(np.eye(n), np.ones((1, n)), np.array([float(n)]))
    np.testing.assert_allclose(w, np.ones(n), rtol=1e-14)


def test_random_moment_sets_are_valid():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = checks.random_moment_set(rng)
        assert m.m_v1 > 0 and m.V1 >= 0
