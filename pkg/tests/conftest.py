"""Shared random-instance generators for the test suite."""

import numpy as np
import pytest

from trkrylov.tridiag import TriMatrix, gershgorin


def random_tri(rng, n, spd=False, min_coupling=0.05):
    """Random irreducible tridiagonal matrix (optionally SPD-shifted)."""
    d = rng.standard_normal(n) * rng.uniform(0.3, 3.0)
    o = rng.standard_normal(max(n - 1, 0))
    small = np.abs(o) < min_coupling
    o[small] = np.sign(o[small] + 0.5) * min_coupling
    t = TriMatrix(d, o)
    if spd:
        lo, _ = gershgorin(t)
        t = TriMatrix(d - min(lo, 0.0) + 0.1, o)
    return t


def random_sym(rng, n, definite=None):
    """Dense symmetric matrix; ``definite`` in {None, 'pos', 'neg'}."""
    a = rng.standard_normal((n, n))
    h = 0.5 * (a + a.T)
    if definite == "pos":
        h = h @ h.T / n + 0.5 * np.eye(n)
    elif definite == "neg":
        h = -(h @ h.T) / n - 0.5 * np.eye(n)
    return h


def spd_matrix(rng, n, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.logspace(0, np.log10(cond), n)
    return (q * eigs) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if (
        report.when == "call"
        and report.failed
        and item.fspath.basename == "test_acceptance.py"
    ):
        print(f"\nACCEPTANCE {item.name}: FAIL")
