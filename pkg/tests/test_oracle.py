"""Tests for the dense reference solver."""

import numpy as np
import pytest

from trkrylov.oracle import kkt_residual, oracle_solve

from conftest import random_sym


class TestOracleSolve:
    def test_interior_scalar(self):
        s = oracle_solve(np.diag([2.0]), np.array([1.0]), 1.0)
        np.testing.assert_allclose(s.x, [-0.5])
        assert s.lam == 0.0
        assert s.case == "interior"

    def test_hard_case_2x2(self):
        s = oracle_solve(np.diag([1.0, -2.0]), np.array([1.0, 0.0]), 1.0)
        assert s.lam == pytest.approx(2.0, abs=1e-12)
        assert s.obj == pytest.approx(-7.0 / 6.0, rel=1e-12)
        assert s.case == "hard"

    def test_pure_eigenvector_case(self):
        s = oracle_solve(-np.eye(3), np.zeros(3), 1.0)
        assert s.lam == pytest.approx(1.0)
        assert s.obj == pytest.approx(-0.5)
        np.testing.assert_allclose(s.x, [1.0, 0.0, 0.0], atol=1e-12)

    def test_self_consistency(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 31))
            h = random_sym(rng, n)
            g = rng.standard_normal(n)
            delta = float(rng.uniform(0.1, 3.0))
            s = oracle_solve(h, g, delta)
            scale = max(1.0, np.linalg.norm(h, 2), np.linalg.norm(g))
            r_stat, r_feas, r_comp, min_eig = kkt_residual(
                h, None, g, delta, s.x, s.lam
            )
            assert r_stat <= 1e-10 * scale
            assert r_feas <= 1e-10 * scale
            assert r_comp <= 1e-10 * scale * max(1.0, delta)
            assert min_eig >= -1e-10 * scale

    def test_uniqueness_when_strictly_definite(self, rng):
        # With min_eig_shift > 0 no feasible perturbation decreases q.
        for _ in range(20):
            n = int(rng.integers(2, 11))
            h = random_sym(rng, n)
            g = rng.standard_normal(n)
            delta = float(rng.uniform(0.3, 2.0))
            s = oracle_solve(h, g, delta)
            *_, min_eig = kkt_residual(h, None, g, delta, s.x, s.lam)
            if min_eig <= 1e-8:
                continue
            def q(x):
                return 0.5 * x @ h @ x + g @ x
            for _ in range(20):
                d = rng.standard_normal(n)
                x_new = s.x + 1e-3 * d
                nx = np.linalg.norm(x_new)
                if nx > delta:
                    x_new *= delta / nx  # project back into the ball
                assert q(x_new) >= s.obj - 1e-12 * max(1.0, abs(s.obj))


class TestKktResidual:
    def test_zero_candidate(self, rng):
        g = rng.standard_normal(5)
        r_stat, r_feas, r_comp, _ = kkt_residual(
            np.eye(5), None, g, 1.0, np.zeros(5), 0.0
        )
        assert r_stat == pytest.approx(np.linalg.norm(g))
        assert r_feas == 0.0 and r_comp == 0.0

    def test_m_must_be_positive_definite(self):
        with pytest.raises(ValueError):
            kkt_residual(np.eye(2), -np.eye(2), np.ones(2), 1.0, np.zeros(2), 0.0)

    def test_linear_growth_under_perturbation(self, rng):
        h = random_sym(rng, 8)
        g = rng.standard_normal(8)
        s = oracle_solve(h, g, 1.0)
        d = rng.standard_normal(8)
        d /= np.linalg.norm(d)
        epss = np.array([1e-6, 1e-5, 1e-4, 1e-3])
        resid = []
        for eps in epss:
            r_stat, *_ = kkt_residual(h, None, g, 1.0, s.x + eps * d, s.lam)
            resid.append(r_stat)
        slope = np.polyfit(np.log(epss), np.log(resid), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.05)
