"""Tests for the benchmark harness: suite, outer loop, profiles, CLI."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from trkrylov.bench.outer import BenchRecord, OuterConfig, outer_loop
from trkrylov.bench.problems import (
    NlpProblem,
    control_problem,
    hard_case_quartic,
    quad_convex,
    quad_indefinite,
    rosenbrock2d,
    suite,
)
from trkrylov.bench.profile import performance_profile, profile_value
from trkrylov.bench.cli import main as cli_main
from trkrylov.oracle import oracle_solve


def rec(problem, solver, hv, outcome="converged"):
    return BenchRecord(
        problem=problem,
        solver=solver,
        grad_norm=0.0,
        hv_count=hv,
        outer_iters=1,
        wall_ms=1.0,
        outcome=outcome,
    )


class TestSuite:
    def test_size_and_gradient_checks(self):
        problems = suite()
        assert len(problems) >= 8
        # construction already runs the directional gradient self-check

    def test_hard_case_orthogonality_by_construction(self):
        p = hard_case_quartic(12)
        g = p.grad(p.x0)
        h = p.hess(p.x0)
        theta, q = np.linalg.eigh(h)
        v_min = q[:, 0]
        assert abs(g @ v_min) == 0.0
        assert theta[0] < 0.0

    def test_bad_gradient_rejected(self):
        with pytest.raises(ValueError, match="gradient check"):
            NlpProblem(
                "broken",
                2,
                f=lambda x: float(x @ x),
                grad=lambda x: 3.0 * x,
                hess=lambda x: 2.0 * np.eye(2),
                x0=np.ones(2),
            )


class TestOuterLoop:
    def test_rosenbrock_converges(self):
        record, trace = outer_loop(rosenbrock2d(), "gltr")
        assert record.outcome == "converged"
        assert record.grad_norm <= 1e-7
        assert record.hv_count <= 126
        assert trace[0] > 1.0  # started far from stationarity

    def test_convex_quadratic_converges_fast(self):
        p = quad_convex(12, seed=5)
        record, trace = outer_loop(p, "gltr")
        assert record.outcome == "converged"
        assert record.outer_iters <= 12  # exact model: every step accepted

    def test_radius_update_rules(self):
        # Acceptance exactly at rho >= rho_acc; the radius follows the
        # three-branch rule.
        p = rosenbrock2d()
        hist = {}
        outer_loop(p, "gltr", history_out=hist)
        cfg = OuterConfig()
        assert any(hist["accepted"]) and not all(hist["accepted"])
        for rho, accepted in zip(hist["rhos"], hist["accepted"]):
            assert accepted == (rho >= cfg.rho_acc)
        for (d0, r0), d1 in zip(
            zip(hist["deltas"], hist["rhos"]), hist["deltas"][1:]
        ):
            ratio = d1 / d0
            if r0 >= cfg.rho_inc:
                assert math.isclose(ratio, cfg.gamma_inc, rel_tol=1e-12)
            elif r0 < cfg.rho_acc or math.isnan(r0):
                assert math.isclose(ratio, cfg.gamma_dec, rel_tol=1e-12)
            else:
                assert math.isclose(ratio, 1.0, rel_tol=1e-12)

    def test_indefinite_small_radius_acceptance(self):
        p = quad_indefinite(10, seed=9)
        hist = {}
        cfg = OuterConfig(delta0=0.05, max_outer=200)
        record, _ = outer_loop(p, "gltr", cfg, history_out=hist)
        assert record.outcome == "converged"
        cfg_def = OuterConfig()
        for rho, accepted in zip(hist["rhos"], hist["accepted"]):
            if accepted:
                assert rho >= cfg_def.rho_acc

    def test_solver_validation(self):
        with pytest.raises(ValueError):
            outer_loop(rosenbrock2d(), "nope")

    def test_oracle_solver_runs(self):
        record, _ = outer_loop(rosenbrock2d(), "oracle")
        assert record.outcome == "converged"
        assert record.hv_count == 0

    def test_hotstart_economy_on_rejections(self):
        # A rejected step re-solves only the tridiagonal problem: when the
        # reentry terminates there (iteration count unchanged) it must not
        # consume new Hessian products.
        seen = []

        def hook(h, g, d, report):
            seen.append((d, report.hess_products, report.iterations))

        record, _ = outer_loop(rosenbrock2d(), "gltr", subproblem_hook=hook)
        assert record.outcome == "converged"
        rejections = 0
        for (d0, hv0, it0), (d1, hv1, it1) in zip(seen, seen[1:]):
            if d1 < d0 and hv1 >= hv0:  # same session, shrunk radius
                rejections += 1
                if it1 == it0:
                    assert hv1 == hv0
        assert rejections > 0  # the run actually exercised reentry

    def test_gltr_objective_dominates_st_per_subproblem(self):
        from trkrylov.dense import DenseProblem, solve_st
        from trkrylov.driver import TerminationConfig

        for p in (rosenbrock2d(), quad_convex(12, seed=3), hard_case_quartic(8)):
            pairs = []

            def hook(h, g, d, report):
                pairs.append((np.asarray(h, float).copy(), g.copy(), d, report.obj))

            record, _ = outer_loop(p, "gltr", subproblem_hook=hook)
            assert record.outcome == "converged"
            for h, g, d, gltr_obj in pairs:
                st = solve_st(
                    DenseProblem(h=h, g=g, delta=d),
                    TerminationConfig(max_iter=10 * p.n),
                )
                scale = max(1.0, abs(st.obj))
                assert gltr_obj <= st.obj + 1e-10 * scale


class TestPerformanceProfile:
    def test_two_solver_hand_example(self):
        records = [rec("p", "a", 1), rec("p", "b", 2)]
        rows = performance_profile(records, "hv")
        assert profile_value(rows, "a", 1.0) == 1.0
        assert profile_value(rows, "b", 1.0) == 0.0
        assert profile_value(rows, "b", 2.0) == 1.0

    def test_all_failures_flat_zero(self):
        records = [
            rec("p1", "a", 5),
            rec("p2", "a", 6),
            rec("p1", "b", 5, outcome="iteration-limit"),
            rec("p2", "b", 6, outcome="iteration-limit"),
        ]
        rows = performance_profile(records, "hv")
        assert all(rho == 0.0 for tau, s, rho in rows if s == "b")
        assert profile_value(rows, "a", math.inf) == 1.0

    def test_monotone_and_terminal_fraction(self):
        rng = np.random.default_rng(1)
        records = []
        for i in range(12):
            for s in ("a", "b", "c"):
                ok = rng.uniform() > 0.2
                records.append(
                    rec(
                        f"p{i}",
                        s,
                        int(rng.integers(1, 50)),
                        outcome="converged" if ok else "iteration-limit",
                    )
                )
        rows = performance_profile(records, "hv")
        for s in ("a", "b", "c"):
            vals = [rho for tau, sol, rho in rows if sol == s]
            assert all(b >= a for a, b in zip(vals, vals[1:]))
            solved = sum(
                1
                for r in records
                if r.solver == s and r.outcome == "converged"
            )
            assert vals[-1] == pytest.approx(solved / 12)

    def test_validation(self):
        with pytest.raises(ValueError):
            performance_profile([], "hv")
        with pytest.raises(ValueError):
            performance_profile([rec("p", "a", 1)], "hv")


class TestControlProblem:
    def test_beta_large_is_easy(self):
        p = control_problem(64, 1.0)
        record, _ = outer_loop(p, "gltr")
        assert record.outcome == "converged"
        assert record.outer_iters <= 2

    def test_mnorm_feasibility_along_run(self):
        p = control_problem(64, 1e-3)
        seen = []

        def hook(h, g, delta, report):
            seen.append((report.x.copy(), delta))

        record, _ = outer_loop(p, "gltr", subproblem_hook=hook)
        for x, delta in seen:
            xm = math.sqrt(float(x @ p.m @ x))
            assert xm <= delta * (1.0 + 1e-8)

    def test_mesh_independence_small(self):
        counts = []
        for mesh in (64, 128):
            record, _ = outer_loop(control_problem(mesh, 1e-3), "gltr")
            assert record.outcome == "converged"
            counts.append(record.outer_iters)
        assert abs(counts[0] - counts[1]) <= 1

    def test_2d_variant_runs(self):
        p = control_problem(8, 1e-3, dim=2)
        record, _ = outer_loop(p, "gltr")
        assert record.outcome == "converged"

    def test_validation(self):
        with pytest.raises(ValueError):
            control_problem(4, 1e-3)
        with pytest.raises(ValueError):
            control_problem(64, -1.0)


class TestCli:
    def test_run_and_profile_roundtrip(self, tmp_path):
        out = tmp_path / "runs"
        code = cli_main(
            [
                "run",
                "--suite",
                "rosenbrock2d,quad_convex20",
                "--solver",
                "all",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        csv_text = (out / "records.csv").read_text().splitlines()
        assert csv_text[0] == "problem,solver,grad_norm,hv_count,outer_iters,wall_ms,outcome"
        assert len(csv_text) == 1 + 2 * 3
        record = json.loads((out / "rosenbrock2d__gltr.json").read_text())
        assert set(record) == {
            "problem",
            "solver",
            "grad_norm",
            "hv_count",
            "outer_iters",
            "wall_ms",
            "outcome",
        }
        prof = tmp_path / "profile.csv"
        code = cli_main(
            ["profile", "--metric", "hv", "--in", str(out), "--out", str(prof)]
        )
        assert code == 0
        assert prof.read_text().splitlines()[0] == "tau,solver,rho"

    def test_control_subcommand(self, capsys):
        code = cli_main(["control", "--mesh", "16", "--beta", "0.001"])
        assert code == 0
        assert "converged" in capsys.readouterr().out

    def test_config_file(self, tmp_path):
        cfg_file = tmp_path / "outer.cfg"
        cfg_file.write_text("rho_acc = 0.05\nmax_outer = 7\n")
        from trkrylov.bench.cli import load_config

        cfg = load_config(cfg_file)
        assert cfg.rho_acc == 0.05
        assert cfg.max_outer == 7

    def test_unknown_problem_rejected(self, tmp_path):
        code = cli_main(
            ["run", "--suite", "not_a_problem", "--solver", "gltr", "--out", str(tmp_path)]
        )
        assert code == 2

    def test_entry_point_installed(self):
        out = subprocess.run(
            [sys.executable, "-m", "trkrylov.bench.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 0
        assert "run" in out.stdout


class TestTableFixtureProfile:
    """Reference iteration counts for two solvers on a ten-problem set; the
    expected profile points are computed by hand from the ratios."""

    COUNTS = {
        # problem: (krylov, tcg)
        "p01": (12, 12),
        "p02": (27, 20),
        "p03": (9, 10),
        "p04": (76, 152),
        "p05": (21, 156),
        "p06": (50, 42),
        "p07": (17, 24),
        "p08": (21941, 20698),
        "p09": (758, 436),
        "p10": (36639, 43139),
    }

    def make_records(self):
        records = []
        for name, (kry, tcg) in self.COUNTS.items():
            records.append(rec(name, "krylov", kry))
            records.append(rec(name, "tcg", tcg))
        return records

    def test_hand_computed_points(self):
        rows = performance_profile(self.make_records(), "hv")
        assert profile_value(rows, "krylov", 1.0) == pytest.approx(0.6)
        assert profile_value(rows, "tcg", 1.0) == pytest.approx(0.5)
        assert profile_value(rows, "krylov", 1.2) == pytest.approx(0.8)
        assert profile_value(rows, "tcg", 1.2) == pytest.approx(0.7)
        assert profile_value(rows, "krylov", 2.0) == pytest.approx(1.0)
        assert profile_value(rows, "tcg", 2.0) == pytest.approx(0.9)
        assert profile_value(rows, "tcg", 8.0) == pytest.approx(1.0)

    def test_extended_ratios_below_one(self):
        rows = performance_profile(self.make_records(), "hv")
        assert profile_value(rows, "krylov", 0.14) == pytest.approx(0.1)
        assert profile_value(rows, "krylov", 0.999) == pytest.approx(0.5)
