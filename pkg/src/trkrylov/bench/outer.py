"""Standard trust-region outer loop over the benchmark problems.

One subproblem per iteration, the usual actual-vs-predicted acceptance test,
and the three-branch radius update.  Rejected steps reuse the assembled
Krylov data through the radius-reentry hotstart; solver choices are the
Krylov solver, the truncated-CG baseline and the dense eigendecomposition
oracle.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dense import DenseProblem, GltrSession, solve_st
from ..driver import TerminationConfig
from ..oracle import oracle_solve
from .problems import NlpProblem

SOLVERS = ("gltr", "st", "oracle")


@dataclass
class OuterConfig:
    """Outer-loop parameters.

    ``delta0 = None`` means ``1/sqrt(n)`` unless the problem suggests its
    own radius.  Acceptance at ``rho_acc``, radius doubling above
    ``rho_inc``, halving below ``rho_acc``.
    """

    delta0: Optional[float] = None
    tol_abs: float = 1e-7
    rho_acc: float = 1e-2
    rho_inc: float = 0.95
    gamma_inc: float = 2.0
    gamma_dec: float = 0.5
    max_outer: int = 500

    def validate(self):
        if not (0.0 < self.rho_acc <= self.rho_inc < 1.0):
            raise ValueError("need 0 < rho_acc <= rho_inc < 1")
        if not (self.gamma_dec < 1.0 < self.gamma_inc):
            raise ValueError("need gamma_dec < 1 < gamma_inc")
        if self.max_outer < 1:
            raise ValueError("max_outer must be positive")


@dataclass
class BenchRecord:
    """One outer-loop run; written even when the run fails."""

    problem: str
    solver: str
    grad_norm: float
    hv_count: int
    outer_iters: int
    wall_ms: float
    outcome: str

    def as_dict(self):
        return {
            "problem": self.problem,
            "solver": self.solver,
            "grad_norm": self.grad_norm,
            "hv_count": self.hv_count,
            "outer_iters": self.outer_iters,
            "wall_ms": self.wall_ms,
            "outcome": self.outcome,
        }


def _grad_norm(p: NlpProblem, g: np.ndarray) -> float:
    if p.m is None:
        return float(np.linalg.norm(g))
    return math.sqrt(max(float(g @ p.minv(g)), 0.0))


def _sub_cfg(n: int) -> TerminationConfig:
    # Relative tolerances default to the gradient-scaled rules inside the
    # driver (interior O(||g||^2), boundary O(||g||^{3/2})).
    return TerminationConfig(max_iter=max(10 * n, 30))


def outer_loop(
    p: NlpProblem,
    solver: str,
    cfg: Optional[OuterConfig] = None,
    seed: int = 0,
    subproblem_hook=None,
    history_out: Optional[dict] = None,
):
    """Run the trust-region loop; returns ``(BenchRecord, gradient trace)``.

    ``subproblem_hook(H, g, delta, report)`` is called once per subproblem
    solve (benchmark instrumentation).  A dict passed as ``history_out`` is
    filled with per-solve ``rhos``, ``deltas`` and ``accepted`` flags.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    cfg = cfg or OuterConfig()
    cfg.validate()
    if history_out is not None:
        history_out.update({"rhos": [], "deltas": [], "accepted": []})
    x = p.x0.copy()
    delta = cfg.delta0 or p.delta0 or 1.0 / math.sqrt(p.n)
    hv_count = 0
    trace = []
    outcome = "iteration-limit"
    t0 = time.perf_counter()
    session: Optional[GltrSession] = None
    k = 0
    fx = p.f(x)
    for k in range(cfg.max_outer):
        g = p.grad(x)
        gnorm = _grad_norm(p, g)
        trace.append(gnorm)
        if gnorm <= cfg.tol_abs:
            outcome = "converged"
            break
        h_mat = p.hess(x)
        rejected_in_row = 0
        while True:
            if solver == "gltr":
                if rejected_in_row == 0:
                    problem = DenseProblem(
                        h=h_mat, g=g, delta=delta, m=p.m, minv=p.minv
                    )
                    session = GltrSession(problem, _sub_cfg(p.n), seed=seed)
                    before = 0
                    report = session.solve()
                else:
                    before = session.hess_products
                    report = session.reenter(delta)
                hv_count += session.hess_products - before
                d, q_pred = report.x, report.obj
            elif solver == "st":
                problem = DenseProblem(
                    h=h_mat, g=g, delta=delta, m=p.m, minv=p.minv
                )
                report = solve_st(problem, _sub_cfg(p.n))
                hv_count += report.hess_products
                d, q_pred = report.x, report.obj
            else:
                h_arr = np.asarray(h_mat, dtype=float)
                if p.m is None:
                    sol = oracle_solve(h_arr, g, delta)
                    d = sol.x
                else:
                    # Whiten the metric so the oracle's Euclidean ball
                    # matches the M-norm trust region.
                    chol = np.linalg.cholesky(p.m)
                    hw = np.linalg.solve(
                        chol, np.linalg.solve(chol, h_arr.T).T
                    )
                    hw = 0.5 * (hw + hw.T)
                    sol = oracle_solve(hw, np.linalg.solve(chol, g), delta)
                    d = np.linalg.solve(chol.T, sol.x)
                report = sol
                q_pred = sol.obj
            if subproblem_hook is not None:
                subproblem_hook(h_mat, g, delta, report)
            if q_pred >= 0.0:
                outcome = "ascent-failure"
                break
            f_trial = p.f(x + d)
            rho = (f_trial - fx) / q_pred
            if history_out is not None:
                history_out["rhos"].append(rho)
                history_out["deltas"].append(delta)
                history_out["accepted"].append(bool(rho >= cfg.rho_acc))
            if rho >= cfg.rho_inc:
                delta *= cfg.gamma_inc
            elif not rho >= cfg.rho_acc:  # also shrinks on non-finite rho
                delta *= cfg.gamma_dec
            if rho >= cfg.rho_acc:
                x = x + d
                fx = f_trial
                break
            rejected_in_row += 1
            if rejected_in_row > 60:
                outcome = "radius-collapse"
                break
        if outcome in ("ascent-failure", "radius-collapse"):
            break
    else:
        k = cfg.max_outer
    wall_ms = (time.perf_counter() - t0) * 1000.0
    record = BenchRecord(
        problem=p.name,
        solver=solver,
        grad_norm=trace[-1] if trace else float("nan"),
        hv_count=hv_count,
        outer_iters=k,
        wall_ms=wall_ms,
        outcome=outcome,
    )
    return record, trace
