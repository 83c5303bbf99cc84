"""Convenience layer running the reverse-communication loop over in-memory
operators.

Owns the caller-side register file of the protocol (see
:mod:`trkrylov.driver`), stores every basis direction, reconstructs the
solution vector, serves restarts with seeded random vectors orthogonalized by
modified Gram-Schmidt, and provides a truncated-CG baseline for comparisons.

Direction storage is dense (n x i), the deliberate memory/CPU trade-off of a
desk-scale backend; the vector-free core leaves that choice to its caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg

from . import driver, subproblem
from .driver import Action, ActionKind, Outcome, TerminationConfig

Operator = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass
class DenseProblem:
    """Trust-region problem data over in-memory operators.

    ``h`` and ``m`` may be dense symmetric matrices or matvec callables; a
    callable ``m`` requires the explicit inverse application ``minv``.
    ``m=None`` means the identity metric.
    """

    h: Operator
    g: np.ndarray
    delta: float
    m: Optional[Operator] = None
    minv: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.delta <= 0.0:
            raise ValueError("delta must be positive")
        if isinstance(self.h, np.ndarray):
            nrm = np.linalg.norm(self.h, ord=np.inf)
            if nrm > 0 and np.linalg.norm(self.h - self.h.T, ord=np.inf) > 1e-12 * nrm:
                raise ValueError("H must be symmetric")
        if callable(self.m) and self.minv is None:
            raise ValueError("callable M requires an explicit minv")

    @property
    def n(self) -> int:
        return len(self.g)

    def apply_h(self, x: np.ndarray) -> np.ndarray:
        return self.h(x) if callable(self.h) else self.h @ x

    def apply_m(self, x: np.ndarray) -> np.ndarray:
        if self.m is None:
            return x.copy()
        return self.m(x) if callable(self.m) else self.m @ x


@dataclass
class SolveReport:
    """Result of one dense solve.

    ``hess_products`` counts served HESS_PROD actions; ``iterations`` the
    subspace dimensions built.  ``lanczos_directions`` optionally retains
    the stored basis for diagnostics.
    """

    x: np.ndarray
    lam: float
    obj: float
    hess_products: int
    iterations: int
    outcome: str
    status: str = ""
    kkt_residual: float = float("nan")
    lanczos_directions: Optional[np.ndarray] = None
    history: list = field(default_factory=list)
    snorm_history: list = field(default_factory=list)


def mgs_restart(prev_dirs, m: Optional[Operator], seed=0) -> np.ndarray:
    """Random unit vector M-orthogonal to the given M-orthonormal directions.

    Two modified Gram-Schmidt passes keep the residual overlaps below 1e-10
    even for moderately ill-conditioned direction sets.

    Raises
    ------
    ValueError
        When the directions already span the whole space ("subspace full").
    """
    dirs = [np.asarray(p, dtype=float) for p in prev_dirs]
    if not dirs:
        raise ValueError("need the ambient dimension from at least one direction")
    n = len(dirs[0])
    if len(dirs) >= n:
        raise ValueError("subspace full")

    def apply_m(x):
        if m is None:
            return x
        return m(x) if callable(m) else m @ x

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    for _ in range(50):
        v = rng.standard_normal(n)
        for _pass in range(2):
            for p in dirs:
                v -= float(v @ apply_m(p)) * p
        nrm = math.sqrt(float(v @ apply_m(v)))
        if nrm > 1e-8 * math.sqrt(n):
            return v / nrm
    raise ValueError("could not draw a vector outside the explored subspace")


class _Registers:
    """Caller-side register file of the reverse-communication protocol.

    Since every basis direction is stored anyway, new Lanczos gradients are
    fully reorthogonalized against the stored basis; without this, plain
    three-term recurrences harvest roundoff ghosts past an invariant
    subspace instead of exhausting it.
    """

    def __init__(self, problem: DenseProblem, minv: Callable):
        n = problem.n
        self.problem = problem
        self.minv = minv
        self.G = problem.g.copy()
        self.G_PREV = np.zeros(n)
        self.V = np.zeros(n)
        self.P = np.zeros(n)
        self.S = np.zeros(n)
        self.HP = np.zeros(n)
        self.X = np.zeros(n)
        self.basis: list = []
        self.basis_m: list = []
        self.hess_products = 0
        self.snorms: list = []

    def _append_basis(self, vec):
        self.basis.append(vec)
        self.basis_m.append(self.problem.apply_m(vec))

    def _reorthogonalize(self, g_new):
        for _ in range(2):
            for p_vec, mp_vec in zip(self.basis, self.basis_m):
                g_new = g_new - float(g_new @ p_vec) * mp_vec
        return g_new

    def serve(self, action: Action):
        """Perform the vector work of one action; return its demanded scalars."""
        p = self.problem
        kind = action.kind
        if kind == ActionKind.INIT_PRECOND:
            self.G = p.g.copy()
            self.G_PREV = np.zeros(p.n)
            self.V = self.minv(self.G)
            return (float(self.G @ self.V),)
        if kind == ActionKind.CG_DIR:
            if action.store is not None:
                self._append_basis(action.store * self.V)
            self.P = -self.V + action.beta * self.P
            return ()
        if kind == ActionKind.HESS_PROD:
            if action.p_scale is not None:
                self.P = action.p_scale * self.V
            if action.store is not None:
                self._append_basis(action.store * self.V)
            self.HP = p.apply_h(self.P)
            self.hess_products += 1
            if len(action.expects) == 2:
                return (float(self.P @ self.HP), float(self.P @ p.apply_m(self.P)))
            return (float(self.P @ self.HP),)
        if kind == ActionKind.CG_UPDATE:
            self.G_PREV = self.G
            self.G = self.G + action.alpha * self.HP
            self.S = self.S + action.alpha * self.P
            self.V = self.minv(self.G)
            self.snorms.append(math.sqrt(float(self.S @ p.apply_m(self.S))))
            return (float(self.G @ self.V),)
        if kind == ActionKind.LANCZOS_GRAD:
            g_new = self.HP - action.a * self.G - action.b * self.G_PREV
            g_new = self._reorthogonalize(g_new)
            self.G_PREV = self.G
            self.G = g_new
            self.V = self.minv(self.G)
            return (float(self.G @ self.V),)
        if kind == ActionKind.RETRANSFORM:
            self.X = np.zeros(p.n)
            for coeff, vec in zip(action.h, self.basis):
                self.X += coeff * vec
            return ()
        if kind == ActionKind.OBJ_VALUE:
            hx = p.apply_h(self.X)
            return (0.5 * float(self.X @ hx) + float(p.g @ self.X),)
        raise RuntimeError(f"dense backend cannot serve {kind!r}")


def _make_minv(problem: DenseProblem) -> Callable:
    if problem.m is None:
        return lambda x: x.copy()
    if callable(problem.m):
        return problem.minv
    cho = scipy.linalg.cho_factor(problem.m)
    return lambda x: scipy.linalg.cho_solve(cho, x)


class GltrSession:
    """One dense solve with reentry support.

    ``solve()`` drives the protocol to DONE, restarting into new invariant
    subspaces while the boundary solution may still be improvable and the
    basis does not span the space.  ``reenter(delta_new)`` hotstarts after a
    radius change, reusing the live register file.
    """

    def __init__(
        self,
        problem: DenseProblem,
        cfg: Optional[TerminationConfig] = None,
        seed: int = 0,
    ):
        self.problem = problem
        if cfg is None:
            cfg = TerminationConfig(max_iter=10 * problem.n)
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self.regs = _Registers(problem, _make_minv(problem))
        self.state: Optional[driver.KrylovState] = None
        self._last_done: Optional[Action] = None

    def _run(self, action: Action) -> Action:
        state = self.state
        while action.kind != ActionKind.DONE:
            if action.kind == ActionKind.NEW_KRYLOV:
                w = mgs_restart(self.regs.basis, self.problem.m, self.rng)
                self.regs.V = w
                self.regs.G = self.problem.apply_m(w)
                self.regs.G_PREV = np.zeros(self.problem.n)
                scalars = (float(self.regs.G @ self.regs.V),)
            else:
                scalars = self.regs.serve(action)
            action = driver.step(state, scalars)
        return action

    def _strictly_interior(self) -> bool:
        sol = self.state.sol
        if sol is None or sol.status != subproblem.INTERIOR:
            return False
        return float(np.linalg.norm(sol.h)) < (1.0 - 1e-9) * self.state.delta

    def _drive(self, action: Action) -> Action:
        action = self._run(action)
        # Invariant-subspace policy: accept exhausted solutions that are
        # strictly interior, otherwise explore further invariant subspaces
        # until the basis spans R^n (the core leaves this choice to its
        # caller; a desk-scale backend prefers exactness).
        while (
            action.kind == ActionKind.DONE
            and action.outcome != Outcome.NUMERICAL_FAILURE
            and self.state.exhausted
            and not self._strictly_interior()
            and len(self.regs.basis) < self.problem.n
        ):
            action = self._run(driver.request_new_krylov(self.state))
        self._last_done = action
        return action

    def solve(self) -> SolveReport:
        self.regs = _Registers(self.problem, _make_minv(self.problem))
        self.state, action = driver.init(self.cfg, self.problem.delta)
        return self._report(self._drive(action))

    def reenter(self, delta_new: float) -> SolveReport:
        if self.state is None:
            raise RuntimeError("reenter requires a completed solve")
        action = driver.reenter_radius(self.state, delta_new)
        if action.kind != ActionKind.DONE:
            action = self._drive(action)
        else:
            self._last_done = action
        return self._report(action)

    @property
    def hess_products(self) -> int:
        return self.regs.hess_products

    def _report(self, done: Action) -> SolveReport:
        p = self.problem
        x = self.regs.X.copy()
        lam = done.lam if done.lam is not None else 0.0
        if done.outcome == Outcome.NUMERICAL_FAILURE:
            obj = float("nan")
            kkt = float("nan")
        else:
            obj = done.obj
            resid = p.apply_h(x) + lam * p.apply_m(x) + p.g
            kkt = math.sqrt(max(float(resid @ self.regs.minv(resid)), 0.0))
        basis = (
            np.column_stack(self.regs.basis) if self.regs.basis else np.zeros((p.n, 0))
        )
        return SolveReport(
            x=x,
            lam=lam,
            obj=obj,
            hess_products=self.regs.hess_products,
            iterations=done.iterations or 0,
            outcome=done.outcome,
            status=done.status or "",
            kkt_residual=kkt,
            lanczos_directions=basis,
            history=list(self.state.history) if self.state is not None else [],
            snorm_history=list(self.regs.snorms),
        )


def solve_gltr(
    problem: DenseProblem,
    cfg: Optional[TerminationConfig] = None,
    seed: int = 0,
) -> SolveReport:
    """Solve a dense trust-region problem through the vector-free driver.

    Stores every basis direction, serves restarts with seeded pseudo-random
    vectors, and reports the KKT stationarity residual of the final pair.
    Identical inputs and seed give an identical report.
    """
    return GltrSession(problem, cfg, seed).solve()


def solve_st(
    problem: DenseProblem, cfg: Optional[TerminationConfig] = None
) -> SolveReport:
    """Truncated conjugate-gradient baseline (projection to the boundary).

    Plain preconditioned CG that stops at the trust-region crossing along
    the current direction when it encounters negative curvature or when the
    step would leave the ball; interior convergence uses the same interior
    criterion as the Krylov driver.  No multiplier estimate is produced for
    boundary exits (reported as 0).
    """
    p = problem
    if cfg is None:
        cfg = TerminationConfig(max_iter=10 * p.n)
    cfg.validate()
    minv = _make_minv(p)
    n = p.n
    x = np.zeros(n)
    g = p.g.copy()
    v = minv(g)
    gv = float(g @ v)
    gamma0 = math.sqrt(max(gv, 0.0))
    tol_rel = cfg.tol_rel_i if cfg.tol_rel_i is not None else min(0.5, gamma0)
    tol = max(cfg.tol_abs_i, tol_rel * gamma0)
    direction = -v
    hess_products = 0
    outcome = Outcome.MAX_ITER
    xmx = 0.0

    def boundary_step(x, d):
        # positive root of ||x + tau d||_M = delta
        md = p.apply_m(d)
        a = float(d @ md)
        b = float(x @ md)
        c = xmx - p.delta**2
        tau = (-b + math.sqrt(max(b * b - a * c, 0.0))) / a
        return x + tau * d

    if gamma0 <= tol:
        outcome = Outcome.INTERIOR
        iterations = 0
    else:
        iterations = 0
        for iterations in range(1, cfg.max_iter + 1):
            hd = p.apply_h(direction)
            hess_products += 1
            kappa = float(direction @ hd)
            if kappa <= 0.0:
                x = boundary_step(x, direction)
                outcome = Outcome.BOUNDARY
                break
            alpha = gv / kappa
            x_next = x + alpha * direction
            mx = p.apply_m(x_next)
            xmx_next = float(x_next @ mx)
            if xmx_next >= p.delta**2:
                x = boundary_step(x, direction)
                outcome = Outcome.BOUNDARY
                break
            x = x_next
            xmx = xmx_next
            g = g + alpha * hd
            v = minv(g)
            gv_next = float(g @ v)
            if math.sqrt(max(gv_next, 0.0)) <= tol:
                outcome = Outcome.INTERIOR
                gv = gv_next
                break
            beta = gv_next / gv
            gv = gv_next
            direction = -v + beta * direction

    hx = p.apply_h(x)
    obj = 0.5 * float(x @ hx) + float(p.g @ x)
    return SolveReport(
        x=x,
        lam=0.0,
        obj=obj,
        hess_products=hess_products,
        iterations=iterations,
        outcome=outcome,
        status="",
        kkt_residual=float("nan"),
    )
