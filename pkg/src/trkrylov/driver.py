"""Vector-free reverse-communication driver for the Krylov trust-region loop.

The driver owns no vectors.  It hands the caller one :class:`Action` at a
time; the caller performs the requested vector operations on its own data and
feeds the demanded dot products back through :func:`step`.  Only scalars
cross the boundary.

Caller register file
--------------------
The caller maintains vector registers ``G`` (gradient), ``G_PREV``, ``V``
(= M^-1 G), ``P`` (direction), ``S`` (CG solution accumulator), ``HP`` (last
Hessian product), ``X`` (retransformed solution) and an append-only ``BASIS``
list.  The action contract:

==============  =============================================================
INIT_PRECOND    G <- g0, G_PREV <- 0, V <- M^-1 G.  Return <G, V>.
CG_DIR          If ``store``: append ``store * V`` to BASIS.
                P <- -V + beta * P  (beta = 0 initializes P).  Return ().
HESS_PROD       If ``p_scale``: P <- p_scale * V.  If ``store``: append
                ``store * V`` to BASIS.  HP <- H P.  Return <P, HP> and, in
                the CG phase, <P, M P>.
CG_UPDATE       G_PREV <- G; G <- G + alpha * HP; S <- S + alpha * P;
                V <- M^-1 G.  Return <G, V>.
LANCZOS_GRAD    G_new <- HP - a * G - b * G_PREV; G_PREV <- G; G <- G_new;
                V <- M^-1 G.  Return <G, V>.
RETRANSFORM     X <- sum_j h[j] * BASIS[j].  Return ().
OBJ_VALUE       Return q(X) = 0.5 <X, H X> + <g0, X>.
NEW_KRYLOV      Pick w nonzero and M-orthogonal to BASIS; V <- w; G <- M w;
                G_PREV <- 0.  Return <G, V> (= ||w||_M^2).
DONE            Terminal; solution scalars ride in the action payload.
==============  =============================================================

The BASIS entries are exactly the M-orthonormal Lanczos directions, in both
phases; ``RETRANSFORM`` coefficients therefore refer to BASIS directly.  A
conjugate-gradient phase builds the same tridiagonal data as the Lanczos
phase through the coefficient conversion :func:`cg_to_lanczos`; on curvature
breakdown the driver switches (once, irreversibly) to Lanczos iterations,
absorbing the CG-to-Lanczos rescaling of the gradient registers into the
first two ``LANCZOS_GRAD`` coefficient pairs.

Action kinds carry stable integer tags for foreign bindings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Sequence

import numpy as np

from . import subproblem
from .subproblem import SubproblemSolution, WarmStart
from .tridiag import TriMatrix

_EPS = float(np.finfo(float).eps)


class ActionKind(IntEnum):
    """Reverse-communication instruction tags (stable across versions)."""

    INIT_PRECOND = 1
    HESS_PROD = 2
    CG_UPDATE = 3
    CG_DIR = 4
    LANCZOS_GRAD = 5
    RETRANSFORM = 6
    NEW_KRYLOV = 7
    OBJ_VALUE = 8
    DONE = 9


class Outcome:
    """Terminal outcome codes carried by DONE actions."""

    INTERIOR = "interior-converged"
    BOUNDARY = "boundary-converged"
    MAX_ITER = "max-iter"
    HARD_CASE_SUBSPACE = "hard-case-invariant-subspace"
    CONVEXIFIED = "convexified-resolve"
    NUMERICAL_FAILURE = "numerical-failure"


class ProtocolError(RuntimeError):
    """The caller violated the reverse-communication contract."""


class PreconditionerError(RuntimeError):
    """A returned dot product implies M (or M^-1) is not positive definite."""


@dataclass
class TerminationConfig:
    """Convergence tolerances of the Krylov loop.

    The loop stops once the dual-norm Lagrangian gradient satisfies
    ``r <= max(tol_abs_i, tol_rel_i * gamma0)`` for interior iterates
    (``lam == 0``) and the ``_b`` pair on the boundary.  Relative tolerances
    left as None default, once ``gamma0 = ||g||_{M^-1}`` is known, to
    ``min(0.5, gamma0)`` (interior) and ``max(1e-6, min(0.5, sqrt(gamma0)))``
    (boundary).  ``tol_curvature`` governs the CG->Lanczos switch (None:
    sqrt(machine eps) relative to the running tridiagonal scale; 0 switches
    on exact breakdown only).
    """

    tol_abs_i: float = 0.0
    tol_rel_i: Optional[float] = None
    tol_abs_b: float = 0.0
    tol_rel_b: Optional[float] = None
    tol_curvature: Optional[float] = None
    max_iter: int = 1000

    def validate(self):
        for name in ("tol_abs_i", "tol_abs_b"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("tol_rel_i", "tol_rel_b", "tol_curvature"):
            v = getattr(self, name)
            if v is not None and v < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class Action:
    """One instruction to the caller plus scalar payload.

    ``expects`` names the scalars the next :func:`step` call must return,
    in order.
    """

    kind: ActionKind
    expects: tuple = ()
    alpha: Optional[float] = None
    beta: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    p_scale: Optional[float] = None
    store: Optional[float] = None
    h: Optional[np.ndarray] = None
    outcome: Optional[str] = None
    lam: Optional[float] = None
    obj: Optional[float] = None
    status: Optional[str] = None
    iterations: Optional[int] = None


class KrylovState:
    """Full state of one reverse-communication solve.

    Exclusively owned by one in-flight solve; never step a state from two
    threads at once.  Distinct states are fully independent.
    """

    def __init__(self, cfg: TerminationConfig, delta: float):
        self.reset(cfg, delta)

    def reset(self, cfg: TerminationConfig, delta: float):
        cfg.validate()
        if delta <= 0.0:
            raise ValueError("delta must be positive")
        self.cfg = cfg
        self.delta = float(delta)
        self.phase = "cg"
        self.pending: Optional[Action] = None
        self.gamma0 = 0.0
        self.alpha_hist: list = []
        self.beta_hist: list = []
        self.gv_hist: list = []
        self.diag: list = []
        self.offdiag: list = []
        self.block_starts = [0]
        self.gam: list = []  # gam[j] = ||g_j||_{M^-1}, incl. block-local gamma0s
        self.sign_acc = 1.0
        self.sign_hist: list = [1.0]
        self.rho_min = math.inf
        self.rho_max = -math.inf
        self.t_scale = 0.0
        self.g_scale = 1.0
        self.gprev_scale = 1.0
        self.sol: Optional[SubproblemSolution] = None
        self.theta_hint: Optional[float] = None  # theta_min of current T if known
        self.pending_beta: Optional[float] = None
        self.exhausted = False
        self.outcome: Optional[str] = None
        self.finish_stage: Optional[str] = None
        self.resume_phase: Optional[str] = None
        self.history: list = []
        self._tol_i: Optional[float] = None
        self._tol_b: Optional[float] = None

    # -- introspection -----------------------------------------------------

    @property
    def i(self) -> int:
        """Number of completed subspace dimensions (size of T)."""
        return len(self.diag)

    def tri_matrix(self) -> TriMatrix:
        return TriMatrix(
            np.array(self.diag), np.array(self.offdiag), list(self.block_starts)
        )

    @property
    def lam(self) -> float:
        return self.sol.lam if self.sol is not None else 0.0

    @property
    def h(self):
        return self.sol.h if self.sol is not None else None

    # -- internals ----------------------------------------------------------

    def _is_exhausted(self, gamma_next: float) -> bool:
        """Invariant-subspace breakdown test for a fresh coupling.

        Exhaustion shows as an abrupt collapse: the coupling drops by many
        orders in one step AND lands at a size whose effect on the
        tridiagonal spectrum is below roundoff.  Gradual decay toward a
        tight termination tolerance does neither, so genuinely tiny
        curvature content is never truncated away.
        """
        if gamma_next <= 1e-13 * max(self.t_scale, 1e-300):
            return True
        if gamma_next > math.sqrt(_EPS) * max(self.t_scale, 1e-300):
            return False
        prev = self.gam[self.i - 1] if self.i >= 1 else self.gamma0
        return gamma_next <= 1e-7 * prev

    def _thresholds(self):
        c = self.cfg
        g0 = self.gamma0
        rel_i = c.tol_rel_i if c.tol_rel_i is not None else min(0.5, g0)
        rel_b = (
            c.tol_rel_b
            if c.tol_rel_b is not None
            else max(1e-6, min(0.5, math.sqrt(g0)))
        )
        self._tol_i = max(c.tol_abs_i, rel_i * g0)
        self._tol_b = max(c.tol_abs_b, rel_b * g0)

    def _curvature_breakdown(self, p_hp: float, p_mp: float) -> bool:
        if self.cfg.tol_curvature is not None:
            return abs(p_hp) <= self.cfg.tol_curvature * p_mp
        scale = max(self.t_scale, abs(p_hp) / p_mp)
        return abs(p_hp) <= math.sqrt(_EPS) * scale * p_mp


def init(cfg: TerminationConfig, delta: float) -> tuple[KrylovState, Action]:
    """Start a solve; the first action asks for ``v = M^-1 g`` and ``<g,v>``."""
    state = KrylovState(cfg, delta)
    state.pending = Action(ActionKind.INIT_PRECOND, expects=("g_dot_v",))
    return state, state.pending


def check_convergence(state: KrylovState) -> bool:
    """Dual-norm termination test ``gamma^{i+1} |h_last| <= tol``.

    Uses the interior tolerance pair when the current multiplier is zero and
    the boundary pair otherwise.  An exhausted invariant subspace
    (``gamma^{i+1} = 0``) always reports converged; whether to explore
    further subspaces stays the caller's decision.
    """
    if state.sol is None:
        raise ProtocolError("no subproblem solution to test")
    gamma_next = state.gam[state.i] if len(state.gam) > state.i else 0.0
    if state.exhausted:
        return True
    r = gamma_next * abs(float(state.sol.h[-1]))
    tol = state._tol_i if state.sol.lam == 0.0 else state._tol_b
    if len(state.block_starts) > 1 and state.sol.h[-1] == 0.0:
        # Zero padding in the live block: first-order residual vanishes, but
        # the block's smallest eigenvalue is still dropping as it grows, so
        # the branch choice is not yet trustworthy.  Keep iterating.
        return False
    return r <= tol


def ill_conditioning_gate(state: KrylovState, q_h: float, q_x: float) -> str:
    """Decide whether lost basis orthogonality requires a convexified re-solve.

    Called after boundary convergence when the multiplier is substantial and
    the observed Rayleigh quotients span at least eight orders of magnitude;
    the coordinate-space and vector-space objective values then must agree.
    Returns "proceed" or "convexify_resolve".
    """
    if q_x > 0.0 or abs(q_x - q_h) > 1e-7 * max(1.0, abs(q_x)):
        return "convexify_resolve"
    return "proceed"


def _gate_preconditions(state: KrylovState) -> bool:
    if state.sol is None or state.sol.lam <= 0.0:
        return False
    if state.outcome == Outcome.MAX_ITER:
        return False
    if not (state.rho_max > 0.0) or not math.isfinite(state.rho_max):
        return False
    if state.sol.lam < 1e-2 * max(1.0, state.rho_max):
        return False
    return abs(state.rho_min) <= 1e-8 * state.rho_max


def cg_to_lanczos(
    alpha_hist: Sequence[float],
    beta_hist: Sequence[float],
    vnorm0: float,
) -> tuple[list, list, list]:
    """Convert CG coefficients to Lanczos tridiagonal data.

    Returns ``(gammas, deltas, signs)`` with ``gammas[0] = vnorm0``,
    ``gammas[i] = sqrt(beta[i-1]) / |alpha[i-1]|``, ``deltas[0] =
    1/alpha[0]``, ``deltas[i] = 1/alpha[i] + beta[i-1]/alpha[i-1]`` and
    ``signs[i]`` the accumulated products of ``-sign(alpha[j])`` relating CG
    residual directions to the Lanczos basis.
    """
    m = len(alpha_hist)
    if any(a == 0.0 for a in alpha_hist):
        raise ZeroDivisionError("zero CG step length; crossover must handle this")
    if m > 0 and len(beta_hist) < m - 1:
        raise ValueError("need beta_hist for every completed iteration but the last")
    gammas = [float(vnorm0)]
    deltas = []
    signs = [1.0]
    for j in range(m):
        if j >= 1:
            gammas.append(math.sqrt(beta_hist[j - 1]) / abs(alpha_hist[j - 1]))
            signs.append(signs[-1] * -math.copysign(1.0, alpha_hist[j - 1]))
        if j == 0:
            deltas.append(1.0 / alpha_hist[0])
        else:
            deltas.append(1.0 / alpha_hist[j] + beta_hist[j - 1] / alpha_hist[j - 1])
    return gammas, deltas, signs


def step(state: KrylovState, returned: Sequence[float] = ()) -> Action:
    """Advance the state machine after serving the pending action.

    ``returned`` must carry exactly the scalars named by the pending
    action's ``expects`` field, in order.
    """
    act = state.pending
    if act is None:
        raise ProtocolError("state has no pending action; call init first")
    if act.kind == ActionKind.DONE:
        raise ProtocolError("state is finished; reenter or reinitialize it")
    if len(returned) != len(act.expects):
        raise ProtocolError(
            f"action {act.kind.name} expects scalars {act.expects}, "
            f"got {len(returned)} value(s)"
        )
    vals = [float(v) for v in returned]
    if any(not math.isfinite(v) for v in vals):
        return _finish_failure(state)

    kind = act.kind
    if kind == ActionKind.INIT_PRECOND:
        return _on_init(state, vals[0])
    if kind == ActionKind.CG_DIR:
        return _emit(state, Action(ActionKind.HESS_PROD, expects=("p_dot_Hp", "p_dot_Mp")))
    if kind == ActionKind.HESS_PROD:
        if state.phase == "cg":
            return _on_hess_cg(state, vals[0], vals[1])
        return _on_hess_lanczos(state, vals[0])
    if kind == ActionKind.CG_UPDATE:
        return _on_cg_update(state, vals[0])
    if kind == ActionKind.LANCZOS_GRAD:
        return _on_lanczos_grad(state, vals[0])
    if kind == ActionKind.RETRANSFORM:
        return _on_retransform(state)
    if kind == ActionKind.OBJ_VALUE:
        return _on_obj_value(state, vals[0])
    if kind == ActionKind.NEW_KRYLOV:
        return _on_new_krylov(state, vals[0])
    raise ProtocolError(f"unhandled action kind {kind!r}")


def _emit(state: KrylovState, action: Action) -> Action:
    state.pending = action
    return action


def _finish_failure(state: KrylovState) -> Action:
    state.phase = "done"
    state.outcome = Outcome.NUMERICAL_FAILURE
    return _emit(
        state,
        Action(ActionKind.DONE, outcome=Outcome.NUMERICAL_FAILURE, iterations=state.i),
    )


def _check_gv(state: KrylovState, gv: float) -> float:
    """Validate a returned gradient norm square, absorbing roundoff.

    Exhausted subspaces legitimately return values at negative roundoff
    level; a clearly negative value means the preconditioner is broken.
    """
    if gv >= 0.0:
        return gv
    scale = state.gv_hist[0] if state.gv_hist else abs(gv)
    if gv < -1e3 * _EPS * max(scale, 1e-300):
        raise PreconditionerError(
            "<g, M^-1 g> < 0: preconditioner not positive definite"
        )
    return 0.0


def _on_init(state: KrylovState, gv0: float) -> Action:
    if gv0 < 0.0:
        raise PreconditionerError("<g, M^-1 g> < 0: preconditioner not positive definite")
    state.gamma0 = math.sqrt(gv0)
    state._thresholds()
    state.gv_hist.append(gv0)
    if state.gamma0 == 0.0:
        state.sol = SubproblemSolution(
            h=np.zeros(0), lam=0.0, obj=0.0, status=subproblem.INTERIOR
        )
        state.exhausted = True
        return _begin_finish(state, Outcome.INTERIOR)
    state.gam.append(state.gamma0)
    return _emit(
        state,
        Action(
            ActionKind.CG_DIR,
            beta=0.0,
            store=1.0 / state.gamma0,
        ),
    )


def _solve_current(state: KrylovState):
    t = state.tri_matrix()
    warm = WarmStart(
        prev_lambda=state.sol.lam if state.sol is not None else None,
        prev_hat_theta_min=state.theta_hint,
    )
    state.sol = subproblem.solve(t, state.gamma0, state.delta, warm)
    state.theta_hint = state.sol.theta_min


def _append_entry(state: KrylovState, delta_entry: float):
    j = state.i
    if j > 0:
        state.offdiag.append(0.0 if j in state.block_starts else state.gam[j])
    state.diag.append(delta_entry)
    # The scale tracks entries of T only; gam[j] at block starts is the
    # restart gradient's norm, which lives on a different scale.
    state.t_scale = max(state.t_scale, abs(delta_entry))
    if j > 0 and j not in state.block_starts:
        state.t_scale = max(state.t_scale, abs(state.gam[j]))


def _on_hess_cg(state: KrylovState, p_hp: float, p_mp: float) -> Action:
    tiny = 1e3 * _EPS * max(state.gv_hist[0], 1e-300)
    if p_mp < -tiny:
        raise PreconditionerError("<p, M p> < 0: metric not positive definite")
    degenerate = p_mp <= tiny  # direction collapsed to roundoff: switch
    if not degenerate:
        rho = p_hp / p_mp
        state.rho_min = min(state.rho_min, rho)
        state.rho_max = max(state.rho_max, rho)
    j = state.i
    if degenerate or state._curvature_breakdown(p_hp, p_mp):
        # Irreversible switch to Lanczos iterations at index j.  The basis
        # vector p_j is already stored; rebuild the register P from V and
        # absorb the CG->Lanczos rescaling of G/G_PREV into the next two
        # gradient-update coefficient pairs.
        state.phase = "lanczos"
        s_j = state.sign_hist[j]
        c_p = s_j / math.sqrt(state.gv_hist[j])
        state.g_scale = state.gam[j] * s_j / math.sqrt(state.gv_hist[j])
        if j >= 1:
            s_prev = state.sign_hist[j - 1]
            state.gprev_scale = (
                state.gam[j - 1] * s_prev / math.sqrt(state.gv_hist[j - 1])
            )
        else:
            state.gprev_scale = 1.0
        return _emit(
            state,
            Action(ActionKind.HESS_PROD, expects=("p_dot_Hp",), p_scale=c_p),
        )
    alpha = state.gv_hist[j] / p_hp
    state.alpha_hist.append(alpha)
    if j == 0:
        entry = 1.0 / alpha
    else:
        entry = 1.0 / alpha + state.beta_hist[j - 1] / state.alpha_hist[j - 1]
    _append_entry(state, entry)
    _solve_current(state)
    return _emit(
        state, Action(ActionKind.CG_UPDATE, expects=("g_dot_v",), alpha=alpha)
    )


def _on_cg_update(state: KrylovState, gv_next: float) -> Action:
    gv_next = _check_gv(state, gv_next)
    j = state.i - 1  # completed CG iteration index
    beta = gv_next / state.gv_hist[j]
    state.beta_hist.append(beta)
    state.gv_hist.append(gv_next)
    gamma_next = math.sqrt(beta) / abs(state.alpha_hist[j])
    state.gam.append(gamma_next)
    state.pending_beta = beta
    return _after_gradient_update(state, gamma_next)


def _on_hess_lanczos(state: KrylovState, p_hp: float) -> Action:
    rho = p_hp  # <p, M p> = 1 in the Lanczos phase
    state.rho_min = min(state.rho_min, rho)
    state.rho_max = max(state.rho_max, rho)
    j = state.i
    _append_entry(state, p_hp)
    _solve_current(state)
    gam_j = state.gam[j]
    a = (p_hp / gam_j) * state.g_scale
    if j in state.block_starts:
        b = 0.0
    else:
        b = (gam_j / state.gam[j - 1]) * state.gprev_scale
    state.g_scale, state.gprev_scale = 1.0, state.g_scale
    return _emit(
        state, Action(ActionKind.LANCZOS_GRAD, expects=("g_dot_v",), a=a, b=b)
    )


def _on_lanczos_grad(state: KrylovState, gv_next: float) -> Action:
    gv_next = _check_gv(state, gv_next)
    state.gv_hist.append(gv_next)
    gamma_next = math.sqrt(gv_next)
    state.gam.append(gamma_next)
    return _after_gradient_update(state, gamma_next)


def _after_gradient_update(state: KrylovState, gamma_next: float) -> Action:
    state.exhausted = state._is_exhausted(gamma_next)
    r = gamma_next * abs(float(state.sol.h[-1]))
    state.history.append(
        {
            "i": state.i,
            "lam": state.sol.lam,
            "obj": state.sol.obj,
            "gamma_next": gamma_next,
            "residual": r,
            "status": state.sol.status,
        }
    )
    if check_convergence(state):
        if state.exhausted and state.sol.status != subproblem.INTERIOR:
            outcome = Outcome.HARD_CASE_SUBSPACE
        elif state.sol.lam == 0.0:
            outcome = Outcome.INTERIOR
        else:
            outcome = Outcome.BOUNDARY
        return _begin_finish(state, outcome)
    if state.i >= state.cfg.max_iter:
        return _begin_finish(state, Outcome.MAX_ITER)
    if state.phase == "cg":
        j = state.i - 1
        state.sign_acc *= -math.copysign(1.0, state.alpha_hist[j])
        state.sign_hist.append(state.sign_acc)
        return _emit(
            state,
            Action(
                ActionKind.CG_DIR,
                beta=state.pending_beta,
                store=state.sign_acc / math.sqrt(state.gv_hist[-1]),
            ),
        )
    scale = 1.0 / gamma_next
    return _emit(
        state,
        Action(
            ActionKind.HESS_PROD,
            expects=("p_dot_Hp",),
            p_scale=scale,
            store=scale,
        ),
    )


def _begin_finish(state: KrylovState, outcome: str) -> Action:
    state.resume_phase = state.phase
    state.phase = "done"
    state.outcome = outcome
    state.finish_stage = "retransform"
    return _emit(
        state,
        Action(ActionKind.RETRANSFORM, h=np.asarray(state.sol.h, dtype=float)),
    )


def _on_retransform(state: KrylovState) -> Action:
    if state.finish_stage == "retransform" and _gate_preconditions(state):
        state.finish_stage = "obj_query"
        return _emit(state, Action(ActionKind.OBJ_VALUE, expects=("q_x",)))
    return _emit_done(state)


def _on_obj_value(state: KrylovState, q_x: float) -> Action:
    decision = ill_conditioning_gate(state, state.sol.obj, q_x)
    if decision == "proceed":
        return _emit_done(state)
    t = state.tri_matrix()
    d = subproblem.convexify(t)
    t_conv = TriMatrix(t.diag + d, t.offdiag, list(t.block_starts))
    state.sol = subproblem.solve(t_conv, state.gamma0, state.delta)
    state.outcome = Outcome.CONVEXIFIED
    state.finish_stage = "post_resolve"
    return _emit(
        state,
        Action(ActionKind.RETRANSFORM, h=np.asarray(state.sol.h, dtype=float)),
    )


def _emit_done(state: KrylovState) -> Action:
    state.finish_stage = None
    return _emit(
        state,
        Action(
            ActionKind.DONE,
            outcome=state.outcome,
            h=np.asarray(state.sol.h, dtype=float),
            lam=state.sol.lam,
            obj=state.sol.obj,
            status=state.sol.status,
            iterations=state.i,
        ),
    )


def reenter_radius(state: KrylovState, delta_new: float) -> Action:
    """Hotstart after only the radius changed.

    Re-solves the tridiagonal subproblem at the new radius and re-tests
    termination; iterations resume exactly where they stopped when the
    hotstarted solution does not pass.  Requires the caller's register file
    from the finished solve to be intact.
    """
    if state.pending is None or state.pending.kind != ActionKind.DONE:
        raise ProtocolError("reentry requires a finished state")
    if state.outcome == Outcome.NUMERICAL_FAILURE or state.i == 0:
        raise ProtocolError("reentry on a corrupted state")
    if delta_new <= 0.0:
        raise ValueError("delta must be positive")
    state.delta = float(delta_new)
    t = state.tri_matrix()
    warm = WarmStart(
        prev_lambda=state.sol.lam,
        prev_theta_min=state.theta_hint,
    )
    state.sol = subproblem.resolve_radius(t, state.gamma0, delta_new, warm)
    state.theta_hint = (
        state.sol.theta_min if state.sol.theta_min is not None else state.theta_hint
    )
    if check_convergence(state):
        if state.exhausted and state.sol.status != subproblem.INTERIOR:
            outcome = Outcome.HARD_CASE_SUBSPACE
        elif state.sol.lam == 0.0:
            outcome = Outcome.INTERIOR
        else:
            outcome = Outcome.BOUNDARY
        return _begin_finish(state, outcome)
    # Resume iterations.
    state.phase = state.resume_phase
    state.outcome = None
    gamma_next = state.gam[state.i]
    if state.phase == "cg":
        j = state.i - 1
        state.sign_acc *= -math.copysign(1.0, state.alpha_hist[j])
        state.sign_hist.append(state.sign_acc)
        return _emit(
            state,
            Action(
                ActionKind.CG_DIR,
                beta=state.pending_beta,
                store=state.sign_acc / math.sqrt(state.gv_hist[-1]),
            ),
        )
    scale = 1.0 / gamma_next
    return _emit(
        state,
        Action(ActionKind.HESS_PROD, expects=("p_dot_Hp",), p_scale=scale, store=scale),
    )


def request_new_krylov(state: KrylovState) -> Action:
    """Open a new invariant subspace after Lanczos breakdown.

    Only valid on a finished state whose last coupling vanished.  The caller
    must supply a fresh start vector that is M-orthogonal to every stored
    basis direction and return its squared M-norm.
    """
    if state.pending is None or state.pending.kind != ActionKind.DONE:
        raise ProtocolError("new Krylov spaces can only be opened on a finished state")
    if not state.exhausted:
        raise ProtocolError("current subspace is not exhausted")
    return _emit(state, Action(ActionKind.NEW_KRYLOV, expects=("m_norm_sq",)))


def _on_new_krylov(state: KrylovState, m_norm_sq: float) -> Action:
    if m_norm_sq <= 0.0:
        raise ProtocolError("restart vector with zero M-norm rejected")
    j = state.i
    state.block_starts.append(j)
    gamma_new = math.sqrt(m_norm_sq)
    state.gam[j] = gamma_new  # replaces the vanished coupling slot
    state.gv_hist.append(m_norm_sq)
    state.phase = "lanczos"
    state.resume_phase = "lanczos"
    state.outcome = None
    state.exhausted = False
    state.finish_stage = None
    state.g_scale = 1.0
    state.gprev_scale = 1.0
    scale = 1.0 / gamma_new
    return _emit(
        state,
        Action(ActionKind.HESS_PROD, expects=("p_dot_Hp",), p_scale=scale, store=scale),
    )
