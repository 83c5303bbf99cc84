"""Exact solution of the coordinate trust-region problem.

Solves ``min 0.5 <h, T h> + gamma0 * h[0]  s.t.  ||h||_2 <= Delta`` over a
(possibly block-diagonal) symmetric tridiagonal ``T``.  Cases handled:

- interior: ``T`` positive definite and the stationary point fits the ball;
- boundary (easy case): Newton root finding on the reciprocal secular
  function ``sigma(lam) = 1/||x(lam)|| - 1/Delta``;
- exact hard case over irreducible blocks: the gradient touches only the
  first block, and the global minimizer may need an eigenvector of the block
  attaining the smallest eigenvalue;
- near hard case: no admissible multiplier reaches the radius in floating
  point, resolved with a pseudo-solve at the smallest eigenvalue plus an
  eigenvector correction;
- convexification of indefinite ``T`` by a nonnegative diagonal shift;
- auxiliary shifted solves and multiplier band search used by outer
  algorithms that need them.

Solutions report a multiplier ``lam >= 0``, the objective value and a status
tag.  Warm-start payloads carry the previous multiplier and eigenvalue
information so a growing process can hotstart each next solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tridiag import (
    IndefiniteError,
    LdlFactor,
    TriMatrix,
    inverse_iteration,
    ldlt_shifted,
    smallest_eig,
    solve_ldlt,
)

INTERIOR = "interior"
BOUNDARY = "boundary"
HARD_CASE = "hard_case"
NEAR_HARD_CASE = "near_hard_case"

_BOUNDARY_RTOL = 1e-10
_NEWTON_MAX_ITER = 100
_EPS = float(np.finfo(float).eps)


@dataclass
class SubproblemSolution:
    """Solution of the tridiagonal trust-region problem.

    ``h`` is the coordinate solution, ``lam`` the multiplier (0 for interior
    solutions), ``obj`` the objective value ``0.5 <h,Th> + gamma0 h[0]`` and
    ``status`` one of the module status constants.  ``newton_iters`` counts
    secular-equation Newton steps.
    """

    h: np.ndarray
    lam: float
    obj: float
    status: str
    newton_iters: int = 0
    theta_min: Optional[float] = None  # smallest eigenvalue, when computed


@dataclass
class WarmStart:
    """Hotstart payload between successive solves.

    ``prev_lambda`` is tried first as the boundary multiplier.
    ``prev_hat_theta_min`` is the smallest eigenvalue of the leading
    principal submatrix of the matrix being solved (i.e. of the previous
    iteration's matrix in a growing process); it enables lifted-function
    root finding.  ``prev_theta_min`` is the smallest eigenvalue of this
    very matrix when it is already known (radius-only re-solves).
    """

    prev_lambda: Optional[float] = None
    prev_theta_min: Optional[float] = None
    prev_hat_theta_min: Optional[float] = None
    factor_cache: Optional[LdlFactor] = None

    def __post_init__(self):
        if self.prev_lambda is not None and self.prev_lambda < 0.0:
            raise ValueError("prev_lambda must be nonnegative")


class _NearHardSignal(Exception):
    """Raised internally when no admissible multiplier reaches the radius."""


def _objective(t: TriMatrix, gamma0: float, h: np.ndarray) -> float:
    th = t.diag * h
    if t.n > 1:
        th[:-1] += t.offdiag * h[1:]
        th[1:] += t.offdiag * h[:-1]
    return 0.5 * float(h @ th) + gamma0 * float(h[0])


def _apply_shifted(t: TriMatrix, lam: float, x: np.ndarray) -> np.ndarray:
    y = (t.diag + lam) * x
    if t.n > 1:
        y[:-1] += t.offdiag * x[1:]
        y[1:] += t.offdiag * x[:-1]
    return y


def _x_of_lambda(t: TriMatrix, gamma0: float, lam: float):
    """Return ``(x, factor)`` for ``x = (T + lam I)^{-1} (-gamma0 e1)``.

    One step of iterative refinement keeps the stationarity residual at
    machine level even when the shifted matrix is badly conditioned.
    """
    factor = ldlt_shifted(t, lam, raise_on_indefinite=False)
    if not factor.is_positive_definite():
        raise IndefiniteError(
            factor.ok_prefix if factor.ok_prefix is not None else t.n - 1
        )
    rhs = np.zeros(t.n)
    rhs[0] = -gamma0
    x = solve_ldlt(factor, rhs)
    resid = _apply_shifted(t, lam, x) - rhs
    x = x - solve_ldlt(factor, resid)
    return x, factor


def solve(
    t: TriMatrix,
    gamma0: float,
    delta: float,
    warm: Optional[WarmStart] = None,
) -> SubproblemSolution:
    """Solve the trust-region problem for ``T``, gradient ``gamma0 * e1``.

    Dispatches on the block structure: a single irreducible block goes
    through the interior test and then the boundary Newton iteration; a
    block-diagonal matrix goes through the invariant-subspace treatment of
    :func:`solve_blocks`.
    """
    if gamma0 <= 0.0:
        raise ValueError("gamma0 must be positive")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if not t.is_irreducible():
        return solve_blocks(t, gamma0, delta)
    return _solve_irreducible(t, gamma0, delta, warm)


def _solve_irreducible(
    t: TriMatrix,
    gamma0: float,
    delta: float,
    warm: Optional[WarmStart] = None,
) -> SubproblemSolution:
    try:
        x, _ = _x_of_lambda(t, gamma0, 0.0)
        if np.linalg.norm(x) <= delta:
            return SubproblemSolution(
                h=x, lam=0.0, obj=_objective(t, gamma0, x), status=INTERIOR
            )
    except IndefiniteError:
        pass
    lam0, theta_min = _newton_init(t, gamma0, delta, warm)
    try:
        sol = solve_easy(t, gamma0, delta, lam0, theta_min=theta_min)
    except _NearHardSignal:
        if theta_min is None:
            hint = warm.prev_hat_theta_min if warm is not None else None
            theta_min = smallest_eig(t, hat_theta_min=hint)
        sol = near_hard(t, gamma0, delta, theta_min)
    sol.theta_min = theta_min if sol.theta_min is None else sol.theta_min
    return sol


def newton_init(
    t: TriMatrix, gamma0: float, delta: float, warm: Optional[WarmStart] = None
) -> float:
    """Initial multiplier for the boundary Newton iteration.

    Tries the previous multiplier, then 0, accepting the first candidate for
    which ``T + lam I`` is positive definite and ``||x(lam)|| >= Delta``;
    otherwise computes ``-theta_min`` by root finding on the last-pivot
    function (lifted when the warm start supplies the submatrix eigenvalue).
    """
    return _newton_init(t, gamma0, delta, warm)[0]


def _newton_init(t, gamma0, delta, warm):
    candidates = []
    if warm is not None and warm.prev_lambda is not None:
        candidates.append(warm.prev_lambda)
    candidates.append(0.0)
    for lam in candidates:
        if lam < 0.0:
            continue
        try:
            x, _ = _x_of_lambda(t, gamma0, lam)
        except IndefiniteError:
            continue
        if np.linalg.norm(x) >= delta:
            theta = warm.prev_theta_min if warm is not None else None
            return lam, theta
    if warm is not None and warm.prev_theta_min is not None:
        theta_min = warm.prev_theta_min
    else:
        hint = warm.prev_hat_theta_min if warm is not None else None
        theta_min = smallest_eig(t, hat_theta_min=hint)
    return max(0.0, -theta_min), theta_min


def solve_easy(
    t: TriMatrix,
    gamma0: float,
    delta: float,
    lam0: float,
    theta_min: Optional[float] = None,
) -> SubproblemSolution:
    """Boundary solution by Newton iteration on ``1/||x(lam)|| - 1/Delta``.

    Each step costs one factorization of ``T + lam I`` and one extra
    backsolve for the derivative ``x'(lam) = -(T + lam I)^{-1} x(lam)``.
    Started from an admissible ``lam0`` (positive semidefinite shift with
    ``||x(lam0)|| >= Delta``) the iterates increase monotonically to the
    boundary multiplier.  Terminates when ``| ||x|| - Delta | <= 1e-10 *
    Delta``.

    Raises an internal signal, converted by :func:`solve` into the
    near-hard-case path, when no admissible multiplier reaches the radius in
    floating point -- either no probe above ``max(0, -theta_min)`` attains
    ``||x|| >= Delta`` at all, or adjacent floating-point multipliers jump
    across the radius without hitting the boundary tolerance.
    """
    lam_lb = max(0.0, -theta_min) if theta_min is not None else 0.0
    lam = max(lam0, lam_lb)
    x = None
    factor = None
    # Admissible starting point: positive definite shift with ||x|| >= Delta.
    # When lam sits on the singularity (lam0 == -theta_min), probe a ladder
    # of relative offsets; if even the smallest keeps ||x|| < Delta there is
    # no boundary multiplier representable and the near-hard path takes over.
    try:
        x, factor = _x_of_lambda(t, gamma0, lam)
    except IndefiniteError:
        x = None
    if x is not None and np.linalg.norm(x) < delta:
        if lam > lam_lb:
            # A decreasing ||x(lam)|| crossed Delta below lam: the warm
            # candidate overshot; restart the search from the lower bound.
            lam = lam_lb
            x = None
        else:
            raise _NearHardSignal
    if x is None:
        scale = max(t.scale(), abs(lam_lb), gamma0 / delta)
        eps_rel = 1e-2
        while True:
            lam_try = lam_lb + eps_rel * scale
            try:
                x, factor = _x_of_lambda(t, gamma0, lam_try)
            except IndefiniteError:
                x = None
            if x is not None and np.linalg.norm(x) >= delta:
                lam = lam_try
                break
            if eps_rel < 1e-14:
                raise _NearHardSignal
            eps_rel *= 1e-3
    iters = 0
    nrm = np.linalg.norm(x)
    lam_lo, lam_hi = lam_lb, math.inf  # norm >= Delta below, < Delta above
    while abs(nrm - delta) > _BOUNDARY_RTOL * delta and iters < _NEWTON_MAX_ITER:
        if nrm >= delta:
            lam_lo = max(lam_lo, lam)
        else:
            lam_hi = min(lam_hi, lam)
        if math.isfinite(lam_hi) and lam_hi - lam_lo <= 8.0 * _EPS * max(
            lam_hi, 1e-300
        ):
            # The boundary multiplier falls between adjacent floats: the
            # radius is not attainable in floating point.
            raise _NearHardSignal
        y = solve_ldlt(factor, x)
        s = float(x @ y)  # = <x, (T+lam I)^{-1} x> > 0
        sigma = 1.0 / nrm - 1.0 / delta
        dsigma = s / nrm**3
        lam_new = lam - sigma / dsigma
        if not (lam_lo < lam_new < lam_hi) or lam_new == lam:
            if math.isfinite(lam_hi):
                lam_new = 0.5 * (lam_lo + lam_hi)
            else:
                lam_new = 0.5 * (lam + lam_lb) if lam_new <= lam_lb else lam_new
        try:
            x_new, factor_new = _x_of_lambda(t, gamma0, lam_new)
        except IndefiniteError:
            try:
                lam_new = 0.5 * (lam + lam_lb)
                x_new, factor_new = _x_of_lambda(t, gamma0, lam_new)
            except IndefiniteError:
                # Cannot even evaluate between the iterate and the bound:
                # the boundary multiplier is not representable here.
                raise _NearHardSignal from None
        lam, x, factor = lam_new, x_new, factor_new
        nrm = np.linalg.norm(x)
        iters += 1
    if abs(nrm - delta) > _BOUNDARY_RTOL * delta:
        raise _NearHardSignal
    return SubproblemSolution(
        h=x,
        lam=lam,
        obj=_objective(t, gamma0, x),
        status=BOUNDARY,
        newton_iters=iters,
    )


def solve_blocks(t: TriMatrix, gamma0: float, delta: float) -> SubproblemSolution:
    """Global minimizer over a block-diagonal tridiagonal matrix.

    The gradient touches only the first irreducible block.  Let ``theta_l``
    be the smallest eigenvalue over all blocks, attained first at block
    ``l``.  The first block is solved on its own; if its multiplier already
    dominates ``-theta_l`` the zero-padded solution is optimal, otherwise
    the multiplier is pinned at ``-theta_l`` and an eigenvector of block
    ``l`` scaled to reach the boundary is added.
    """
    if gamma0 <= 0.0 or delta <= 0.0:
        raise ValueError("gamma0 and delta must be positive")
    spans = list(t.blocks())
    blocks = [t.block(a, b) for a, b in spans]
    thetas = [smallest_eig(b) for b in blocks]
    ell = int(np.argmin(thetas))
    theta_l = thetas[ell]
    first = _solve_irreducible(blocks[0], gamma0, delta)
    h = np.zeros(t.n)
    a0, b0 = spans[0]
    if ell == 0 or first.lam >= -theta_l:
        h[a0:b0] = first.h
        status = first.status
        if ell > 0 and status != INTERIOR:
            status = HARD_CASE
        return SubproblemSolution(
            h=h,
            lam=first.lam,
            obj=_objective(t, gamma0, h),
            status=status,
            newton_iters=first.newton_iters,
            theta_min=theta_l,
        )
    # Eigenvector branch: lam* = -theta_l exceeds the first block's own
    # multiplier, so (R1 - theta_l I) is positive definite.
    lam = -theta_l
    x1, _ = _x_of_lambda(blocks[0], gamma0, lam)
    v = inverse_iteration(blocks[ell], theta_l)
    alpha = math.sqrt(max(delta**2 - float(x1 @ x1), 0.0))
    al, bl = spans[ell]
    best = None
    for sign in (+1.0, -1.0):
        cand = np.zeros(t.n)
        cand[a0:b0] = x1
        cand[al:bl] = sign * alpha * v
        obj = _objective(t, gamma0, cand)
        if best is None or obj < best[1]:
            best = (cand, obj)
    h, obj = best
    return SubproblemSolution(
        h=h,
        lam=lam,
        obj=obj,
        status=HARD_CASE,
        newton_iters=first.newton_iters,
        theta_min=theta_l,
    )


def _pseudo_solve_at(t: TriMatrix, gamma0: float, theta_min: float):
    """``x = (T - theta_min I)^+ (-gamma0 e1)`` plus the unit eigenvector.

    Realized as a slightly regularized solve followed by projecting out the
    eigenvector (the regularization otherwise amplifies any tiny gradient
    mass on the eigenspace).
    """
    scale = max(t.scale(), abs(theta_min), gamma0)
    x = None
    eps = 1e-14
    while x is None:
        try:
            x, _ = _x_of_lambda(t, gamma0, -theta_min + eps * scale)
        except IndefiniteError:
            eps *= 10.0
            if eps > 1e-6:
                raise
    v = inverse_iteration(t, theta_min)
    for _ in range(2):
        x = x - float(v @ x) * v
    return x, v


def near_hard(
    t: TriMatrix, gamma0: float, delta: float, theta_min: float
) -> SubproblemSolution:
    """Near-hard-case heuristic: ``lam = -theta_min`` plus an eigenvector.

    The pseudo-solve ``x(-theta_min)`` is realized as a solve with the shift
    regularized by ``1e-14 * ||T||``, followed by projecting out the
    eigenvector at ``theta_min`` (the regularization otherwise amplifies the
    tiny gradient mass sitting on the eigenspace).  The eigenvector is then
    scaled so the solution sits on the boundary, with the sign chosen to
    minimize the objective (ties toward the positive scaling).
    """
    lam = max(0.0, -theta_min)
    x, v = _pseudo_solve_at(t, gamma0, theta_min)
    xx = float(x @ x)
    if xx > delta**2:
        # Even the pseudo-solve overshoots the ball: truncate.
        h = x * (delta / math.sqrt(xx))
        return SubproblemSolution(
            h=h,
            lam=lam,
            obj=_objective(t, gamma0, h),
            status=NEAR_HARD_CASE,
            theta_min=theta_min,
        )
    alpha = math.sqrt(delta**2 - xx)
    best = None
    for sign in (+1.0, -1.0):
        cand = x + sign * alpha * v
        obj = _objective(t, gamma0, cand)
        if best is None or obj < best[1]:
            best = (cand, obj)
    h, obj = best
    return SubproblemSolution(
        h=h, lam=lam, obj=obj, status=NEAR_HARD_CASE, theta_min=theta_min
    )


def convexify(t: TriMatrix, eps: float = 1e-12, sigma: float = 10.0) -> np.ndarray:
    """Nonnegative diagonal ``D`` such that every pivot of ``T + D`` is >= eps.

    Walks the Cholesky pivot recurrence; a pivot falling below ``eps`` at
    index ``j`` is repaired by ``d_j = sigma * |gamma_j^2 / pi_{j-1} -
    delta_j|`` (the coupling term is absent at the start of a block), floored
    so the repaired pivot reaches ``eps``.
    """
    if eps <= 0.0 or sigma <= 0.0:
        raise ValueError("eps and sigma must be positive")
    n = t.n
    d = np.zeros(n)
    pivots = np.zeros(n)
    starts = set(t.block_starts)
    for j in range(n):
        if j in starts:
            pi_hat = t.diag[j]
            coupling = 0.0
        else:
            coupling = t.offdiag[j - 1] ** 2 / pivots[j - 1]
            pi_hat = t.diag[j] - coupling
        if pi_hat >= eps:
            d[j] = 0.0
        else:
            d[j] = max(sigma * abs(coupling - t.diag[j]), eps - pi_hat)
        pivots[j] = pi_hat + d[j]
    return d


def resolve_radius(
    t: TriMatrix,
    gamma0: float,
    delta_new: float,
    warm: Optional[WarmStart] = None,
) -> SubproblemSolution:
    """Re-solve the same matrix with an exchanged radius (hotstart).

    Only the tridiagonal problem is solved again; the caller re-tests its
    own termination criterion afterwards.
    """
    return solve(t, gamma0, delta_new, warm)


def trace_shifted_min(t: TriMatrix, gamma0: float, lam: float) -> np.ndarray:
    """Minimizer of the shifted model: ``(T + lam I)^{-1} (-gamma0 e1)``."""
    x, _ = _x_of_lambda(t, gamma0, lam)
    return x


def trace_band(
    t: TriMatrix, gamma0: float, sigma_lo: float, sigma_hi: float
) -> tuple[float, np.ndarray]:
    """Multiplier with ``sigma_lo <= lam / ||x(lam)|| <= sigma_hi``.

    The ratio is continuous and nondecreasing on the admissible ray, so
    safeguarded Newton/bisection toward the band midpoint terminates as soon
    as the ratio enters the band.  When no representable multiplier reaches
    down into the band (the pole at ``-theta_min`` is too steep, the
    near-hard situation), the shifted model at ``lam = -theta_min`` is
    singular and its minimizers form an affine family along the eigenvector;
    the eigenvector weight is then chosen to hit the band exactly.
    """
    if not (0.0 < sigma_lo <= sigma_hi):
        raise ValueError("need 0 < sigma_lo <= sigma_hi")
    target = 0.5 * (sigma_lo + sigma_hi)
    if t.is_irreducible():
        theta_min = smallest_eig(t)
    else:
        theta_min = min(smallest_eig(t.block(a, b)) for a, b in t.blocks())
    lam_lb = max(0.0, -theta_min)
    scale = max(t.scale(), abs(lam_lb), gamma0, 1e-300)

    def completion():
        lam = lam_lb
        x, v = _pseudo_solve_at(t, gamma0, theta_min)
        desired = lam / target
        alpha = math.sqrt(max(desired**2 - float(x @ x), 0.0))
        plus = x + alpha * v
        minus = x - alpha * v
        return lam, (
            plus if _objective(t, gamma0, plus) <= _objective(t, gamma0, minus)
            else minus
        )

    def ratio_at(lam):
        try:
            x, factor = _x_of_lambda(t, gamma0, lam)
        except IndefiniteError:
            return None
        nrm = np.linalg.norm(x)
        return lam / nrm, x, factor, nrm

    # Descend a ladder of offsets above the pole until the ratio drops below
    # the band (bracketed) or proves unreachable (eigenvector completion).
    below = above = None
    for eps in (1e-2, 1e-5, 1e-8, 1e-11, 1e-14):
        lam = lam_lb + eps * scale
        r = ratio_at(lam)
        if r is None:
            break
        if sigma_lo <= r[0] <= sigma_hi:
            return lam, r[1]
        if r[0] < sigma_lo:
            below = (lam, r)
            break
        above = (lam, r)
    if below is None:
        if above is None or above[1][0] > sigma_hi:
            return completion()
        below = above
        above = None
    # Expand upward if the whole ladder sat below the band.
    lam, (phi, x, factor, nrm) = below
    lo = lam
    hi = above[0] if above is not None else None
    for _ in range(200):
        if sigma_lo <= phi <= sigma_hi:
            return lam, x
        if phi < sigma_lo:
            lo = lam
        else:
            hi = lam
        if hi is not None and hi - lo <= 8.0 * _EPS * max(hi, 1e-300):
            return completion()  # band falls between adjacent floats
        # Newton on lam/||x(lam)|| - target; the derivative uses
        # d||x||/dlam = -<x, (T+lam I)^{-1} x> / ||x||.
        y = solve_ldlt(factor, x)
        s = float(x @ y)
        dphi = 1.0 / nrm + lam * s / nrm**3
        cand = lam - (phi - target) / dphi
        if hi is None:
            lam = cand if cand > lo else 2.0 * max(lam, scale)
        else:
            lam = cand if lo < cand < hi else 0.5 * (lo + hi)
        r = None
        for _ in range(80):
            r = ratio_at(lam)
            if r is not None:
                break
            # numerically singular shift: move the safe bracket up
            lo = max(lo, lam)
            lam = 0.5 * (lo + hi) if hi is not None else 2.0 * max(lam, scale)
        if r is None:
            return completion()
        phi, x, factor, nrm = r
    raise RuntimeError("trace_band failed to enter the band")
