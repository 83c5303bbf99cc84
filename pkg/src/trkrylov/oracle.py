"""Brute-force dense reference solver for trust-region problems.

Used only by tests and acceptance checks: a full eigendecomposition plus
bisection on the secular equation gives an independent route to the global
minimizer, including hard-case instances, and a residual evaluator for the
first/second-order optimality conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

_HARD_G_RTOL = 1e-13  # gradient mass on the minimal eigenspace below this is "zero"


@dataclass
class OracleSolution:
    x: np.ndarray
    lam: float
    obj: float
    case: str  # interior | easy | hard


def _objective(h_mat: np.ndarray, g: np.ndarray, x: np.ndarray) -> float:
    return 0.5 * float(x @ h_mat @ x) + float(g @ x)


def oracle_solve(h_mat: np.ndarray, g: np.ndarray, delta: float) -> OracleSolution:
    """Global minimizer of ``0.5 x'Hx + g'x`` over ``||x|| <= delta``.

    Full eigendecomposition ``H = Q diag(theta) Q'``; interior test first,
    then bisection on ``||x(lam)|| - delta`` over the admissible ray,
    finishing with a few Newton polish steps in eigencoordinates.  The hard
    case is detected when the gradient components on the minimal eigenspace
    vanish (below ``1e-13 * ||g||``) and the regular part stays inside the
    ball; the minimizer then adds a minimal eigenvector scaled to the
    boundary.  Desk scale only (n <= 200 or so).
    """
    h_mat = np.asarray(h_mat, dtype=float)
    g = np.asarray(g, dtype=float)
    n = len(g)
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    theta, q = np.linalg.eigh(h_mat)
    gbar = q.T @ g
    theta_min = theta[0]
    scale = max(1.0, float(np.max(np.abs(theta))), np.linalg.norm(g) / delta)

    if theta_min > 0.0:
        x_newton = -gbar / theta
        if np.linalg.norm(x_newton) <= delta:
            return OracleSolution(
                x=q @ x_newton,
                lam=0.0,
                obj=_objective(h_mat, g, q @ x_newton),
                case="interior",
            )

    lam_lb = max(0.0, -theta_min)
    min_mask = np.abs(theta - theta_min) <= 1e-10 * scale
    g_min_mass = np.linalg.norm(gbar[min_mask])
    hard_detect = g_min_mass <= _HARD_G_RTOL * max(np.linalg.norm(g), 1e-300)

    def norm_x(lam, mask_out=False):
        denom = theta + lam
        xbar = np.zeros(n)
        sel = ~min_mask if mask_out else np.full(n, True)
        xbar[sel] = -gbar[sel] / denom[sel]
        return xbar

    if hard_detect:
        xbar_reg = norm_x(lam_lb, mask_out=True)
        if np.linalg.norm(xbar_reg) <= delta:
            # Minimal-eigenspace correction to reach the boundary.
            alpha = np.sqrt(max(delta**2 - float(xbar_reg @ xbar_reg), 0.0))
            v = q[:, int(np.argmin(theta))]
            nz = np.nonzero(v)[0]
            if len(nz) and v[nz[0]] < 0.0:
                v = -v
            x = q @ xbar_reg + alpha * v
            return OracleSolution(
                x=x, lam=lam_lb, obj=_objective(h_mat, g, x), case="hard"
            )

    # Easy-case boundary: bisection on ||x(lam)|| - delta over (lam_lb, inf).
    lo = lam_lb
    hi = lam_lb + scale
    while np.linalg.norm(norm_x(hi)) >= delta:
        hi = lam_lb + 2.0 * (hi - lam_lb)
        if hi > 1e300:
            raise RuntimeError("oracle bisection failed to bracket")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(norm_x(mid)) >= delta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, scale, abs(mid)):
            break
    lam = 0.5 * (lo + hi)
    # Newton polish on 1/||x|| - 1/delta in eigencoordinates.
    for _ in range(5):
        denom = theta + lam
        if np.any(denom <= 0.0):
            break
        xbar = -gbar / denom
        nrm = np.linalg.norm(xbar)
        if nrm == 0.0:
            break
        dn = -float(np.sum(xbar**2 / denom)) / nrm
        sigma = 1.0 / nrm - 1.0 / delta
        dsig = -dn / nrm**2
        if dsig == 0.0:
            break
        lam_new = lam - sigma / dsig
        if lam_new <= lam_lb:
            break
        lam = lam_new
    xbar = -gbar / (theta + lam)
    if abs(np.linalg.norm(xbar) - delta) > 1e-8 * delta:
        # The root sits within ulps of the pole at -theta_min: no double
        # precision multiplier represents the boundary point.  Complete the
        # well-conditioned components with minimal-eigenspace mass instead.
        crit = (theta + lam) <= 1e-8 * (abs(theta_min) + lam + scale * 1e-12)
        if np.any(crit):
            lam = lam_lb
            xreg = np.zeros(n)
            xreg[~crit] = -gbar[~crit] / (theta[~crit] + lam)
            reg_norm_sq = float(xreg @ xreg)
            if reg_norm_sq <= delta**2:
                alpha = np.sqrt(delta**2 - reg_norm_sq)
                jmin = int(np.argmin(theta))
                # Descent-aligned sign on the dominant critical component.
                sign = 1.0 if gbar[jmin] <= 0.0 else -1.0
                xreg[jmin] = sign * alpha
                x = q @ xreg
                return OracleSolution(
                    x=x, lam=lam, obj=_objective(h_mat, g, x), case="easy"
                )
    x = q @ xbar
    return OracleSolution(x=x, lam=lam, obj=_objective(h_mat, g, x), case="easy")


def kkt_residual(h_mat, m_mat, g, delta, x, lam):
    """Residuals of the optimality conditions at ``(x, lam)``.

    Returns ``(r_stat, r_feas, r_comp, min_eig_shift)`` where ``r_stat`` is
    the dual-norm stationarity residual ``||(H + lam M) x + g||_{M^{-1}}``,
    ``r_feas`` the feasibility violation ``max(0, ||x||_M - delta)``,
    ``r_comp`` the complementarity defect ``|lam * (||x||_M - delta)|`` and
    ``min_eig_shift`` the smallest generalized eigenvalue of
    ``(H + lam M, M)``, i.e. of the M-whitened shifted operator.
    """
    h_mat = np.asarray(h_mat, dtype=float)
    g = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(g)
    if m_mat is None:
        m_mat = np.eye(n)
    else:
        m_mat = np.asarray(m_mat, dtype=float)
    try:
        cho = scipy.linalg.cho_factor(m_mat)
    except np.linalg.LinAlgError as exc:
        raise ValueError("M must be positive definite") from exc
    shifted = h_mat + lam * m_mat
    resid = shifted @ x + g
    r_stat = float(np.sqrt(resid @ scipy.linalg.cho_solve(cho, resid)))
    xm = float(np.sqrt(x @ m_mat @ x))
    r_feas = max(0.0, xm - delta)
    r_comp = abs(lam * (xm - delta))
    min_eig_shift = float(scipy.linalg.eigh(shifted, m_mat, eigvals_only=True)[0])
    return r_stat, r_feas, r_comp, min_eig_shift
