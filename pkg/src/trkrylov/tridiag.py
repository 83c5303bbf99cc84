"""Factorizations, pivot recurrences and eigenvalue tools for symmetric
tridiagonal matrices.

Everything in this module operates on :class:`TriMatrix`, a growing symmetric
tridiagonal matrix that may consist of several irreducible blocks (zero
off-diagonal couplings at recorded block boundaries).  The central primitive
is the last-pivot function ``d(theta)``: the final pivot of the LDL^T
factorization of ``T - theta*I``, defined as ``-inf`` whenever an interior
pivot leaves ``(0, inf)``.  Its unique root on the admissible side of the
spectrum is the smallest eigenvalue of an irreducible block, which is what the
safeguarded root finder :func:`smallest_eig` computes.

All functions are pure; no shared mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg


class IndefiniteError(Exception):
    """Shifted matrix is not positive definite.

    Attributes
    ----------
    index : int
        Index of the first nonpositive pivot.
    """

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"indefinite at index {index}")


class NoConvergenceError(Exception):
    """An iterative routine exhausted its iteration budget."""


@dataclass
class TriMatrix:
    """Symmetric tridiagonal matrix with irreducible-block bookkeeping.

    Parameters
    ----------
    diag : array_like
        Diagonal entries ``delta_0 .. delta_i``.
    offdiag : array_like
        Off-diagonal entries ``gamma_1 .. gamma_i`` (couples ``j-1`` and
        ``j``).  Entries at block boundaries must be zero.
    block_starts : sequence of int, optional
        Sorted indices where irreducible blocks begin.  Always contains 0.
        Index ``j > 0`` is a boundary iff ``offdiag[j-1]`` couples nothing
        (the underlying iteration was restarted there).
    """

    diag: np.ndarray
    offdiag: np.ndarray
    block_starts: list = field(default_factory=lambda: [0])

    def __post_init__(self):
        self.diag = np.atleast_1d(np.asarray(self.diag, dtype=float))
        self.offdiag = np.asarray(self.offdiag, dtype=float).reshape(-1)
        if len(self.diag) == 0:
            raise ValueError("empty tridiagonal matrix")
        if len(self.offdiag) != len(self.diag) - 1:
            raise ValueError("offdiag must have length len(diag) - 1")
        self.block_starts = sorted(set(self.block_starts) | {0})
        for j in self.block_starts[1:]:
            if self.offdiag[j - 1] != 0.0:
                raise ValueError(f"nonzero coupling at block boundary {j}")
        boundary = set(self.block_starts)
        for j in range(1, len(self.diag)):
            if j not in boundary and self.offdiag[j - 1] == 0.0:
                raise ValueError(
                    f"zero off-diagonal at {j} inside a block; "
                    "record it as a block boundary"
                )

    @property
    def n(self) -> int:
        return len(self.diag)

    def scale(self) -> float:
        """Cheap upper estimate of ``||T||_2`` (max Gershgorin row sum)."""
        lo, hi = gershgorin(self)
        return max(abs(lo), abs(hi))

    def blocks(self):
        """Yield ``(start, stop)`` half-open ranges of the irreducible blocks."""
        starts = list(self.block_starts) + [self.n]
        for a, b in zip(starts[:-1], starts[1:]):
            yield a, b

    def block(self, start: int, stop: int) -> "TriMatrix":
        """Extract the irreducible block covering ``[start, stop)``."""
        return TriMatrix(
            self.diag[start:stop].copy(), self.offdiag[start : stop - 1].copy()
        )

    def is_irreducible(self) -> bool:
        return len(self.block_starts) == 1

    def to_dense(self) -> np.ndarray:
        t = np.diag(self.diag)
        idx = np.arange(self.n - 1)
        t[idx, idx + 1] = self.offdiag
        t[idx + 1, idx] = self.offdiag
        return t

    def to_banded_lower(self) -> np.ndarray:
        """Lower-banded storage (2 x n) as used by scipy banded solvers."""
        ab = np.zeros((2, self.n))
        ab[0] = self.diag
        ab[1, : self.n - 1] = self.offdiag
        return ab


@dataclass
class LdlFactor:
    """LDL^T factorization data of a shifted tridiagonal matrix.

    ``pivots`` holds the diagonal of D, ``multipliers`` the subdiagonal of the
    unit lower bidiagonal L.  ``ok_prefix`` is the index of the first
    nonpositive interior pivot, or ``None`` when all interior pivots are
    positive (the last pivot may be any real).
    """

    pivots: np.ndarray
    multipliers: np.ndarray
    shift: float
    ok_prefix: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.ok_prefix is None

    def is_positive_definite(self) -> bool:
        return self.ok and self.pivots[-1] > 0.0


def ldlt_shifted(
    t: TriMatrix, shift: float, *, raise_on_indefinite: bool = True
) -> LdlFactor:
    """Factor ``T + shift*I = L D L^T``.

    The pivot recurrence is ``d_0 = delta_0 + shift`` and
    ``d_j = (delta_j + shift) - gamma_j**2 / d_{j-1}``.  The sign convention
    is fixed library-wide: positive ``shift`` moves the spectrum up, i.e. the
    factorization target is ``T + lambda*I`` for ``lambda = shift``.

    Raises
    ------
    IndefiniteError
        If an interior pivot is ``<= 0`` and ``raise_on_indefinite`` is set.
        The factor with ``ok_prefix`` recorded is returned otherwise; its
        pivots past the failure index are not meaningful.
    """
    n = t.n
    pivots = np.zeros(n)
    mult = np.zeros(max(n - 1, 0))
    pivots[0] = t.diag[0] + shift
    bad = None
    for j in range(1, n):
        prev = pivots[j - 1]
        if prev <= 0.0:
            bad = j - 1
            break
        gamma = t.offdiag[j - 1]
        mult[j - 1] = gamma / prev
        pivots[j] = (t.diag[j] + shift) - gamma * mult[j - 1]
    if bad is not None and raise_on_indefinite:
        raise IndefiniteError(bad)
    return LdlFactor(pivots=pivots, multipliers=mult, shift=shift, ok_prefix=bad)


def solve_ldlt(factor: LdlFactor, rhs: np.ndarray) -> np.ndarray:
    """Forward/back substitution through an LDL^T factor (all pivots > 0)."""
    if not factor.is_positive_definite():
        raise IndefiniteError(
            factor.ok_prefix if factor.ok_prefix is not None else len(factor.pivots) - 1
        )
    n = len(factor.pivots)
    w = np.array(rhs, dtype=float)
    for j in range(1, n):
        w[j] -= factor.multipliers[j - 1] * w[j - 1]
    w /= factor.pivots
    for j in range(n - 2, -1, -1):
        w[j] -= factor.multipliers[j] * w[j + 1]
    return w


def solve_shifted(t: TriMatrix, lam: float, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(T + lam*I) w = rhs`` for positive definite ``T + lam*I``.

    One refinement step keeps the residual near machine level also for
    badly conditioned shifts.
    """
    factor = ldlt_shifted(t, lam)
    rhs = np.asarray(rhs, dtype=float)
    w = solve_ldlt(factor, rhs)
    resid = (t.diag + lam) * w
    if t.n > 1:
        resid[:-1] += t.offdiag * w[1:]
        resid[1:] += t.offdiag * w[:-1]
    return w - solve_ldlt(factor, resid - rhs)


class LastPivot(NamedTuple):
    """Tagged value of the last-pivot function and its theta-derivatives.

    ``finite`` is False when some interior pivot of ``T - theta*I`` leaves
    ``(0, inf)``; ``d`` and the derivatives are then None (never a float
    sentinel, to keep NaN/inf out of downstream arithmetic).
    """

    finite: bool
    d: Optional[float]
    d1: Optional[float] = None
    d2: Optional[float] = None


def last_pivot(t: TriMatrix, theta: float, order: int = 0) -> LastPivot:
    """Parlett-Reid last-pivot function ``d(theta)`` with derivatives.

    ``d(theta)`` is the final pivot of the LDL^T factorization of
    ``T - theta*I`` provided all earlier pivots are strictly positive, and
    is tagged non-finite otherwise.  Derivatives (``order`` 1 or 2) are
    obtained by differentiating the pivot recurrence
    ``d_j = (delta_j - theta) - gamma_j**2 / d_{j-1}`` in theta.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    d = t.diag[0] - theta
    d1 = -1.0
    d2 = 0.0
    for j in range(1, t.n):
        if d <= 0.0:
            return LastPivot(False, None)
        g2 = t.offdiag[j - 1] ** 2
        dn = (t.diag[j] - theta) - g2 / d
        if order >= 1:
            d1n = -1.0 + g2 * d1 / d**2
            if order == 2:
                d2 = g2 * (d2 / d**2 - 2.0 * d1**2 / d**3)
            d1 = d1n
        d = dn
    return LastPivot(
        True,
        d,
        d1 if order >= 1 else None,
        d2 if order == 2 else None,
    )


def gershgorin(t: TriMatrix) -> tuple[float, float]:
    """Gershgorin bounds ``(lo, hi)`` containing every eigenvalue of ``T``."""
    r = np.zeros(t.n)
    if t.n > 1:
        a = np.abs(t.offdiag)
        r[:-1] += a
        r[1:] += a
    return float(np.min(t.diag - r)), float(np.max(t.diag + r))


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of ``a x^2 + b x + c``, numerically careful, may be empty."""
    if a == 0.0:
        return [] if b == 0.0 else [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b if b != 0.0 else 1.0))
    roots = []
    if q != 0.0:
        roots.append(c / q)
    roots.append(q / a)
    return roots


def smallest_eig(
    t: TriMatrix,
    hat_theta_min: Optional[float] = None,
    max_iter: int = 200,
) -> float:
    """Smallest eigenvalue of an irreducible tridiagonal matrix.

    Runs safeguarded bracketing on the last-pivot function ``d(theta)`` over
    the Gershgorin interval: when ``d(theta) < 0`` (or non-finite) the
    interval contracts to ``[lo, theta]``, when ``d(theta) >= 0`` to
    ``[theta, hi]``.  Newton and quadratic-model steps accelerate bisection
    but are accepted only when they land strictly inside the bracket.

    When ``hat_theta_min`` (the smallest eigenvalue of the leading principal
    submatrix, available from the previous iteration of a growing process) is
    supplied, root-finding switches to the lifted function
    ``dhat(theta) = (theta - hat_theta_min) * d(theta)``, which is smooth
    through the first-order pole of ``d`` at ``hat_theta_min``.  Model choice
    follows the bracket width: the asymptote-pinned quadratic
    ``theta**2 + a*theta + b`` while the bracket is wide
    (``>= 0.1 * max(1, |theta|)``), the local Taylor quadratic
    ``a*theta**2 + b*theta + c`` once it is narrow.

    Raises
    ------
    NoConvergenceError
        After ``max_iter`` bracketing steps (cannot happen for finite input
        since bisection always halves the bracket; treated as an internal
        failure).
    """
    if not t.is_irreducible():
        raise ValueError("smallest_eig requires a single irreducible block")
    if t.n == 1:
        return float(t.diag[0])
    lo, hi = gershgorin(t)
    if lo == hi:
        return lo
    lifted = hat_theta_min is not None

    def evaluate(theta: float):
        # Oriented value f with f > 0 left of theta_min, f < 0 (or
        # non-finite d) right of it, plus derivatives when finite.
        lp = last_pivot(t, theta, order=2)
        if not lp.finite:
            return None
        if not lifted:
            return lp.d, lp.d1, lp.d2
        # f = -dhat = (hat - theta) * d grows like +theta**2 to the left.
        w = hat_theta_min - theta
        f = w * lp.d
        f1 = w * lp.d1 - lp.d
        f2 = w * lp.d2 - 2.0 * lp.d1
        return f, f1, f2

    theta = lo
    width0 = hi - lo
    for _ in range(max_iter):
        width = hi - lo
        if width <= 1e-14 * max(1.0, abs(theta)) or width <= 1e-16 * width0:
            return 0.5 * (lo + hi)
        val = evaluate(theta)
        if val is not None and val[0] == 0.0:
            return theta
        if val is None or val[0] < 0.0:
            hi = theta
        else:
            lo = theta
        # Candidate step from a model fitted at the last finite evaluation.
        cand = None
        if val is not None:
            f, f1, f2 = val
            if lifted:
                wide = (hi - lo) >= 0.1 * max(1.0, abs(theta))
                if wide:
                    # theta**2 + a*theta + b matching value and slope.
                    a = f1 - 2.0 * theta
                    b = f - theta * theta - a * theta
                    roots = _quadratic_roots(1.0, a, b)
                else:
                    a = 0.5 * f2
                    b = f1 - f2 * theta
                    c = f - f1 * theta + 0.5 * f2 * theta * theta
                    roots = _quadratic_roots(a, b, c)
                inside = [r for r in roots if lo < r < hi]
                if inside:
                    cand = min(inside)
            elif f1 != 0.0:
                newton = theta - f / f1
                if lo < newton < hi:
                    cand = newton
        mid = 0.5 * (lo + hi)
        if cand is None:
            theta = mid
        else:
            # Guarantee geometric contraction: fall back to bisection when
            # the model step hugs a bracket end.
            margin = 0.01 * (hi - lo)
            theta = cand if (lo + margin <= cand <= hi - margin) else mid
    raise NoConvergenceError("smallest_eig: no convergence (internal failure)")


def inverse_iteration(
    t: TriMatrix, theta: float, max_iter: int = 50
) -> np.ndarray:
    """Unit eigenvector of an irreducible ``T`` for the eigenvalue near theta.

    Standard shifted inverse iteration with a banded LU solve; requires theta
    within ~1e-6 * ||T|| of a (simple) eigenvalue.  The sign is fixed so the
    first nonzero component is positive.  Residual target is
    ``||T v - theta v|| <= 1e-8 * ||T||``.
    """
    if not t.is_irreducible():
        raise ValueError("inverse_iteration requires an irreducible block")
    n = t.n
    scale = max(t.scale(), abs(theta), 1e-300)
    dense_mul = None  # filled lazily for the residual check
    if n == 1:
        v = np.ones(1)
    else:
        v = np.full(n, 1.0 / math.sqrt(n))
    shift = theta
    for k in range(max_iter):
        if n == 1:
            break
        ab = np.zeros((3, n))
        ab[0, 1:] = t.offdiag
        ab[1] = t.diag - shift
        ab[2, :-1] = t.offdiag
        try:
            with np.errstate(all="ignore"):
                w = scipy.linalg.solve_banded((1, 1), ab, v)
        except (np.linalg.LinAlgError, ValueError):
            w = None
        if w is None or not np.all(np.isfinite(w)):
            # Exactly singular shift: nudge off the eigenvalue and retry.
            shift = theta + (k + 1) * 1e-14 * scale
            continue
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            shift = theta + (k + 1) * 1e-14 * scale
            continue
        v = w / nrm
        if dense_mul is None:
            dense_mul = t.to_dense()
        if np.linalg.norm(dense_mul @ v - theta * v) <= 1e-8 * scale:
            break
    else:
        raise NoConvergenceError("inverse_iteration did not converge")
    nz = np.nonzero(v)[0]
    if len(nz) and v[nz[0]] < 0.0:
        v = -v
    return v
