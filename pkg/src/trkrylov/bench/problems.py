"""Synthetic nonlinear programs for the benchmark harness.

A self-contained suite at desk scale: classic Rosenbrock variants, seeded
random quadratics (convex and indefinite), a family constructed to hit the
exact hard case, an ill-conditioned family with tiny positive curvature, and
a discretized distributed-control problem whose trust region lives in the
mass-matrix norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg


@dataclass
class NlpProblem:
    """One benchmark problem: objective, derivatives and a start point.

    ``m`` optionally carries a metric matrix defining the trust-region norm
    (and preconditioner); ``delta0`` optionally overrides the outer loop's
    default initial radius.  The constructor checks the gradient against a
    directional finite difference at ``x0``.
    """

    name: str
    n: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    m: Optional[np.ndarray] = None
    minv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    delta0: Optional[float] = None
    f_opt: Optional[float] = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        rng = np.random.default_rng(abs(hash(self.name)) % 2**32)
        d = rng.standard_normal(self.n)
        d /= np.linalg.norm(d)
        eps = 1e-6 * max(1.0, np.linalg.norm(self.x0))
        fd = (self.f(self.x0 + eps * d) - self.f(self.x0 - eps * d)) / (2 * eps)
        gd = float(self.grad(self.x0) @ d)
        denom = max(abs(fd), abs(gd), 1.0)
        if abs(fd - gd) > 1e-5 * denom:
            raise ValueError(
                f"{self.name}: gradient check failed ({gd} vs fd {fd})"
            )


def rosenbrock2d() -> NlpProblem:
    def f(x):
        return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2

    def grad(x):
        return np.array(
            [
                -2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2),
                200 * (x[1] - x[0] ** 2),
            ]
        )

    def hess(x):
        return np.array(
            [
                [2 - 400 * (x[1] - 3 * x[0] ** 2), -400 * x[0]],
                [-400 * x[0], 200.0],
            ]
        )

    return NlpProblem(
        "rosenbrock2d", 2, f, grad, hess, np.array([-1.2, 1.0]), f_opt=0.0
    )


def rosenbrock_ext(n: int = 8) -> NlpProblem:
    def f(x):
        return float(
            np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2)
        )

    def grad(x):
        g = np.zeros_like(x)
        g[:-1] = -400 * x[:-1] * (x[1:] - x[:-1] ** 2) - 2 * (1 - x[:-1])
        g[1:] += 200 * (x[1:] - x[:-1] ** 2)
        return g

    def hess(x):
        h = np.zeros((len(x), len(x)))
        for i in range(len(x) - 1):
            h[i, i] += 1200 * x[i] ** 2 - 400 * x[i + 1] + 2
            h[i + 1, i + 1] += 200.0
            h[i, i + 1] += -400 * x[i]
            h[i + 1, i] += -400 * x[i]
        return h

    x0 = np.full(n, -1.2)
    x0[1::2] = 1.0
    return NlpProblem(f"rosenbrock_ext{n}", n, f, grad, hess, x0, f_opt=0.0)


def _quadratic(name, a, b):
    n = len(b)

    def f(x):
        return 0.5 * float(x @ a @ x) + float(b @ x)

    return NlpProblem(
        name, n, f, lambda x: a @ x + b, lambda x: a, np.zeros(n)
    )


def quad_convex(n: int = 20, seed: int = 11) -> NlpProblem:
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((n, n))
    a = q @ q.T / n + 0.5 * np.eye(n)
    b = rng.standard_normal(n)
    return _quadratic(f"quad_convex{n}", a, b)


def quad_indefinite(n: int = 16, seed: int = 12) -> NlpProblem:
    """Indefinite quadratic plus a quartic confinement (bounded below)."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.linspace(-1.5, 2.0, n)
    a = (q * eigs) @ q.T
    a = 0.5 * (a + a.T)
    b = rng.standard_normal(n)

    def f(x):
        return 0.5 * float(x @ a @ x) + float(b @ x) + 0.01 * float(x @ x) ** 2

    def grad(x):
        return a @ x + b + 0.04 * float(x @ x) * x

    def hess(x):
        return a + 0.04 * (float(x @ x) * np.eye(n) + 2.0 * np.outer(x, x))

    return NlpProblem(f"quad_indef{n}", n, f, grad, hess, np.zeros(n))


def hard_case_quartic(n: int = 12, seed: int = 13) -> NlpProblem:
    """Gradient exactly orthogonal to the minimal eigenspace at the start.

    Diagonal quadratic part with a unique smallest (negative) eigenvalue on
    the first coordinate and a zero linear term there, plus a quartic
    confinement that preserves the orthogonality along the run (iterates in
    the gradient's Krylov space keep a zero first coordinate until the hard
    case is resolved by a subspace restart).
    """
    rng = np.random.default_rng(seed)
    eigs = np.concatenate(([-2.0], np.sort(rng.uniform(-1.0, 3.0, n - 1))))
    a = np.diag(eigs)
    b = rng.standard_normal(n)
    b[0] = 0.0

    def f(x):
        return 0.5 * float(x @ a @ x) + float(b @ x) + 0.01 * float(x @ x) ** 2

    def grad(x):
        return a @ x + b + 0.04 * float(x @ x) * x

    def hess(x):
        return a + 0.04 * (float(x @ x) * np.eye(n) + 2.0 * np.outer(x, x))

    return NlpProblem(f"hard_case{n}", n, f, grad, hess, np.zeros(n))


def illcond_quadratic(n: int = 40, seed: int = 14) -> NlpProblem:
    """Tiny positive eigenvalues: convex but numerically treacherous."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.logspace(-10, 0, n)
    a = (q * eigs) @ q.T
    a = 0.5 * (a + a.T)
    b = q @ (eigs * rng.uniform(0.5, 1.0, n))  # keep the minimizer moderate
    return _quadratic(f"illcond{n}", a, b)


def cosine_mix(n: int = 10) -> NlpProblem:
    def f(x):
        return float(np.sum(np.cos(x)) + 0.05 * x @ x)

    def grad(x):
        return -np.sin(x) + 0.1 * x

    def hess(x):
        return np.diag(-np.cos(x) + 0.1)

    return NlpProblem(
        f"cosine_mix{n}", n, f, grad, hess, np.full(n, 0.7)
    )


def control_problem(mesh_n: int, beta: float, dim: int = 1) -> NlpProblem:
    """Distributed-control tracking problem on the unit interval (or square).

    Finite differences discretize ``-laplace(y) + y = u`` with natural
    boundary conditions; eliminating the state through ``y(u) = A^{-1} M u``
    (``A = K + M``) leaves an unconstrained quadratic in the control.  The
    trust region measures the combined state/control mass-matrix norm, so
    the metric is ``Mt = B' M B + M`` with ``B = A^{-1} M``, which keeps the
    geometry mesh-independent.  Desk scale: all operators dense.
    """
    if mesh_n < 8:
        raise ValueError("mesh_n must be at least 8")
    if not 0.0 < beta:
        raise ValueError("beta must be positive")
    if dim == 1:
        h = 1.0 / mesh_n
        pts = np.linspace(0.0, 1.0, mesh_n + 1)
        k1 = (
            np.diag(np.full(mesh_n + 1, 2.0))
            - np.diag(np.ones(mesh_n), 1)
            - np.diag(np.ones(mesh_n), -1)
        ) / h
        k1[0, 0] = k1[-1, -1] = 1.0 / h
        m_diag = np.full(mesh_n + 1, h)
        m_diag[0] = m_diag[-1] = h / 2.0
        k = k1
        m = np.diag(m_diag)
        y_d = np.sin(2 * np.pi * pts)
        u_d = np.cos(2 * np.pi * pts)
    elif dim == 2:
        if mesh_n > 48:
            raise ValueError("2-d meshes above 48 are beyond desk scale")
        h = 1.0 / mesh_n
        pts = np.linspace(0.0, 1.0, mesh_n + 1)
        k1 = (
            np.diag(np.full(mesh_n + 1, 2.0))
            - np.diag(np.ones(mesh_n), 1)
            - np.diag(np.ones(mesh_n), -1)
        ) / h
        k1[0, 0] = k1[-1, -1] = 1.0 / h
        md = np.full(mesh_n + 1, h)
        md[0] = md[-1] = h / 2.0
        m1 = np.diag(md)
        k = np.kron(k1, m1) + np.kron(m1, k1)
        m = np.kron(m1, m1)
        xx, yy = np.meshgrid(pts, pts, indexing="ij")
        y_d = (np.sin(2 * np.pi * xx) * np.sin(2 * np.pi * yy)).ravel()
        u_d = (np.cos(2 * np.pi * xx) * np.cos(2 * np.pi * yy)).ravel()
    else:
        raise ValueError("dim must be 1 or 2")

    a = k + m
    b_op = scipy.linalg.solve(a, m, assume_a="pos")  # B = A^{-1} M
    hess_mat = b_op.T @ m @ b_op + beta * m
    metric = b_op.T @ m @ b_op + m
    metric = 0.5 * (metric + metric.T)
    hess_mat = 0.5 * (hess_mat + hess_mat.T)
    lin = -(b_op.T @ m @ y_d) - beta * (m @ u_d)
    const = 0.5 * float(y_d @ m @ y_d) + 0.5 * beta * float(u_d @ m @ u_d)
    cho = scipy.linalg.cho_factor(metric)

    def f(u):
        return 0.5 * float(u @ hess_mat @ u) + float(lin @ u) + const

    n = len(y_d)
    return NlpProblem(
        name=f"control{dim}d_m{mesh_n}_b{beta:g}",
        n=n,
        f=f,
        grad=lambda u: hess_mat @ u + lin,
        hess=lambda u: hess_mat,
        x0=np.zeros(n),
        m=metric,
        minv=lambda x: scipy.linalg.cho_solve(cho, x),
        delta0=0.5,
    )


def suite() -> list:
    """The registered benchmark problems (every one gradient-checked)."""
    return [
        rosenbrock2d(),
        rosenbrock_ext(8),
        quad_convex(20),
        quad_indefinite(16),
        hard_case_quartic(12),
        illcond_quadratic(40),
        cosine_mix(10),
        control_problem(64, 1e-3),
        control_problem(64, 1e-6),
    ]
