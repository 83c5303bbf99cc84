"""Vector-free Krylov solver for trust-region subproblems.

The package solves ``min 0.5 <x, Hx> + <g, x>  s.t.  ||x||_M <= Delta`` by
restricting the problem to nested Krylov subspaces, where each restriction
reduces to a small tridiagonal trust-region problem that is solved exactly,
including the hard case over invariant subspaces.

Layers, bottom up:

- :mod:`trkrylov.tridiag` -- tridiagonal factorizations, last-pivot
  recurrences and eigenvalue bracketing.
- :mod:`trkrylov.subproblem` -- exact solution of the tridiagonal
  trust-region problem (interior / boundary / hard case / convexification).
- :mod:`trkrylov.driver` -- the vector-free reverse-communication state
  machine; the caller owns all vectors and exchanges only scalars.
- :mod:`trkrylov.dense` -- convenience loop over in-memory operators plus a
  truncated-CG baseline.
- :mod:`trkrylov.oracle` -- brute-force dense reference solver for tests.
- :mod:`trkrylov.bench` -- benchmark problems, outer loop and CLI.
"""

from .dense import DenseProblem, SolveReport, mgs_restart, solve_gltr, solve_st
from .driver import Action, ActionKind, KrylovState, Outcome, TerminationConfig
from .oracle import OracleSolution, kkt_residual, oracle_solve
from .subproblem import SubproblemSolution, WarmStart
from .tridiag import IndefiniteError, LdlFactor, NoConvergenceError, TriMatrix

__all__ = [
    "Action",
    "ActionKind",
    "DenseProblem",
    "IndefiniteError",
    "KrylovState",
    "LdlFactor",
    "NoConvergenceError",
    "OracleSolution",
    "Outcome",
    "SolveReport",
    "SubproblemSolution",
    "TerminationConfig",
    "TriMatrix",
    "WarmStart",
    "kkt_residual",
    "mgs_restart",
    "oracle_solve",
    "solve_gltr",
    "solve_st",
]

__version__ = "0.1.0"
