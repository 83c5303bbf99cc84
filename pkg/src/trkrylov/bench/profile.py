"""Extended performance profiles over benchmark records.

For solver ``s`` and problem ``p`` with cost ``t[s,p]`` the performance
ratio is ``r[s,p] = t[s,p] / min over the OTHER solvers' costs`` (so ratios
may drop below 1), and the profile value ``rho_s(tau)`` is the fraction of
problems with ratio at most ``tau``.  Failed runs carry infinite cost.
"""

from __future__ import annotations

import math
from typing import Iterable

from .outer import BenchRecord

_METRICS = {
    "hv": lambda r: float(r.hv_count),
    "time": lambda r: float(r.wall_ms),
}


def performance_profile(records: Iterable[BenchRecord], metric: str = "hv"):
    """Profile table ``[(tau, solver, rho)]`` from a set of run records.

    Requires at least two solvers; problems missing for a solver count as
    failures.  The returned rows cover every distinct finite ratio (plus
    ``tau = 1`` and ``tau = inf``), each nondecreasing in ``tau``;
    ``rho(inf)`` is the fraction of problems solved at all.
    """
    records = list(records)
    if not records:
        raise ValueError("empty record set")
    if metric not in _METRICS:
        raise ValueError(f"metric must be one of {sorted(_METRICS)}")
    cost_of = _METRICS[metric]
    solvers = sorted({r.solver for r in records})
    problems = sorted({r.problem for r in records})
    if len(solvers) < 2:
        raise ValueError("need at least two solvers to compare")
    cost = {(r.problem, r.solver): _cost(r, cost_of) for r in records}

    ratios = {}
    for s in solvers:
        for p in problems:
            t = cost.get((p, s), math.inf)
            best_other = min(
                cost.get((p, o), math.inf) for o in solvers if o != s
            )
            if math.isinf(t):
                r = math.inf
            elif math.isinf(best_other) or best_other == 0.0:
                r = 0.0 if t == 0.0 or math.isinf(best_other) else math.inf
            else:
                r = t / best_other
            ratios[(p, s)] = r

    taus = sorted(
        {r for r in ratios.values() if math.isfinite(r)} | {1.0}
    ) + [math.inf]
    rows = []
    for s in solvers:
        for tau in taus:
            frac = sum(
                1
                for p in problems
                if math.isfinite(ratios[(p, s)]) and ratios[(p, s)] <= tau
            ) / len(problems)
            rows.append((tau, s, frac))
    return rows


def _cost(record: BenchRecord, cost_of) -> float:
    if record.outcome != "converged":
        return math.inf
    value = cost_of(record)
    return value if math.isfinite(value) else math.inf


def profile_value(rows, solver: str, tau: float) -> float:
    """Largest recorded rho for ``solver`` at thresholds <= tau."""
    best = 0.0
    for t, s, rho in rows:
        if s == solver and t <= tau:
            best = max(best, rho)
    return best
