"""JSON-lines bridge exposing the reverse-communication wire contract.

Foreign bindings talk to the solver core through this process: one JSON
request per line on stdin, one JSON response per line on stdout.  Only
scalars and action descriptors cross the boundary in the step-wise protocol;
the convenience ``solve_dense`` op accepts full operator data.

Requests
--------
``{"op": "init", "delta": f, "config": {...}}``      -> ``{"action": ...}``
``{"op": "step", "scalars": [...]}``                 -> ``{"action": ...}``
``{"op": "reenter", "delta": f}``                    -> ``{"action": ...}``
``{"op": "new_krylov"}``                             -> ``{"action": ...}``
``{"op": "state"}``          -> tridiagonal data and coefficient histories
``{"op": "solve_dense", "h": [[...]], "g": [...], "delta": f,
   "m": [[...]]?, "config": {...}?, "seed": int?}``  -> solution report
``{"op": "gen_instance", "seed": int}``  -> a seeded random dense instance
``{"op": "exit"}``                                   -> ``{"ok": true}``

Action descriptors carry the stable integer tag, the tag name, the names of
the scalars the next ``step`` must return, and whatever coefficient payload
the action has.  Protocol violations come back as
``{"error": msg, "expects": [...]}`` without killing the session.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from . import driver
from .dense import DenseProblem, solve_gltr
from .driver import Action, ProtocolError, TerminationConfig

_PAYLOAD_FIELDS = ("alpha", "beta", "a", "b", "p_scale", "store", "outcome",
                   "lam", "obj", "status", "iterations")


def action_to_dict(action: Action) -> dict:
    out = {
        "kind": int(action.kind),
        "name": action.kind.name,
        "expects": list(action.expects),
    }
    for field in _PAYLOAD_FIELDS:
        value = getattr(action, field)
        if value is not None:
            out[field] = value
    if action.h is not None:
        out["h"] = [float(v) for v in action.h]
    return out


def _config_from(data) -> TerminationConfig:
    cfg = TerminationConfig()
    for key, value in (data or {}).items():
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg


class BridgeSession:
    """One stdin/stdout session holding at most one live solver state."""

    def __init__(self):
        self.state = None

    def handle(self, req: dict) -> dict:
        op = req.get("op")
        handler = getattr(self, f"op_{op}", None)
        if handler is None:
            return {"error": f"unknown op {op!r}"}
        try:
            return handler(req)
        except ProtocolError as exc:
            out = {"error": str(exc)}
            if self.state is not None and self.state.pending is not None:
                out["expects"] = list(self.state.pending.expects)
            return out
        except (ValueError, ZeroDivisionError) as exc:
            return {"error": str(exc)}

    def op_init(self, req):
        cfg = _config_from(req.get("config"))
        self.state, action = driver.init(cfg, float(req["delta"]))
        return {"action": action_to_dict(action)}

    def op_step(self, req):
        if self.state is None:
            raise ProtocolError("no live state; send init first")
        action = driver.step(self.state, req.get("scalars", ()))
        return {"action": action_to_dict(action)}

    def op_reenter(self, req):
        if self.state is None:
            raise ProtocolError("no live state; send init first")
        action = driver.reenter_radius(self.state, float(req["delta"]))
        return {"action": action_to_dict(action)}

    def op_new_krylov(self, req):
        if self.state is None:
            raise ProtocolError("no live state; send init first")
        action = driver.request_new_krylov(self.state)
        return {"action": action_to_dict(action)}

    def op_state(self, req):
        if self.state is None:
            raise ProtocolError("no live state; send init first")
        st = self.state
        return {
            "i": st.i,
            "gamma0": st.gamma0,
            "alpha": list(st.alpha_hist),
            "beta": list(st.beta_hist),
            "gammas": list(st.gam),
            "diag": list(st.diag),
            "offdiag": list(st.offdiag),
            "block_starts": list(st.block_starts),
            "lam": st.lam,
            "phase": st.phase,
            "exhausted": bool(st.exhausted),
            "delta": st.delta,
        }

    def op_solve_dense(self, req):
        h = np.asarray(req["h"], dtype=float)
        g = np.asarray(req["g"], dtype=float)
        m = np.asarray(req["m"], dtype=float) if req.get("m") else None
        cfg = _config_from(req.get("config"))
        problem = DenseProblem(h=h, g=g, delta=float(req["delta"]), m=m)
        rep = solve_gltr(problem, cfg, seed=int(req.get("seed", 0)))
        return {
            "x": [float(v) for v in rep.x],
            "lam": rep.lam,
            "obj": rep.obj,
            "hess_products": rep.hess_products,
            "iterations": rep.iterations,
            "outcome": rep.outcome,
            "status": rep.status,
            "kkt_residual": rep.kkt_residual,
        }

    def op_gen_instance(self, req):
        rng = np.random.default_rng(int(req["seed"]))
        n = int(rng.integers(req.get("n_min", 2), req.get("n_max", 41)))
        a = rng.standard_normal((n, n))
        h = 0.5 * (a + a.T)
        if rng.uniform() < 0.3:
            h = h @ h.T / n + 0.2 * np.eye(n)
        g = rng.standard_normal(n)
        stat_norm = np.linalg.norm(np.linalg.lstsq(h, g, rcond=None)[0])
        delta = float(rng.uniform(0.05, 2.5) * max(stat_norm, 0.5))
        return {
            "n": n,
            "h": [[float(v) for v in row] for row in h],
            "g": [float(v) for v in g],
            "delta": delta,
        }

    def op_exit(self, req):
        return {"ok": True, "exit": True}


def main() -> int:
    session = BridgeSession()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            resp = {"error": f"bad json: {exc}"}
        else:
            resp = session.handle(req)
        sys.stdout.write(json.dumps(resp) + "\n")
        sys.stdout.flush()
        if resp.get("exit"):
            break
    return 0


if __name__ == "__main__":
    sys.exit(main())
