"""Command-line benchmark harness.

Subcommands::

    trbench run     --suite all --solver gltr --seed 0 --max-outer N --out DIR
    trbench profile --metric hv --in DIR --out FILE
    trbench control --mesh N --beta B [--dim D] [--solver gltr] [--out DIR]

``run`` writes one JSON record per (problem, solver) run plus an aggregate
``records.csv``; ``profile`` reads those records and writes a
``tau,solver,rho`` CSV.  A config file of ``key=value`` lines can override
the outer-loop parameters.  Exit code 0 means every run completed (solver
failures are recorded as data, not crashes).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from .outer import SOLVERS, BenchRecord, OuterConfig, outer_loop
from .problems import control_problem, suite
from .profile import performance_profile

CSV_HEADER = ["problem", "solver", "grad_norm", "hv_count", "outer_iters", "wall_ms", "outcome"]


def load_config(path) -> OuterConfig:
    cfg = OuterConfig()
    text = Path(path).read_text()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config key {key!r}")
        current = getattr(cfg, key)
        setattr(cfg, key, int(value) if isinstance(current, int) else float(value))
    cfg.validate()
    return cfg


def _write_records(records, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    for rec in records:
        path = out_dir / f"{rec.problem}__{rec.solver}.json"
        path.write_text(json.dumps(rec.as_dict(), indent=2) + "\n")
    with open(out_dir / "records.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            d = rec.as_dict()
            writer.writerow([d[k] for k in CSV_HEADER])


def _load_records(in_dir: Path):
    records = []
    for path in sorted(in_dir.glob("*.json")):
        d = json.loads(path.read_text())
        records.append(BenchRecord(**d))
    if not records:
        raise FileNotFoundError(f"no JSON records under {in_dir}")
    return records


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else OuterConfig()
    if args.max_outer is not None:
        cfg.max_outer = args.max_outer
    problems = suite()
    if args.suite != "all":
        wanted = set(args.suite.split(","))
        problems = [p for p in problems if p.name in wanted]
        missing = wanted - {p.name for p in problems}
        if missing:
            print(f"unknown problems: {sorted(missing)}", file=sys.stderr)
            return 2
    solvers = SOLVERS if args.solver == "all" else [args.solver]
    records = []
    for p in problems:
        for solver in solvers:
            rec, _ = outer_loop(p, solver, cfg, seed=args.seed)
            records.append(rec)
            print(
                f"{rec.problem:24s} {rec.solver:7s} grad={rec.grad_norm:10.3e} "
                f"hv={rec.hv_count:6d} iters={rec.outer_iters:4d} {rec.outcome}"
            )
    _write_records(records, Path(args.out))
    return 0


def cmd_profile(args) -> int:
    records = _load_records(Path(args.in_dir))
    rows = performance_profile(records, metric=args.metric)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "solver", "rho"])
        for tau, solver, rho in rows:
            writer.writerow(["inf" if math.isinf(tau) else f"{tau:.10g}", solver, f"{rho:.6f}"])
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def cmd_control(args) -> int:
    p = control_problem(args.mesh, args.beta, dim=args.dim)
    cfg = load_config(args.config) if args.config else OuterConfig()
    rec, trace = outer_loop(p, args.solver, cfg, seed=args.seed)
    print(
        f"{rec.problem}: solver={rec.solver} outer_iters={rec.outer_iters} "
        f"hv={rec.hv_count} grad={rec.grad_norm:.3e} {rec.outcome}"
    )
    if args.out:
        _write_records([rec], Path(args.out))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trbench", description="trust-region solver benchmarks"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the synthetic suite")
    run.add_argument("--suite", default="all", help="'all' or comma-separated names")
    run.add_argument("--solver", default="all", choices=("all",) + SOLVERS)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--max-outer", type=int, default=None)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--config", default=None, help="key=value config file")
    run.set_defaults(func=cmd_run)

    prof = sub.add_parser("profile", help="performance profile from records")
    prof.add_argument("--metric", default="hv", choices=("hv", "time"))
    prof.add_argument("--in", dest="in_dir", required=True)
    prof.add_argument("--out", required=True)
    prof.set_defaults(func=cmd_profile)

    ctl = sub.add_parser("control", help="discretized control problem")
    ctl.add_argument("--mesh", type=int, required=True)
    ctl.add_argument("--beta", type=float, required=True)
    ctl.add_argument("--dim", type=int, default=1, choices=(1, 2))
    ctl.add_argument("--solver", default="gltr", choices=SOLVERS)
    ctl.add_argument("--seed", type=int, default=0)
    ctl.add_argument("--out", default=None)
    ctl.add_argument("--config", default=None)
    ctl.set_defaults(func=cmd_control)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
