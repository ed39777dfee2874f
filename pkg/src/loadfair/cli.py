"""Command-line interface.

Exit codes: 0 success, 1 input error, 2 no fair assignment exists,
3 oracle cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import __version__
from .assignment import FairnessInfeasibleError, budgeted_fair_assignment, fair_assignment, mlkc_assignment
from .core import InstanceError, assignment_cost, assignment_report, dump_instance, load_instance
from .generate import random_instance
from .oracle import (
    MAX_CENTERS,
    MAX_MAPS,
    MAX_POINTS,
    OracleCapError,
    brute_force_fair_assignment,
    brute_force_fair_kmedian,
    brute_force_fmlkc,
)
from .solver import MODES, SolveConfig, solve_fmlkc

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_CAP = 0, 1, 2, 3

TRACE = 5
logging.addLevelName(TRACE, "TRACE")
log = logging.getLogger("loadfair")


def load_schema(name: str) -> dict:
    """A shipped JSON schema: ``instance``, ``report``, ``decision`` or ``oracle``."""
    return json.loads(resources.files("loadfair").joinpath(f"schemas/{name}.schema.json").read_text())


def _setup_logging() -> None:
    level = os.environ.get("LOADFAIR_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG, "trace": TRACE}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _epsilon(text: str) -> float:
    try:
        eps = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < eps < 1:
        raise argparse.ArgumentTypeError(f"epsilon out of range (0, 1): {eps}")
    return eps


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True, help="instance file (JSON, or point CSV with --facilities)")
    p.add_argument("--format", choices=("json", "csv"), help="input format; default from the file extension")
    p.add_argument("--facilities", help="facility CSV (id,x1,...,xd) for CSV input")
    p.add_argument("--k", type=int, help="number of clusters (CSV input)")
    p.add_argument("--alpha", help="comma-separated upper bounds (CSV input)")
    p.add_argument("--beta", help="comma-separated lower bounds (CSV input)")
    p.add_argument("--no-triangle-check", action="store_true", help="skip the O(n^3) triangle-inequality check")
    p.add_argument("--out", help="write the report here instead of standard output")
    p.add_argument("--timing", action="store_true", help="record wall time in the manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadfair", description="Fair minimum-load k-clustering")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="choose k centers and a fair assignment")
    _add_instance_args(p)
    p.add_argument("--epsilon", type=_epsilon, default=0.5)
    p.add_argument("--mode", choices=MODES, default="exhaustive")
    p.add_argument("--reps", type=int, default=3, help="independent sampled lists (sampled modes)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", choices=("search", "enumerate"), default="search")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("assign", help="fair assignment to fixed centers")
    _add_instance_args(p)
    p.add_argument("--centers", required=True, help="comma-separated facility ids")
    p.add_argument("--epsilon", type=_epsilon, default=0.5)
    p.add_argument("--budget", type=float, help="decide whether a fair assignment of cost <= budget exists")
    p.add_argument("--strategy", choices=("search", "enumerate"), default="search")

    p = sub.add_parser("gen", help="write a random instance")
    p.add_argument("--n", type=int, required=True, help="number of points")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--ell", type=int, default=1, help="number of groups")
    p.add_argument("--facilities", type=int, help="number of facilities (default: n)")
    p.add_argument("--dim", type=int, default=2, help="coordinate dimension; 0 draws a random metric")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slack", default="1/4", help="fairness bounds are group share +/- slack")
    p.add_argument("--grid", type=int, help="integer coordinates or weights below this value")
    p.add_argument("--out", help="output path (default: standard output)")

    p = sub.add_parser("oracle", help="exact optimum by enumeration (small instances only)")
    _add_instance_args(p)
    p.add_argument("--centers", help="fix the centers; default: optimize over all k-subsets")
    p.add_argument("--objective", choices=("max_load", "sum"), default="max_load")
    p.add_argument("--max-points", type=int, default=MAX_POINTS, help="largest n accepted")
    p.add_argument("--max-centers", type=int, default=MAX_CENTERS, help="largest k accepted")
    p.add_argument("--max-maps", type=int, default=MAX_MAPS, help="largest k^n accepted")
    return parser


def _load(args) -> object:
    path = Path(args.instance)
    fmt = args.format or ("csv" if path.suffix.lower() == ".csv" else "json")
    check = not args.no_triangle_check
    if fmt == "json":
        with open(path, "rb") as fh:
            return load_instance(fh, "json", check_triangle=check)
    if args.facilities is None:
        raise InstanceError("csv input needs --facilities", "facilities")
    split = (lambda s: s.split(",") if s else None)
    with open(path, "rb") as fh, open(args.facilities, "rb") as ff:
        return load_instance(fh, "csv", facilities=ff, k=args.k, alpha=split(args.alpha),
                             beta=split(args.beta), check_triangle=check)


def _manifest(args, inst, config: dict, seed, started: float) -> dict:
    out = {"command": args.command, "config": config, "seed": seed,
           "instance_digest": inst.digest(), "version": __version__}
    if getattr(args, "timing", False):
        out["wall_time"] = time.perf_counter() - started
    return out


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _centers(text: str) -> list[str]:
    ids = [c.strip() for c in text.split(",") if c.strip()]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate center ids in {ids}")
    return ids


def cmd_solve(args) -> int:
    started = time.perf_counter()
    inst = _load(args)
    cfg = SolveConfig(epsilon=args.epsilon, mode=args.mode, reps=args.reps, seed=args.seed, strategy=args.strategy)
    res = solve_fmlkc(inst, cfg, n_jobs=max(1, args.threads))
    doc = res.report(inst)
    doc["manifest"] = _manifest(args, inst, {**vars(cfg)}, args.seed, started)
    _emit(doc, args.out)
    return EXIT_OK


def cmd_assign(args) -> int:
    started = time.perf_counter()
    inst = _load(args)
    centers = inst.resolve_centers(_centers(args.centers))
    config = {"centers": [c.id for c in centers], "epsilon": args.epsilon, "budget": args.budget,
              "strategy": args.strategy}
    if args.budget is not None:
        out = budgeted_fair_assignment(inst, centers, args.budget, args.epsilon, strategy=args.strategy,
                                       fair=not inst.fairness_vacuous)
        doc: dict = {"feasible": out.feasible, "budget": args.budget, "epsilon": args.epsilon}
        if out.feasible:
            doc["cost"] = out.cost
            doc["assignment"] = assignment_report(inst, out.assignment)
            doc["trace"] = out.assignment.trace
        else:
            doc["trace"] = out.stats
    else:
        solve = mlkc_assignment if inst.fairness_vacuous else fair_assignment
        a = solve(inst, centers, args.epsilon, strategy=args.strategy)
        doc = assignment_report(inst, a)
        doc["trace"] = a.trace
    doc["manifest"] = _manifest(args, inst, config, None, started)
    _emit(doc, args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.n < 1 or args.k < 1 or args.ell < 1 or args.dim < 0:
        raise ValueError("n, k and ell must be positive and dim nonnegative")
    if args.ell > args.n:
        raise ValueError("ell exceeds n; some group would be empty")
    inst = random_instance(args.n, args.facilities or args.n, args.k, args.ell, dim=args.dim, seed=args.seed,
                           slack=args.slack, grid=args.grid)
    text = dump_instance(inst) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    started = time.perf_counter()
    inst = _load(args)
    caps = {"max_points": args.max_points, "max_centers": args.max_centers, "max_maps": args.max_maps}
    if args.centers:
        centers = inst.resolve_centers(_centers(args.centers))
        fn = brute_force_fair_assignment if args.objective == "max_load" else brute_force_fair_kmedian
        res = fn(inst, centers, **caps)
    else:
        if args.objective != "max_load":
            raise ValueError("the sum objective needs --centers")
        res = brute_force_fmlkc(inst, **caps)
    doc = res.to_dict()
    if res.assignment is not None:
        doc["max_load"] = assignment_cost(inst, res.assignment)
    config = {"centers": args.centers, "objective": args.objective, **caps}
    doc["manifest"] = _manifest(args, inst, config, None, started)
    _emit(doc, args.out)
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


COMMANDS = {"solve": cmd_solve, "assign": cmd_assign, "gen": cmd_gen, "oracle": cmd_oracle}


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except FairnessInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OracleCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InstanceError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
