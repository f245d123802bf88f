"""Command-line driver: ``simulate``, ``solve``, ``eval`` and ``bench``.

Exit codes: 0 on success, 1 when the solver itself fails, 2 for usage or
data errors (bad flags, unreadable files, mismatched sizes).
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import BenchSpec, run_bench
from .commonlines import simulate_instance
from .diagnostics import register
from .errors import CryoSyncError, DimensionMismatch, InvalidConfig
from .io import (
    config_from_text,
    fmt,
    read_lines,
    read_rotations,
    write_lines,
    write_rotations,
    write_trace,
)
from .lud import objective_lud
from .so3 import sample_uniform_so3
from .solver import METHODS, SCHEDULES, SolverConfig, solve
from .spectral import build_sync_matrix, spectral_initialize

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("cryosync")


class UsageError(Exception):
    pass


def cmd_simulate(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth, clean, lines = simulate_instance(args.k, args.ntheta or None, args.seed, p=args.p)
    write_rotations(out / "truth.txt", truth)
    write_lines(out / "lines.txt", lines)
    print(f"clean_objective={fmt(objective_lud(truth, clean))}")
    print(f"corrupted_objective={fmt(objective_lud(truth, lines))}")
    return EXIT_OK


def _solver_config(args):
    cfg = SolverConfig()
    if args.config:
        cfg = config_from_text(Path(args.config).read_text(), cfg)
    overrides = {
        "step0": args.step0,
        "schedule": args.schedule,
        "beta": args.beta,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "alpha": args.alpha,
        "seed": args.seed,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if args.no_reshuffle:
        cfg = replace(cfg, reshuffle=False)
    if args.method is not None or args.rho is not None:
        method = args.method or cfg.method
        rho = args.rho if args.rho is not None else 0.1
        base = {f: getattr(cfg, f) for f in ("step0", "schedule", "beta", "max_iters", "tol",
                                             "reshuffle", "alpha", "projection_iters",
                                             "projection_tol", "seed")}
        return SolverConfig.for_method(method, rho=rho, **base)
    return cfg.validated()


def _initial(args, lines):
    if args.init == "eig":
        return spectral_initialize(build_sync_matrix(lines))
    if args.init == "random":
        return sample_uniform_so3(lines.k, args.seed or 0)
    if args.init.startswith("file:"):
        init = read_rotations(args.init[len("file:"):])
        if len(init) != lines.k:
            raise DimensionMismatch(f"init has K={len(init)}, lines have K={lines.k}")
        return init
    raise UsageError(f"--init must be eig, random or file:PATH, got {args.init!r}")


def cmd_solve(args):
    lines = read_lines(args.lines)
    cfg = _solver_config(args)
    truth = read_rotations(args.truth) if args.truth else None
    if truth is not None and len(truth) != lines.k:
        raise DimensionMismatch(f"truth has K={len(truth)}, lines have K={lines.k}")
    init = _initial(args, lines)
    est, trace = solve(lines, init, cfg, truth=truth, target_mse=args.target_mse)
    write_rotations(args.out, est)
    write_trace(args.trace, trace)
    print(f"iters={trace.iters[-1]} objective={fmt(trace.final_objective)} "
          f"converged={str(trace.converged).lower()}")
    return EXIT_OK


def cmd_eval(args):
    truth = read_rotations(args.truth)
    est = read_rotations(args.estimate)
    if truth.shape != est.shape:
        raise DimensionMismatch(f"K={len(truth)} versus K={len(est)}")
    print(register(truth, est).csv_line())
    return EXIT_OK


def cmd_bench(args):
    spec = BenchSpec.from_text(Path(args.spec).read_text())
    if args.workers is not None:
        spec.workers = args.workers
    if args.output_dir is not None:
        spec.output_dir = Path(args.output_dir)
    rows = run_bench(spec)
    failed = sum(r.status != "ok" for r in rows)
    print(f"cells={len(rows)} failed={failed} output_dir={spec.output_dir}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="cryosync", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic instance")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=float, default=1.0, help="detection rate")
    p.add_argument("--ntheta", type=int, default=360, help="angular bins; 0 keeps exact lines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve", help="estimate rotations from a common-line file")
    p.add_argument("--lines", required=True)
    p.add_argument("--init", default="eig", help="eig, random or file:PATH")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--rho", type=float, help="filter ratio for stochastic methods (default 0.1)")
    p.add_argument("--step0", type=float)
    p.add_argument("--schedule", choices=SCHEDULES)
    p.add_argument("--beta", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--no-reshuffle", action="store_true")
    p.add_argument("--alpha", type=float, help="enable the norm constraint")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="key=value solver config file")
    p.add_argument("--truth", help="ground truth, fills the mse trace column")
    p.add_argument("--target-mse", type=float, help="stop once the registered MSE reaches this")
    p.add_argument("--out", default="estimate.txt")
    p.add_argument("--trace", default="trace.csv")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="registered MSE between two rotation files")
    p.add_argument("truth")
    p.add_argument("estimate")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run a benchmark grid")
    p.add_argument("--spec", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (DimensionMismatch, InvalidConfig) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CryoSyncError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
