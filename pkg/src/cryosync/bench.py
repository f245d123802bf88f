"""Benchmark grid over methods, K, detection rates and seeds."""

import csv
import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .commonlines import simulate_instance
from .diagnostics import register
from .errors import InvalidConfig
from .io import fmt, parse_key_values
from .solver import SolverConfig, solve
from .spectral import build_sync_matrix, spectral_initialize

log = logging.getLogger(__name__)

_SHARED_FIELDS = ("step0", "schedule", "beta", "max_iters", "tol", "reshuffle")
LABELS = {"eig": "Eig", "full": "ReSync", "sgd": "ReSync-SGD", "bcd": "ReSync-BCD", "bsgd": "ReSync-BSGD"}


@dataclass
class BenchSpec:
    k_values: list
    p_values: list
    methods: list
    seeds: list
    output_dir: Path
    n_theta: int = 360
    base: SolverConfig = field(default_factory=SolverConfig)
    workers: int = 1

    def __post_init__(self):
        for name in ("k_values", "p_values", "methods", "seeds"):
            if not getattr(self, name):
                raise InvalidConfig(f"bench spec needs a nonempty {name}")
        if any(not 0.0 <= p <= 1.0 for p in self.p_values):
            raise InvalidConfig("p_values must lie in [0, 1]")
        self.output_dir = Path(self.output_dir)

    @classmethod
    def from_text(cls, text):
        """Parse ``key=value`` lines; list values are comma separated.

        ``methods`` entries are ``name`` or ``name:rho``, e.g.
        ``eig,full,bsgd:0.1``; ``eig`` reports the spectral initializer and
        ``rho`` defaults to 0.1. Keys ``step0``, ``schedule``, ``beta``,
        ``max_iters``, ``tol`` and ``reshuffle`` set the shared solver
        template.
        """
        kv = parse_key_values(text)

        def ints(key):
            return [int(v) for v in kv[key].split(",") if v.strip()]

        def floats(key):
            return [float(v) for v in kv[key].split(",") if v.strip()]

        try:
            methods = []
            for item in kv["methods"].split(","):
                name, _, rho = item.strip().partition(":")
                if name not in LABELS:
                    raise InvalidConfig(f"unknown method {name!r}")
                methods.append((name, float(rho) if rho else 0.1))
            base = {}
            for key, cast in (("step0", float), ("beta", float), ("max_iters", int), ("tol", float)):
                if key in kv:
                    base[key] = cast(kv[key])
            if "schedule" in kv:
                base["schedule"] = kv["schedule"]
            if "reshuffle" in kv:
                base["reshuffle"] = kv["reshuffle"].lower() in ("1", "true", "yes")
            return cls(
                k_values=ints("k_values"),
                p_values=floats("p_values"),
                methods=methods,
                seeds=ints("seeds"),
                output_dir=Path(kv.get("output_dir", "bench_out")),
                n_theta=int(kv.get("ntheta", 360)),
                base=SolverConfig(**base),
                workers=int(kv.get("workers", 1)),
            )
        except KeyError as exc:
            raise InvalidConfig(f"bench spec is missing {exc.args[0]}") from exc


@dataclass
class BenchRow:
    method: str
    k: int
    p: float
    seed: int
    mse: float
    seconds: float
    iters: int
    status: str = "ok"


def _method_key(name, rho):
    return name if name in ("full", "eig") else f"{name}:{rho:g}"


def cell_seed(base_seed, method, k, p, trial):
    """Stable 63-bit seed derived from the cell coordinates."""
    key = f"{base_seed}|{method}|{k}|{p!r}|{trial}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


def run_cell(spec, k, p, seed):
    """Every requested method on one ``(K, p, seed)`` instance.

    All methods share the same simulated data and the same spectral start.
    The spectral initializer gets its own ``eig`` row only when listed in
    ``spec.methods``; its time is never added to a solver's time.
    """
    try:
        truth, _, lines = simulate_instance(k, spec.n_theta, cell_seed(seed, "data", k, p, 0), p=p)
        tic = time.perf_counter()
        init = spectral_initialize(build_sync_matrix(lines))
        eig_seconds = time.perf_counter() - tic
    except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the grid
        log.warning("cell K=%s p=%s seed=%s failed: %s", k, p, seed, exc)
        return [BenchRow(_method_key(name, rho), k, p, seed, math.nan, 0.0, 0, f"error: {exc}")
                for name, rho in spec.methods]
    rows = []
    for name, rho in spec.methods:
        label = _method_key(name, rho)
        if name == "eig":
            rows.append(BenchRow(label, k, p, seed, register(truth, init).mse, eig_seconds, 0))
            continue
        try:
            cfg = SolverConfig.for_method(
                name, rho=rho, seed=cell_seed(seed, label, k, p, 0),
                **{f: getattr(spec.base, f) for f in _SHARED_FIELDS},
            )
            est, trace = solve(lines, init, cfg)
            rows.append(BenchRow(label, k, p, seed, register(truth, est).mse, trace.seconds[-1], trace.iters[-1]))
        except Exception as exc:  # noqa: BLE001
            log.warning("cell %s K=%s p=%s seed=%s failed: %s", label, k, p, seed, exc)
            rows.append(BenchRow(label, k, p, seed, math.nan, 0.0, 0, f"error: {exc}"))
    return rows


def aggregate(rows):
    """Mean MSE and seconds per (method, K, p) over successful seeds."""
    groups = {}
    for row in rows:
        if row.status != "ok":
            continue
        groups.setdefault((row.method, row.k, row.p), []).append(row)
    return {
        key: (float(np.mean([r.mse for r in group])), float(np.mean([r.seconds for r in group])))
        for key, group in groups.items()
    }


def _label(method):
    name, _, rho = method.partition(":")
    return LABELS.get(name, name) + (f" (rho={rho})" if rho else "")


def write_cells(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "K", "p", "seed", "mse", "seconds", "iters", "status"])
        for r in rows:
            writer.writerow([r.method, r.k, fmt(r.p), r.seed, fmt(r.mse), fmt(r.seconds), r.iters, r.status])


def read_cells(path):
    with open(path, newline="") as fh:
        return [
            BenchRow(rec["method"], int(rec["K"]), float(rec["p"]), int(rec["seed"]),
                     float(rec["mse"]) if rec["mse"] else math.nan, float(rec["seconds"]),
                     int(rec["iters"]), rec["status"])
            for rec in csv.DictReader(fh)
        ]


def write_tables(output_dir, rows):
    """One table per K: methods as rows, an MSE/Time column pair per p."""
    means = aggregate(rows)
    paths = []
    for k in sorted({r.k for r in rows}):
        ps = sorted({r.p for r in rows if r.k == k}, reverse=True)
        methods = list(dict.fromkeys(r.method for r in rows if r.k == k))
        path = Path(output_dir) / f"table_K{k}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method"] + [f"{col} p={fmt(p)}" for p in ps for col in ("MSE", "Time")])
            for method in methods:
                cells = []
                for p in ps:
                    mse, sec = means.get((method, k, p), (float("nan"), float("nan")))
                    cells += [fmt(mse), fmt(sec)]
                writer.writerow([_label(method)] + cells)
        paths.append(path)
    return paths


def _run_cell_to_file(args):
    spec, k, p, seed = args
    rows = run_cell(spec, k, p, seed)
    path = spec.output_dir / "cells" / f"K{k}_p{fmt(p)}_seed{seed}.csv"
    write_cells(path, rows)
    return path


def run_bench(spec):
    """Run the full grid and write ``cells.csv`` and ``table_K<K>.csv`` files."""
    (spec.output_dir / "cells").mkdir(parents=True, exist_ok=True)
    jobs = [(spec, k, p, seed) for k in spec.k_values for p in spec.p_values for seed in spec.seeds]
    # Each cell writes its own file; the grid is merged in job order afterwards.
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            paths = list(pool.map(_run_cell_to_file, jobs))
    else:
        paths = [_run_cell_to_file(job) for job in jobs]
    rows = [row for path in paths for row in read_cells(path)]
    write_cells(spec.output_dir / "cells.csv", rows)
    write_tables(spec.output_dir, rows)
    return rows


def rows_as_dicts(rows):
    return [asdict(r) for r in rows]
