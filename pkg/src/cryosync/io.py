"""Plain-text file formats: rotations, common lines, traces and key=value configs."""

import math
from dataclasses import fields
from pathlib import Path

import numpy as np

from .commonlines import CommonLineSet
from .solver import SolverConfig


def fmt(x):
    """Full double precision (17 significant digits); NaN becomes an empty field."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.17g}"


def write_rotations(path, r):
    """``K=<int>`` header, then one row-major 3x3 matrix per line."""
    r = np.asarray(r, dtype=float)
    lines = [f"K={len(r)}"]
    lines += [" ".join(fmt(v) for v in block.ravel()) for block in r]
    Path(path).write_text("\n".join(lines) + "\n")


def read_rotations(path):
    text = Path(path).read_text().split("\n")
    header = text[0].strip()
    if not header.startswith("K="):
        raise ValueError(f"{path}: missing K=<int> header")
    k = int(header[2:])
    rows = [line.split() for line in text[1:] if line.strip()]
    if len(rows) != k or any(len(row) != 9 for row in rows):
        raise ValueError(f"{path}: expected {k} lines of 9 numbers")
    return np.array(rows, dtype=float).reshape(k, 3, 3)


def write_lines(path, lines):
    """``K=<int> ntheta=<int>`` header, then one line per pair (0-based indices).

    Quantized sets write ``i j a_ij a_ji`` with integer bins. Exact sets use
    ``ntheta=0`` and write ``i j x_ij y_ij x_ji y_ji``, the in-plane
    components of both unit lines, so they round-trip without loss.
    """
    i, j = lines.pair_index
    body = [f"K={lines.k} ntheta={lines.n_theta or 0}"]
    if lines.n_theta is None:
        vals = np.concatenate([lines.c_ij[:, :2], lines.c_ji[:, :2]], axis=1)
        body += [f"{a} {b} " + " ".join(fmt(v) for v in row) for a, b, row in zip(i, j, vals)]
    else:
        body += [f"{a} {b} {x} {y}" for a, b, (x, y) in zip(i, j, lines.bins)]
    Path(path).write_text("\n".join(body) + "\n")


def read_lines(path):
    text = Path(path).read_text().split("\n")
    try:
        header = dict(item.split("=", 1) for item in text[0].split())
        k, n_theta = int(header["K"]), int(header["ntheta"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: header must read 'K=<int> ntheta=<int>'") from exc
    width = 6 if n_theta == 0 else 4
    rows = [line.split() for line in text[1:] if line.strip()]
    if any(len(row) != width for row in rows):
        raise ValueError(f"{path}: expected {width} fields per pair line")
    i, j = np.triu_indices(k, 1)
    if len(rows) != len(i):
        raise ValueError(f"{path}: expected {len(i)} pairs, found {len(rows)}")
    a = np.array([row[0] for row in rows], dtype=np.int64)
    b = np.array([row[1] for row in rows], dtype=np.int64)
    if np.any(a >= b) or np.any(a < 0) or np.any(b >= k):
        raise ValueError(f"{path}: pair indices must satisfy 0 <= i < j < K")
    # Pair lines may come in any order; place them by their (i, j) position.
    pos = a * k - a * (a + 1) // 2 + (b - a - 1)
    if len(np.unique(pos)) != len(pos):
        raise ValueError(f"{path}: duplicate pair")
    if n_theta == 0:
        vals = np.empty((len(i), 4))
        vals[pos] = np.array([row[2:] for row in rows], dtype=float)
        pad = np.zeros((len(i), 1))
        return CommonLineSet(k, None, np.hstack([vals[:, :2], pad]), np.hstack([vals[:, 2:], pad]))
    bins = np.empty((len(i), 2), dtype=np.int64)
    bins[pos] = np.array([row[2:] for row in rows], dtype=np.int64)
    return CommonLineSet.from_bins(k, n_theta, bins)


TRACE_HEADER = "iter,mu,objective,mse,theta,seconds"


def write_trace(path, trace):
    rows = [TRACE_HEADER]
    for row in zip(trace.iters, trace.mu, trace.objective, trace.mse, trace.theta, trace.seconds):
        rows.append(",".join([str(row[0])] + [fmt(v) for v in row[1:]]))
    Path(path).write_text("\n".join(rows) + "\n")


def read_trace(path):
    """Trace CSV as a dict of column name to float array (empty fields are NaN)."""
    text = Path(path).read_text().strip().split("\n")
    names = text[0].split(",")
    cols = {name: [] for name in names}
    for line in text[1:]:
        for name, value in zip(names, line.split(",")):
            cols[name].append(float(value) if value else math.nan)
    return {name: np.array(values) for name, values in cols.items()}


def parse_key_values(text):
    """``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(kind, value):
    if kind is bool or kind == "bool":
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if value.lower() in ("", "none"):
        return None
    for cast in (int, float):
        if kind in (cast, cast.__name__):
            return cast(value)
    if "float" in str(kind):
        return float(value)
    return value


def config_from_text(text, base=None):
    """Build a :class:`SolverConfig` from ``key=value`` lines over ``base``."""
    values = parse_key_values(text)
    kinds = {f.name: f.type for f in fields(SolverConfig)}
    unknown = set(values) - set(kinds)
    if unknown:
        raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
    base = base or SolverConfig()
    params = {f.name: getattr(base, f.name) for f in fields(SolverConfig)}
    for key, value in values.items():
        params[key] = _coerce(kinds[key], value)
    return SolverConfig(**params)


def config_to_text(cfg):
    lines = []
    for f in fields(SolverConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, float):
            value = fmt(value)
        elif value is None:
            value = "none"
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"
