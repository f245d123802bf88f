"""Riemannian subgradient solvers for the LUD synchronization problem.

Four update patterns share one driver:

* ``full``: every block, every peer (Jacobi).
* ``sgd``: every block, a ``rho2`` fraction of peers (Jacobi).
* ``bcd``: a ``rho1`` fraction of blocks, every peer (Gauss-Seidel).
* ``bsgd``: a ``rho`` fraction of blocks, using only each other as peers (Jacobi).

An iteration updates one index subset; an epoch is the number of iterations
needed to cycle through all ``K`` indices once (1 for ``full``).
"""

import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .diagnostics import ThetaParams, estimate_theta, in_plane_frame, register
from .errors import InvalidConfig
from .lud import objective_lud, resync_step
from .so3 import project_so3, qr_retract, sample_uniform_so3

METHODS = ("full", "sgd", "bcd", "bsgd")
SCHEDULES = ("constant_horizon", "inv_sqrt", "geometric")


@dataclass(frozen=True)
class SolverConfig:
    method: str = "full"
    rho1: float = 1.0
    rho2: float = 1.0
    step0: float = 0.1
    schedule: str = "inv_sqrt"
    beta: float = 0.99
    max_iters: int = 1000
    tol: float = 1e-5
    reshuffle: bool = True
    alpha: float | None = None
    projection_iters: int = 10
    projection_tol: float = 1e-8
    seed: int = 0

    @classmethod
    def for_method(cls, method, rho=0.1, **kwargs):
        """Config with filter ratios implied by ``method`` and a single ``rho``."""
        ratios = {
            "full": (1.0, 1.0),
            "sgd": (1.0, rho),
            "bcd": (rho, 1.0),
            "bsgd": (rho, rho),
        }
        if method not in ratios:
            raise InvalidConfig(f"unknown method {method!r}")
        rho1, rho2 = ratios[method]
        return cls(method=method, rho1=rho1, rho2=rho2, **kwargs).validated()

    def validated(self):
        if self.method not in METHODS:
            raise InvalidConfig(f"unknown method {self.method!r}")
        if self.schedule not in SCHEDULES:
            raise InvalidConfig(f"unknown schedule {self.schedule!r}")
        for name in ("rho1", "rho2"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise InvalidConfig(f"{name} must lie in (0, 1], got {value}")
        expected = {
            "full": self.rho1 == 1.0 and self.rho2 == 1.0,
            "sgd": self.rho1 == 1.0,
            "bcd": self.rho2 == 1.0,
            "bsgd": self.rho1 == self.rho2,
        }
        if not expected[self.method]:
            raise InvalidConfig(f"filter ratios {self.rho1}, {self.rho2} do not fit method {self.method}")
        if self.step0 <= 0 or self.max_iters < 1 or self.tol < 0:
            raise InvalidConfig("step0 and max_iters must be positive, tol nonnegative")
        if self.schedule == "geometric" and not 0.0 < self.beta <= 1.0:
            raise InvalidConfig("geometric schedule needs beta in (0, 1]")
        if self.alpha is not None and not 2.0 / 3.0 <= self.alpha < 1.0:
            raise InvalidConfig("alpha must lie in [2/3, 1)")
        return self

    def step_size(self, t):
        if self.schedule == "constant_horizon":
            return 1.0 / math.sqrt(self.max_iters + 1)
        if self.schedule == "inv_sqrt":
            return self.step0 / math.sqrt(t + 1)
        return self.step0 * self.beta**t

    def subset_sizes(self, k):
        """``(|D|, |S|)`` per iteration; ``bsgd`` uses ``S = D``."""
        return max(1, math.ceil(self.rho1 * k)), max(1, math.ceil(self.rho2 * k))

    def iterations_per_epoch(self, k):
        d, s = self.subset_sizes(k)
        smallest = s if self.method == "sgd" else d
        return math.ceil(k / smallest)


@dataclass
class IterationTrace:
    """Rows recorded at the end of every epoch (and for the starting point)."""

    iters: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    mse: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    converged: bool = False

    def append(self, it, mu, objective, mse=math.nan, theta=math.nan, seconds=0.0):
        if self.iters and it <= self.iters[-1]:
            raise ValueError("trace iterations must increase")
        self.iters.append(it)
        self.mu.append(mu)
        self.objective.append(objective)
        self.mse.append(mse)
        self.theta.append(theta)
        self.seconds.append(seconds)

    def __len__(self):
        return len(self.iters)

    @property
    def final_objective(self):
        return self.objective[-1]

    @property
    def final_mse(self):
        return self.mse[-1]

    def best_objective(self):
        """Running minimum of the objective, row by row."""
        return np.minimum.accumulate(np.asarray(self.objective))

    def seconds_to_reach(self, level):
        """Solver time of the first row whose objective is at most ``level``."""
        for value, sec in zip(self.objective, self.seconds):
            if value <= level:
                return sec
        return math.inf


class _IndexStream:
    """Sorted index subsets of fixed size, either reshuffled per epoch or i.i.d."""

    def __init__(self, k, size, reshuffle, rng):
        self.k = k
        self.size = size
        self.reshuffle = reshuffle
        self.rng = rng
        self._chunks = []

    def next(self):
        if self.size >= self.k:
            return np.arange(self.k)
        if not self.reshuffle:
            return np.sort(self.rng.choice(self.k, self.size, replace=False))
        if not self._chunks:
            perm = self.rng.permutation(self.k)
            self._chunks = [np.sort(perm[a:a + self.size]) for a in range(0, self.k, self.size)][::-1]
        return self._chunks.pop()


def _iteration_sets(cfg, k, rng):
    everyone = np.arange(k)
    d_size, s_size = cfg.subset_sizes(k)
    if cfg.method == "full":
        while True:
            yield everyone, everyone
    elif cfg.method == "sgd":
        stream = _IndexStream(k, s_size, cfg.reshuffle, rng)
        while True:
            yield everyone, stream.next()
    else:
        stream = _IndexStream(k, d_size, cfg.reshuffle, rng)
        while True:
            d = stream.next()
            yield d, (d if cfg.method == "bsgd" else everyone)


def project_norm_constraint(r, alpha):
    """Replace the in-plane frame of ``r`` by the nearest matrix with ``F^T F = alpha K I``.

    ``F`` is :func:`in_plane_frame` (``2K x 3``); its projection is
    ``sqrt(alpha K) U V^T`` from the thin SVD ``F = U S V^T``. The third
    column of every block is left untouched, so the returned blocks are in
    general not rotations.
    """
    k = len(r)
    u, _, vt = np.linalg.svd(in_plane_frame(r), full_matrices=False)
    frame = math.sqrt(alpha * k) * (u @ vt)
    out = np.array(r, dtype=float)
    out[:, :, :2] = np.swapaxes(frame.reshape(k, 2, 3), 1, 2)
    return out


def alternating_projection(r, alpha, max_rounds=10, tol=1e-8):
    """Alternate between the norm-constraint set and SO(3)^K, ending on SO(3)^K."""
    current = np.asarray(r, dtype=float)
    for _ in range(max_rounds):
        nxt = project_so3(project_norm_constraint(current, alpha))
        change = float(np.linalg.norm(nxt - current))
        current = nxt
        if change < tol:
            break
    return current


def solve(lines, init, cfg=SolverConfig(), *, truth=None, target_mse=None,
          theta_params=None, theta_every=0, callback=None):
    """Minimize the LUD objective from ``init``.

    Runs ``cfg.max_iters`` iterations at most and stops early when the
    relative Frobenius change across one epoch falls below ``cfg.tol`` (or,
    given ``truth``, when the registered MSE reaches ``target_mse``). With
    ``cfg.alpha`` set, every iteration is followed by alternating projections
    enforcing the spectral norm constraint.

    Args:
        lines: a :class:`~cryosync.commonlines.CommonLineSet`.
        init: starting rotations, ``(K, 3, 3)``.
        cfg: solver configuration.
        truth: ground truth, enables the ``mse`` trace column.
        target_mse: optional early-stop level for the registered MSE.
        theta_params: parameters of the stationarity estimate.
        theta_every: record the stationarity estimate every this many
            epochs (0 disables it).
        callback: called as ``callback(epoch, r)`` after every epoch.

    Returns:
        ``(rotations, trace)``. ``trace.seconds`` counts solver time only,
        excluding the diagnostics written to the trace.
    """
    cfg = cfg.validated()
    r = np.array(init, dtype=float)
    k = len(r)
    if k != lines.k:
        raise InvalidConfig(f"init has {k} rotations, lines have K={lines.k}")
    rng = np.random.default_rng(cfg.seed)
    sets = _iteration_sets(cfg, k, rng)
    per_epoch = cfg.iterations_per_epoch(k)
    gauss_seidel = cfg.method == "bcd"
    theta_params = theta_params or ThetaParams()

    trace = IterationTrace()

    def record(it, mu, epoch, elapsed):
        mse = register(truth, r).mse if truth is not None else math.nan
        theta = math.nan
        if theta_every and epoch % theta_every == 0:
            theta = estimate_theta(r, lines, theta_params)
        trace.append(it, mu, objective_lud(r, lines), mse, theta, elapsed)
        return mse

    record(0, math.nan, 0, 0.0)
    elapsed = 0.0
    epoch_start = r.copy()
    mu = math.nan
    for t in range(cfg.max_iters):
        tic = time.perf_counter()
        mu = cfg.step_size(t)
        d, s = next(sets)
        r = resync_step(r, lines, d, s, mu, gauss_seidel=gauss_seidel)
        if cfg.alpha is not None:
            r = alternating_projection(r, cfg.alpha, cfg.projection_iters, cfg.projection_tol)
        elapsed += time.perf_counter() - tic

        last = t + 1 == cfg.max_iters
        if (t + 1) % per_epoch and not last:
            continue
        epoch = (t + 1) // per_epoch
        change = np.linalg.norm(r - epoch_start) / np.linalg.norm(epoch_start)
        epoch_start = r.copy()
        mse = record(t + 1, mu, epoch, elapsed)
        if callback is not None:
            callback(epoch, r)
        if change < cfg.tol or (target_mse is not None and mse <= target_mse):
            trace.converged = True
            break
    return r, trace


def solve_norm_constrained(lines, init, cfg, **kwargs):
    """:func:`solve` with the spectral norm constraint ``F^T F = alpha K I``."""
    if cfg.alpha is None:
        raise InvalidConfig("norm-constrained solve needs cfg.alpha")
    return solve(lines, init, cfg, **kwargs)


def retraction_defect_ratio(x, xi):
    """``||Retr_x(xi) - x - xi||_F / ||xi||_F^2``, defined as 0 for ``xi = 0``."""
    norm = float(np.linalg.norm(xi))
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(qr_retract(x, xi) - x - xi)) / norm**2


def estimate_second_order_bound(n_samples=2000, xi_norm=1e-2, seed=0):
    """Sampled estimate of the retraction's second-order constant.

    Maximizes :func:`retraction_defect_ratio` over random base points and
    random tangent directions of Frobenius norm ``xi_norm``.
    """
    rng = np.random.default_rng(seed)
    base = sample_uniform_so3(n_samples, seed=rng)
    omega = rng.standard_normal((n_samples, 3, 3))
    omega = omega - np.swapaxes(omega, 1, 2)
    xi = base @ omega
    xi *= xi_norm / np.linalg.norm(xi, axis=(1, 2), keepdims=True)
    defect = np.linalg.norm(qr_retract(base, xi) - base - xi, axis=(1, 2))
    return float(np.max(defect)) / xi_norm**2


def config_fields():
    return [f.name for f in fields(SolverConfig)]


def with_overrides(cfg, **overrides):
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
