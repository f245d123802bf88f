"""Accuracy and stationarity diagnostics."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .lud import block_subgradients, objective_lud
from .so3 import project_so3, project_tangent, qr_retract

J = np.diag([1.0, 1.0, -1.0])


@dataclass(frozen=True)
class EvalReport:
    mse: float
    gauge: np.ndarray
    handedness_flipped: bool

    def csv_line(self):
        return f"{self.mse:.17g},{str(self.handedness_flipped).lower()}"


def _registered(truth, est):
    corr = np.einsum("kab,kcb->ac", truth, est)
    gauge = project_so3(corr)
    mse = 6.0 - 2.0 * float(np.sum(gauge * corr)) / len(truth)
    return max(mse, 0.0), gauge


def register(truth, est):
    """Registered mean-squared error between two rotation sets.

    Minimizes ``(1/K) sum ||R_i - O Rhat_i||_F^2`` over ``O`` in SO(3) (an
    orthogonal Procrustes problem on ``sum_i R_i Rhat_i^T``), for both
    ``Rhat`` and its mirror image ``J Rhat J``, ``J = diag(1, 1, -1)``.
    Common lines cannot tell the two apart, so the smaller error is kept.
    """
    truth = np.asarray(truth, dtype=float)
    est = np.asarray(est, dtype=float)
    if truth.shape != est.shape:
        raise DimensionMismatch(f"shapes {truth.shape} and {est.shape} differ")
    mse, gauge = _registered(truth, est)
    mse_flip, gauge_flip = _registered(truth, J @ est @ J)
    if mse_flip < mse:
        return EvalReport(mse_flip, gauge_flip, True)
    return EvalReport(mse, gauge, False)


def in_plane_frame(r):
    """Stack the first two columns of every block as rows: a ``(2K, 3)`` matrix.

    These are the in-plane axes that common lines live on; the Gram matrix
    of this stack reflects how the viewing directions are spread.
    """
    r = np.asarray(r, dtype=float)
    return np.swapaxes(r[:, :, :2], 1, 2).reshape(-1, 3)


def singular_profile(r):
    """Descending singular values ``(s1, s2, s3)`` of :func:`in_plane_frame`."""
    s = np.linalg.svd(in_plane_frame(r), compute_uv=False)
    return float(s[0]), float(s[1]), float(s[2])


@dataclass(frozen=True)
class ThetaParams:
    lam: float = 0.5
    inner_iters: int = 50
    inner_step0: float = 0.05

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.inner_iters < 0:
            raise ValueError("inner_iters must be nonnegative")


def estimate_theta(x, lines, params=ThetaParams()):
    """Approximate stationarity measure ``||P(x) - x||_F / lambda``.

    ``P(x)`` is the proximal point of the LUD objective,
    ``argmin_Y f(Y) + ||Y - x||_F^2 / (2 lambda)`` over SO(3)^K. It is
    approximated from ``x`` by ``inner_iters`` Jacobi Riemannian subgradient
    steps with sizes ``inner_step0 / sqrt(t + 1)``; each block's direction
    is the tangent projection of ``2 g_i + (Y_i - x_i) / lambda``, divided by
    ``2 (K - 1)`` like the outer solver's peer averaging. The inner iterate
    with the lowest proximal objective is kept, so ``x`` itself is returned
    (and the estimate is 0) when no step improves on it. An inexact inner
    solve makes this an estimate, not a bound.
    """
    x = np.asarray(x, dtype=float)
    k = len(x)
    everyone = np.arange(k)
    scale = 1.0 / (2.0 * max(k - 1, 1))

    def prox_objective(y):
        return objective_lud(y, lines) + float(np.sum((y - x) ** 2)) / (2 * params.lam)

    y = x.copy()
    best, best_value = x, prox_objective(x)
    for t in range(params.inner_iters):
        grad = 2.0 * block_subgradients(y, lines, everyone, everyone) + (y - x) / params.lam
        xi = project_tangent(y, grad) * scale
        if not np.any(xi):
            break
        y = qr_retract(y, xi, -params.inner_step0 / np.sqrt(t + 1))
        value = prox_objective(y)
        if value < best_value:
            best, best_value = y, value
    return float(np.linalg.norm(best - x)) / params.lam
