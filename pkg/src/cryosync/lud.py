"""Least-unsquared-deviation objective, subgradients and the block update."""

import numpy as np

from .errors import DimensionMismatch
from .so3 import project_tangent, qr_retract

# Residuals at or below this are treated as exactly zero (subgradient choice V = 0).
ZERO_RESIDUAL = 1e-12
# Bound on rows * peers per vectorized chunk, keeps (rows, peers, 3) temporaries small.
_CHUNK_ELEMS = 1 << 20


def _check_k(r, lines):
    if len(r) != lines.k:
        raise DimensionMismatch(f"{len(r)} rotations but common lines for K={lines.k}")


def pair_residuals(r, lines):
    """``R_i c_ij - R_j c_ji`` for every pair ``i < j``, shape ``(P, 3)``."""
    r = np.asarray(r, dtype=float)
    _check_k(r, lines)
    i, j = lines.pair_index
    return (r[i] @ lines.c_ij[:, :, None] - r[j] @ lines.c_ji[:, :, None])[:, :, 0]


def objective_lud(r, lines):
    """Sum of unsquared residual norms over ordered pairs ``i != j``.

    Each unordered pair contributes twice.
    """
    return 2.0 * float(np.linalg.norm(pair_residuals(r, lines), axis=1).sum())


def objective_ls(r, lines):
    """Sum of squared residual norms over ordered pairs ``i != j``."""
    return 2.0 * float(np.square(pair_residuals(r, lines)).sum())


def block_subgradients(r, lines, rows, peers):
    """Euclidean subgradients of several blocks, shape ``(len(rows), 3, 3)``.

    Block ``i`` receives ``sum_{j in peers, j != i} u_ij c_ij^T`` where
    ``u_ij`` is the unit residual ``R_i c_ij - R_j c_ji``; zero residuals
    contribute nothing. Each unordered pair appears once, so this is half
    the gradient of :func:`objective_lud` with respect to ``R_i``.
    """
    r = np.asarray(r, dtype=float)
    rows = np.asarray(rows, dtype=np.intp)
    peers = np.asarray(peers, dtype=np.intp)
    c = lines.dense
    out = np.zeros((len(rows), 3, 3))
    step = max(1, _CHUNK_ELEMS // max(1, len(peers)))
    frames_peers = np.swapaxes(r[peers, :, :2], 1, 2)
    for start in range(0, len(rows), step):
        sub = rows[start:start + step]
        c_own = c[np.ix_(sub, peers)]
        res = c_own @ np.swapaxes(r[sub, :, :2], 1, 2)
        res -= np.swapaxes(c[np.ix_(peers, sub)] @ frames_peers, 0, 1)
        norm = np.sqrt(np.square(res).sum(axis=2))
        scale = np.where(norm > ZERO_RESIDUAL, 1.0 / np.where(norm > 0, norm, 1.0), 0.0)
        res *= scale[..., None]
        out[start:start + step, :, :2] = np.swapaxes(res, 1, 2) @ c_own
    return out


def euclid_subgrad_block(r, lines, i, peers):
    """Euclidean subgradient of block ``i`` summed over ``peers`` (``i`` skipped)."""
    _check_k(r, lines)
    return block_subgradients(r, lines, [i], peers)[0]


def peer_counts(rows, peers):
    """Number of peers ``j != i`` for each row ``i``."""
    rows = np.asarray(rows)
    return len(peers) - np.isin(rows, peers).astype(int)


def riemannian_subgradients(r, lines, rows, peers):
    """Tangent projections of :func:`block_subgradients` at ``r[rows]``."""
    g = block_subgradients(r, lines, rows, peers)
    return project_tangent(np.asarray(r)[rows], g)


def resync_step(r, lines, d, s, mu, gauss_seidel=False):
    """One Riemannian subgradient update of the blocks in ``d`` using peers ``s``.

    Each updated block moves along the negative Riemannian subgradient
    averaged over its peers, ``R_i <- Qr(R_i - mu * xi_i / n_i)``. With the
    default Jacobi rule all blocks read the input iterate; with
    ``gauss_seidel=True`` blocks are updated in order and later blocks see
    earlier updates. Blocks outside ``d`` are returned unchanged.
    """
    r = np.asarray(r, dtype=float)
    _check_k(r, lines)
    d = np.asarray(d, dtype=np.intp)
    s = np.asarray(s, dtype=np.intp)
    if len(d) == 0 or len(s) == 0:
        raise ValueError("update and peer sets must be nonempty")
    if mu <= 0:
        raise ValueError("step size must be positive")
    counts = np.maximum(peer_counts(d, s), 1)
    out = r.copy()
    if not gauss_seidel:
        xi = riemannian_subgradients(r, lines, d, s) / counts[:, None, None]
        out[d] = qr_retract(r[d], xi, -mu)
        return out
    for idx, n in zip(d, counts):
        xi = riemannian_subgradients(out, lines, [idx], s)[0] / n
        out[idx] = qr_retract(out[idx], xi, -mu)
    return out
