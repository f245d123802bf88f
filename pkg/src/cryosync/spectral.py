"""Eigenvector-relaxation initialization from common lines."""

import warnings

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import EigenFailure, SpectralGapWarning
from .so3 import project_so3

DENSE_LIMIT = 6000
GAP_RATIO = 1e-6


def build_sync_matrix(lines):
    """Assemble the ``3K x 3K`` matrix with blocks ``M_ij = c_ij c_ji^T``.

    Diagonal blocks are zero and ``M_ji = M_ij^T`` holds exactly.
    """
    k = lines.k
    c = lines.dense
    m = np.zeros((k, 3, k, 3))
    m[:, :2, :, :2] = np.einsum("ija,jib->iajb", c, c)
    return m.reshape(3 * k, 3 * k)


def _top_eigenpairs(m, count):
    n = m.shape[0]
    try:
        if n <= DENSE_LIMIT:
            w, v = scipy.linalg.eigh(m, subset_by_index=[n - count, n - 1])
        else:
            w, v = scipy.sparse.linalg.eigsh(m, k=count, which="LA", tol=1e-8, maxiter=1000 * n)
    except (np.linalg.LinAlgError, scipy.sparse.linalg.ArpackNoConvergence) as exc:
        raise EigenFailure(str(exc)) from exc
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def spectral_initialize(m):
    """Rotations from the top three eigenvectors of the synchronization matrix.

    The stacked eigenvectors ``sqrt(K) [v1 v2 v3]`` split into 3x3 blocks
    that estimate ``R_i^T`` up to a global orthogonal factor. Only the
    in-plane rows carry information (the lines have no third component), so
    each block's two in-plane rows are orthonormalized, the third row is
    completed by their cross product, and the block is transposed.

    A ``SpectralGapWarning`` is emitted when ``lambda_3 - lambda_4`` is below
    ``1e-6 * lambda_1``.

    Args:
        m: synchronization matrix from :func:`build_sync_matrix`.

    Returns:
        ``(K, 3, 3)`` rotation stack. Its handedness is arbitrary.
    """
    m = np.asarray(m, dtype=float)
    k = m.shape[0] // 3
    if k < 3:
        raise ValueError("spectral initialization needs K >= 3")
    w, v = _top_eigenpairs(m, 4)
    if w[2] - w[3] < GAP_RATIO * abs(w[0]):
        warnings.warn(
            f"small spectral gap: lambda3={w[2]:.3e}, lambda4={w[3]:.3e}",
            SpectralGapWarning,
            stacklevel=2,
        )
    blocks = np.sqrt(k) * v[:, :3].reshape(k, 3, 3)
    rows = blocks[:, :2, :]
    u, _, vt = np.linalg.svd(rows, full_matrices=False)
    rows = u @ vt
    full = np.concatenate([rows, np.cross(rows[:, 0], rows[:, 1])[:, None, :]], axis=1)
    return np.swapaxes(project_so3(full), 1, 2)
