"""Primitives on SO(3) and on stacks of rotations.

A single rotation is a ``(3, 3)`` array and a rotation set is a ``(K, 3, 3)``
array. Every function here broadcasts over leading axes, so the same call
works on one block or on a whole stack.
"""

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

from .errors import DegenerateFactorization, RankDeficient

MANIFOLD_TOL = 1e-10
RANK_TOL = 1e-12


def skew(a):
    """Skew-symmetric part ``(a - a^T) / 2`` of the trailing 3x3 matrices."""
    return 0.5 * (a - np.swapaxes(a, -1, -2))


def project_tangent(base, b):
    """Project ``b`` onto the tangent space of SO(3) at ``base``.

    Computes ``base (base^T b - b^T base) / 2``; the result ``v`` satisfies
    ``base^T v`` skew-symmetric.

    Args:
        base: rotation(s), shape ``(..., 3, 3)``.
        b: ambient matrix (or matrices) of the same shape.

    Returns:
        Tangent vector(s) at ``base``.
    """
    base = np.asarray(base, dtype=float)
    b = np.asarray(b, dtype=float)
    btb = np.swapaxes(base, -1, -2) @ b
    return base @ skew(btb)


def qr_retract(base, v, scale=1.0):
    """QR retraction ``Qr(base + scale * v)`` landing in SO(3).

    The Q factor is normalized so that the triangular factor has a
    nonnegative diagonal; if the result is a reflection its last column is
    negated.

    Raises:
        DegenerateFactorization: ``base + scale * v`` is rank deficient.
    """
    base = np.asarray(base, dtype=float)
    if scale == 0:
        return base.copy()
    a = base + scale * np.asarray(v, dtype=float)
    q, r = np.linalg.qr(a)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    size = np.max(np.abs(a), axis=(-2, -1), keepdims=False)
    if np.any(np.abs(diag) <= RANK_TOL * np.maximum(size, 1.0)[..., None]):
        raise DegenerateFactorization("retraction argument is rank deficient")
    q = q * np.sign(diag)[..., None, :]
    det = np.linalg.det(q)
    q[..., :, 2] *= np.sign(det)[..., None]
    # Qr(R) = R on SO(3); keep such blocks bitwise so fixed points stay fixed.
    still = ~np.any(a != base, axis=(-2, -1))
    return np.where(still[..., None, None], base, q)


def project_so3(a):
    """Nearest rotation in Frobenius norm, ``U diag(1, 1, det(U V^T)) V^T``.

    Raises:
        RankDeficient: the smallest singular value is below ``1e-12``.
    """
    a = np.asarray(a, dtype=float)
    u, s, vt = np.linalg.svd(a)
    if np.any(s[..., -1] < RANK_TOL):
        raise RankDeficient("cannot project a rank-deficient matrix onto SO(3)")
    d = np.sign(np.linalg.det(u @ vt))
    u = u.copy()
    u[..., :, 2] *= d[..., None]
    return u @ vt


def sample_uniform_so3(k, seed=None):
    """Draw ``k`` Haar-uniform rotations, deterministic given ``seed``.

    Unit quaternions are obtained by normalizing 4D standard Gaussians.
    """
    if k < 1:
        raise ValueError("k must be positive")
    rng = np.random.default_rng(seed)
    quat = rng.standard_normal((k, 4))
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    return _ScipyRotation.from_quat(quat).as_matrix()


def orthogonality_error(r):
    """Frobenius norm of ``R^T R - I`` for each block."""
    r = np.asarray(r, dtype=float)
    gram = np.swapaxes(r, -1, -2) @ r
    return np.linalg.norm(gram - np.eye(3), axis=(-2, -1))


def is_rotation(r, tol=MANIFOLD_TOL):
    """True when every block is orthogonal with determinant +1 within ``tol``."""
    r = np.asarray(r, dtype=float)
    if r.shape[-2:] != (3, 3):
        return False
    return bool(
        np.all(orthogonality_error(r) <= tol)
        and np.all(np.abs(np.linalg.det(r) - 1.0) <= tol)
    )


def as_rotation_set(r):
    """Validate and return a ``(K, 3, 3)`` float array of rotations."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 3 or r.shape[1:] != (3, 3) or r.shape[0] < 1:
        raise ValueError(f"expected a (K, 3, 3) rotation stack, got {r.shape}")
    if not is_rotation(r):
        raise ValueError("rotation set contains a matrix outside SO(3)")
    return r
