"""Synthetic common lines: exact geometry, angular quantization, corruption."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegeneratePair
from .so3 import sample_uniform_so3

DEGENERATE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CommonLineSet:
    """All pairwise common lines for ``k`` views.

    Pairs are stored in ``np.triu_indices(k, 1)`` order. ``c_ij[p]`` is the
    line of pair ``p`` in the local frame of view ``i[p]`` and ``c_ji[p]``
    the same line seen from view ``j[p]``. Lines are in-plane unit vectors
    ``(cos a, sin a, 0)``.

    ``n_theta`` is the number of angular bins per full circle, or ``None``
    for exact (unquantized) lines. Quantized sets carry the integer bin
    indices in ``bins``, shape ``(P, 2)``.
    """

    k: int
    n_theta: int | None
    c_ij: np.ndarray
    c_ji: np.ndarray
    bins: np.ndarray | None = field(default=None)

    def __post_init__(self):
        n_pairs = self.k * (self.k - 1) // 2
        if self.c_ij.shape != (n_pairs, 3) or self.c_ji.shape != (n_pairs, 3):
            raise ValueError("line arrays must have shape (K(K-1)/2, 3)")
        if (self.n_theta is None) != (self.bins is None):
            raise ValueError("bins must be given exactly when n_theta is set")

    @property
    def n_pairs(self):
        return len(self.c_ij)

    @cached_property
    def pair_index(self):
        """``(i, j)`` index arrays of every pair, ``i < j``."""
        return np.triu_indices(self.k, 1)

    @cached_property
    def dense(self):
        """In-plane coordinates as a ``(K, K, 2)`` array.

        ``dense[i, j]`` holds the line of pair ``{i, j}`` in view ``i``'s
        frame; the diagonal is zero.
        """
        i, j = self.pair_index
        out = np.zeros((self.k, self.k, 2))
        out[i, j] = self.c_ij[:, :2]
        out[j, i] = self.c_ji[:, :2]
        return out

    @classmethod
    def from_bins(cls, k, n_theta, bins):
        bins = np.asarray(bins, dtype=np.int64).reshape(-1, 2)
        if np.any(bins < 0) or np.any(bins >= n_theta):
            raise ValueError(f"angle bins must lie in [0, {n_theta})")
        return cls(
            k=k,
            n_theta=n_theta,
            c_ij=bin_to_line(bins[:, 0], n_theta),
            c_ji=bin_to_line(bins[:, 1], n_theta),
            bins=bins,
        )

    def with_lines(self, c_ij, c_ji, bins=None):
        return CommonLineSet(self.k, self.n_theta, c_ij, c_ji, bins)


def bin_to_line(bins, n_theta):
    angle = 2 * np.pi * np.asarray(bins) / n_theta
    return np.stack([np.cos(angle), np.sin(angle), np.zeros_like(angle)], axis=-1)


def angle_to_line(angle):
    angle = np.asarray(angle, dtype=float)
    return np.stack([np.cos(angle), np.sin(angle), np.zeros_like(angle)], axis=-1)


def quantize_angles(angle, n_theta):
    """Nearest bin index of each polar angle on a grid of ``n_theta`` bins."""
    return np.mod(np.rint(np.asarray(angle) * n_theta / (2 * np.pi)), n_theta).astype(np.int64)


def true_common_lines(truth, n_theta=None):
    """Common lines induced by ``truth``, optionally quantized.

    For views ``i < j`` the 3D line direction ``q`` is the normalized cross
    product of the two viewing directions (third columns). Its local
    coordinates ``R_i^T q`` and ``R_j^T q`` lie in the image plane; the sign
    of ``q`` is chosen so that the polar angle of ``c_ij`` lies in
    ``[0, pi)``.

    Args:
        truth: rotations, shape ``(K, 3, 3)``, ``K >= 2``.
        n_theta: angular bins per full circle; ``None`` keeps exact lines.

    Raises:
        DegeneratePair: two viewing directions are parallel.
    """
    truth = np.asarray(truth, dtype=float)
    k = len(truth)
    if k < 2:
        raise ValueError("need at least two views")
    i, j = np.triu_indices(k, 1)
    views = truth[:, :, 2]
    q = np.cross(views[i], views[j])
    norm = np.linalg.norm(q, axis=1)
    bad = np.flatnonzero(norm < DEGENERATE_TOL)
    if bad.size:
        raise DegeneratePair(int(i[bad[0]]), int(j[bad[0]]))
    q /= norm[:, None]

    local_i = np.einsum("pba,pb->pa", truth[i], q)
    local_j = np.einsum("pba,pb->pa", truth[j], q)
    # q and -q describe the same line. Fix the sign in view i's own frame
    # (polar angle of c_ij in [0, pi)) so the result depends only on the
    # relative rotations, not on the global frame.
    flip = (local_i[:, 1] < 0) | ((local_i[:, 1] == 0) & (local_i[:, 0] < 0))
    local_i[flip] *= -1
    local_j[flip] *= -1
    ang_i = np.arctan2(local_i[:, 1], local_i[:, 0])
    ang_j = np.arctan2(local_j[:, 1], local_j[:, 0])
    if n_theta is None:
        return CommonLineSet(k, None, angle_to_line(ang_i), angle_to_line(ang_j))
    bins = np.stack([quantize_angles(ang_i, n_theta), quantize_angles(ang_j, n_theta)], axis=1)
    return CommonLineSet.from_bins(k, n_theta, bins)


def corrupt(lines, p, seed=None):
    """Replace each pair by a uniform random pair with probability ``1 - p``.

    The random stream is consumed in a fixed order independent of ``p``:
    ``P`` uniforms deciding which pairs are kept (kept when ``u < p``),
    then ``2P`` replacement angles. Quantized sets draw replacements on
    their own grid; exact sets draw continuous angles.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("detection rate p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = lines.n_pairs
    keep = rng.random(n) < p
    if lines.n_theta is None:
        angles = rng.uniform(0.0, 2 * np.pi, size=(n, 2))
        c_ij = np.where(keep[:, None], lines.c_ij, angle_to_line(angles[:, 0]))
        c_ji = np.where(keep[:, None], lines.c_ji, angle_to_line(angles[:, 1]))
        return lines.with_lines(c_ij, c_ji)
    draws = rng.integers(0, lines.n_theta, size=(n, 2))
    bins = np.where(keep[:, None], lines.bins, draws)
    return CommonLineSet.from_bins(lines.k, lines.n_theta, bins)


def simulate_instance(k, n_theta=360, seed=None, p=1.0, max_retries=10):
    """Uniform truth, its quantized common lines and a corrupted copy.

    The truth is drawn first from one generator, which then drives the
    corruption, so for a fixed ``seed`` the truth and the keep decisions do
    not depend on ``p``. A rotation set with a degenerate pair is redrawn
    (at most ``max_retries`` times), which has probability zero under Haar
    sampling.

    Returns:
        ``(truth, clean, corrupted)``.
    """
    rng = np.random.default_rng(seed)
    for attempt in range(max_retries + 1):
        truth = sample_uniform_so3(k, rng)
        try:
            clean = true_common_lines(truth, n_theta)
        except DegeneratePair:
            if attempt == max_retries:
                raise
            continue
        return truth, clean, corrupt(clean, p, rng)
