"""Exception and warning types raised across the package."""


class CryoSyncError(Exception):
    """Base class for all package errors."""


class DegenerateFactorization(CryoSyncError):
    """The retraction argument is rank deficient (step size is pathological)."""


class RankDeficient(CryoSyncError):
    """A matrix that must be projected onto SO(3) has (numerically) lost rank."""


class DegeneratePair(CryoSyncError):
    """Two views share a viewing direction, so their common line is undefined."""

    def __init__(self, i, j):
        super().__init__(f"views {i} and {j} have parallel viewing directions")
        self.i = i
        self.j = j


class DimensionMismatch(CryoSyncError, ValueError):
    """Rotation set and common-line set (or two rotation sets) disagree on K."""


class InvalidConfig(CryoSyncError, ValueError):
    """Solver or benchmark configuration violates its invariants."""


class EigenFailure(CryoSyncError):
    """The symmetric eigensolver did not converge."""


class SpectralGapWarning(UserWarning):
    """Third and fourth eigenvalues are too close for a reliable initialization."""
