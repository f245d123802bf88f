"""Rotation synchronization from common lines by Riemannian subgradient methods."""

from .commonlines import CommonLineSet, corrupt, simulate_instance, true_common_lines
from .diagnostics import EvalReport, ThetaParams, estimate_theta, register, singular_profile
from .errors import (
    CryoSyncError,
    DegenerateFactorization,
    DegeneratePair,
    DimensionMismatch,
    EigenFailure,
    InvalidConfig,
    RankDeficient,
    SpectralGapWarning,
)
from .lud import euclid_subgrad_block, objective_lud, objective_ls, resync_step
from .so3 import project_so3, project_tangent, qr_retract, sample_uniform_so3
from .solver import IterationTrace, SolverConfig, solve, solve_norm_constrained
from .spectral import build_sync_matrix, spectral_initialize

__version__ = "0.1.0"
