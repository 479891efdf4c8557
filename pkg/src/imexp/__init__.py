"""Implicit-exponential (IMEXP) time integrators for stiff semilinear
systems u' = Lu + N(t, u), with Krylov phi-function machinery and a
benchmark harness."""

from .integrators import (BlowUpError, IntegratorConfig, IntegratorKind,
                          RunStats, integrate)
from .krylov import (ConvergenceError, GmresConfig, ICFactor, KrylovConfig,
                     KrylovOutcome, LinearOperator, arnoldi, gmres_solve,
                     ichol_zero_fill, phi_times_vector)
from .phi_kernels import phi_linear_combination, phi_matrix, phi_scalar
from .problems import (SplitSystem, jv_consistency_check, make_allen_cahn,
                       make_schnakenberg, make_semilinear_parabolic)
from .sparse_ops import (GridSpec, SparseMatrix, build_laplacian_1d_dirichlet,
                         build_laplacian_2d, max_norm, shift_identity, spmv)

__version__ = "0.1.0"
