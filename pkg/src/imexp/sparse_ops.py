"""Sparse CSR kernels and finite-difference Laplacian builders.

Matrices are stored in canonical CSR form (sorted, deduplicated column
indices within each row).  The builders cover the three boundary-condition
regimes used by the model problems: homogeneous Dirichlet (interior
unknowns only), periodic (wrap-around indexing), and homogeneous Neumann
(mirror ghost nodes, symmetrized so constants lie exactly in the kernel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

BC_DIRICHLET = "dirichlet_homogeneous"
BC_PERIODIC = "periodic"
BC_NEUMANN = "neumann_homogeneous"


class _MatvecTally:
    """Module-wide matrix-vector product counter."""

    def __init__(self) -> None:
        self.count = 0

    def reset(self) -> None:
        self.count = 0


matvec_tally = _MatvecTally()


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid: node-centered for Dirichlet/Neumann, cell-style
    wrap indexing for periodic (no duplicated boundary node)."""

    dim: int
    points_per_axis: int
    lower: float
    upper: float
    bc: str

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.bc not in (BC_DIRICHLET, BC_PERIODIC, BC_NEUMANN):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.upper <= self.lower:
            raise ValueError("upper bound must exceed lower bound")

    @property
    def spacing(self) -> float:
        length = self.upper - self.lower
        if self.bc == BC_PERIODIC:
            return length / self.points_per_axis
        return length / (self.points_per_axis - 1)


class SparseMatrix:
    """Compressed sparse row matrix in canonical form."""

    def __init__(self, n_rows, n_cols, row_ptr, col_idx, vals):
        row_ptr = np.asarray(row_ptr, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if row_ptr.shape != (n_rows + 1,):
            raise ValueError("row_ptr must have length n_rows+1")
        if row_ptr[0] != 0 or row_ptr[-1] != len(col_idx) or len(col_idx) != len(vals):
            raise ValueError("inconsistent CSR index arrays")
        if np.any(np.diff(row_ptr) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        for i in range(n_rows):
            cols = col_idx[row_ptr[i]:row_ptr[i + 1]]
            if cols.size and (np.any(np.diff(cols) <= 0)
                              or cols[0] < 0 or cols[-1] >= n_cols):
                raise ValueError(f"row {i} not in canonical form")
        if not np.all(np.isfinite(vals)):
            raise ValueError("matrix values must be finite")
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.row_ptr = row_ptr
        self.col_idx = col_idx
        self.vals = vals
        self._scipy = sp.csr_matrix((vals, col_idx, row_ptr), shape=(n_rows, n_cols))

    @classmethod
    def from_scipy(cls, S) -> "SparseMatrix":
        S = sp.csr_matrix(S)
        S.sum_duplicates()
        S.sort_indices()
        return cls(S.shape[0], S.shape[1], S.indptr, S.indices, S.data)

    def to_scipy(self) -> sp.csr_matrix:
        return self._scipy

    def to_dense(self) -> np.ndarray:
        return self._scipy.toarray()

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.vals)


def spmv(A: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """y = A x.  Every call increments the module matvec tally."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise ValueError(f"dimension mismatch: matrix has {A.n_cols} columns, "
                         f"vector has length {x.shape}")
    matvec_tally.count += 1
    return A.to_scipy().dot(x)


def axpy(a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if x.shape != y.shape:
        raise ValueError("axpy length mismatch")
    return a * x + y


def scale(a: float, x: np.ndarray) -> np.ndarray:
    return a * x


def dot(x: np.ndarray, y: np.ndarray) -> float:
    if x.shape != y.shape:
        raise ValueError("dot length mismatch")
    return float(np.dot(x, y))


def max_norm(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x)))


def build_laplacian_1d_dirichlet(g: GridSpec) -> SparseMatrix:
    """Second-order (1,-2,1)/h^2 stencil over the interior nodes.

    Boundary values are identically zero and eliminated, so the matrix acts
    on points_per_axis - 2 unknowns and is symmetric negative definite.
    """
    if g.dim != 1 or g.bc != BC_DIRICHLET:
        raise ValueError("grid must be 1D with homogeneous Dirichlet bc")
    if g.points_per_axis < 3:
        raise ValueError("need at least 3 grid points")
    n = g.points_per_axis - 2
    h = g.spacing
    T = sp.diags_array([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)],
                       offsets=[-1, 0, 1]) * (1.0 / h**2)
    return SparseMatrix.from_scipy(T)


def _neumann_1d(n: int, h: float) -> sp.csr_matrix:
    # Symmetrized mirror-ghost stencil: boundary diagonal -1 instead of -2,
    # which keeps the matrix symmetric with zero row sums.
    d = -2.0 * np.ones(n)
    d[0] = d[-1] = -1.0
    T = sp.diags_array([np.ones(n - 1), d, np.ones(n - 1)], offsets=[-1, 0, 1])
    # scale by a single precomputed factor so every entry is an exact
    # multiple of it and row sums cancel to exactly zero
    return sp.csr_matrix(T * (1.0 / h**2))


def _periodic_1d(n: int, h: float) -> sp.csr_matrix:
    T = sp.diags_array([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)],
                       offsets=[-1, 0, 1]).tolil()
    T[0, n - 1] += 1.0
    T[n - 1, 0] += 1.0
    return sp.csr_matrix(T) * (1.0 / h**2)


def build_laplacian_2d(g: GridSpec) -> SparseMatrix:
    """5-point Laplacian on a square grid, periodic or homogeneous Neumann."""
    if g.dim != 2 or g.bc not in (BC_PERIODIC, BC_NEUMANN):
        raise ValueError("grid must be 2D with periodic or Neumann bc")
    if g.points_per_axis < 3:
        raise ValueError("need at least 3 grid points per axis")
    n = g.points_per_axis
    h = g.spacing
    T = _periodic_1d(n, h) if g.bc == BC_PERIODIC else _neumann_1d(n, h)
    eye = sp.identity(n, format="csr")
    A = sp.kron(eye, T, format="csr") + sp.kron(T, eye, format="csr")
    return SparseMatrix.from_scipy(A)


def shift_identity(A: SparseMatrix, alpha: float) -> SparseMatrix:
    """I - alpha*A, with the diagonal stored explicitly in every row."""
    if A.n_rows != A.n_cols:
        raise ValueError("shift_identity requires a square matrix")
    S = sp.identity(A.n_rows, format="csr") - alpha * A.to_scipy()
    return SparseMatrix.from_scipy(S)


def save_matrix_market(A: SparseMatrix, path) -> None:
    scipy.io.mmwrite(path, A.to_scipy().tocoo())


def load_matrix_market(path) -> SparseMatrix:
    return SparseMatrix.from_scipy(scipy.io.mmread(path))
