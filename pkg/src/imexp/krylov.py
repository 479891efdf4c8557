"""Iterative machinery: Arnoldi, adaptive Krylov phi-function/vector
products, restarted GMRES, and zero-fill incomplete Cholesky.

phi_times_vector evaluates phi_k(tau*A)v for a large sparse or matrix-free
operator by running an exponential Krylov iteration on the standard
augmented operator (A extended by a nilpotent block carrying v), growing
the basis until a generalized-residual estimate passes and splitting tau
into substeps whenever the basis cap is reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import spsolve_triangular

from .sparse_ops import SparseMatrix


class ConvergenceError(RuntimeError):
    """Iteration failed; carries the best iterate and statistics."""

    def __init__(self, message, best=None, residual=None, stats=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.stats = stats


class FactorizationError(RuntimeError):
    pass


class LinearOperator:
    """Square linear action v -> Av, sparse-backed or matrix-free."""

    def __init__(self, n: int, apply, counter=None):
        self.n = n
        self._apply = apply
        self.counter = counter  # mutable [count] cell, optional
        self.nmv = 0

    @classmethod
    def from_sparse(cls, A: SparseMatrix, counter=None) -> "LinearOperator":
        if A.n_rows != A.n_cols:
            raise ValueError("operator must be square")
        S = A.to_scipy()
        return cls(A.n_rows, S.dot, counter=counter)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        self.nmv += 1
        if self.counter is not None:
            self.counter[0] += 1
        return self._apply(v)


@dataclass
class KrylovConfig:
    tol: float = 1e-12
    max_basis: int = 100
    max_substeps: int = 64

    def __post_init__(self):
        if self.tol <= 0 or self.max_basis < 2:
            raise ValueError("need tol > 0 and max_basis >= 2")


@dataclass
class KrylovOutcome:
    """total_matvecs is sum(basis_sizes) plus one norm-estimation probe."""

    result: np.ndarray
    basis_sizes: list = field(default_factory=list)
    total_matvecs: int = 0
    converged: bool = False


@dataclass
class GmresConfig:
    tol: float = 1e-12
    restart: int = 10
    max_iters: int = 500
    preconditioner: object = None

    def __post_init__(self):
        if self.tol <= 0 or self.restart < 1:
            raise ValueError("need tol > 0 and restart >= 1")


_BREAKDOWN = 1e-14


def arnoldi(A: LinearOperator, v: np.ndarray, m: int):
    """Modified Gram-Schmidt Arnoldi with one re-orthogonalization pass.

    Returns (V, H, breakdown) with V of shape (n, j+1) and H of shape
    (j+1, j) for the j <= m steps completed.  breakdown=True means an exact
    invariant subspace was found and the last column of H has zero
    subdiagonal.
    """
    beta = np.linalg.norm(v)
    if beta == 0:
        raise ValueError("Arnoldi starting vector must be nonzero")
    n = A.n
    V = np.zeros((n, m + 1))
    H = np.zeros((m + 1, m))
    V[:, 0] = v / beta
    scale = beta
    for j in range(m):
        w = A(V[:, j])
        for _ in range(2):  # MGS + one re-orthogonalization pass
            for i in range(j + 1):
                c = V[:, i] @ w
                H[i, j] += c
                w -= c * V[:, i]
        h = np.linalg.norm(w)
        H[j + 1, j] = h
        scale = max(scale, np.abs(H[:j + 2, j]).max())
        if h <= _BREAKDOWN * scale:
            H[j + 1, j] = 0.0
            return V[:, :j + 2], H[:j + 2, :j + 1], True
        V[:, j + 1] = w / h
    return V, H, False


def _expmv(A_apply, n, w, tol, max_basis):
    """e^A w by Arnoldi projection, growing the basis until the
    generalized-residual estimate drops below tol (absolute, 2-norm).

    Returns (result, basis_size, converged); A_apply must count its own
    matvecs if accounting is needed.
    """
    beta = np.linalg.norm(w)
    if beta == 0:
        return w.copy(), 0, True
    V = np.zeros((n, max_basis + 1))
    H = np.zeros((max_basis + 1, max_basis))
    V[:, 0] = w / beta
    best = None
    for j in range(max_basis):
        p = A_apply(V[:, j])
        for _ in range(2):  # classical Gram-Schmidt with a second pass
            c = V[:, :j + 1].T @ p
            H[:j + 1, j] += c
            p -= V[:, :j + 1] @ c
        h = np.linalg.norm(p)
        H[j + 1, j] = h
        m = j + 1
        breakdown = h <= _BREAKDOWN * max(1.0, np.abs(H[:m, :m]).max())
        # The small exponential is the dominant cost per iteration, so the
        # estimate is only evaluated on a thinning schedule once m grows.
        if not (breakdown or m == max_basis or m <= 10 or m % 5 == 0):
            V[:, j + 1] = p / h
            continue
        # exp of H augmented by one column gives e^H and phi_1(H) e1 at once;
        # the phi_1 entry drives the generalized-residual estimate, which
        # stays sharp for strongly dissipative spectra where |e^H e1| decays.
        aug = np.zeros((m + 1, m + 1))
        aug[:m, :m] = H[:m, :m]
        aug[0, m] = 1.0
        Eaug = expm(aug)
        best = beta * (V[:, :m] @ Eaug[:m, 0])
        if breakdown:
            return best, m, True  # lucky breakdown: exact in this subspace
        err = beta * h * (abs(Eaug[m - 1, m]) + abs(Eaug[m - 1, 0]))
        if err <= tol:
            return best, m, True
        V[:, j + 1] = p / h
    return best, max_basis, False


def phi_times_vector(A: LinearOperator, k: int, v: np.ndarray, tau: float,
                     cfg: KrylovConfig = KrylovConfig()) -> KrylovOutcome:
    """phi_k(tau*A) v with adaptive basis growth and tau-substepping."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (A.n,):
        raise ValueError("vector length does not match operator dimension")
    n = A.n
    vnorm = np.linalg.norm(v)
    if vnorm == 0:
        return KrylovOutcome(result=np.zeros(n), converged=True)

    if k == 0:
        aug_n = n
        def aug_apply(x):
            return tau * A(x)
        z0 = v
    else:
        # Augmented operator [[tau*A, W], [0, J]] with W = [v, 0, .., 0] and
        # J the k x k nilpotent shift: exp applied to [0; e_k] has
        # phi_k(tau*A) v in its top block.
        aug_n = n + k
        def aug_apply(x):
            top = tau * A(x[:n])
            top += x[n] * v
            out = np.empty(aug_n)
            out[:n] = top
            out[n:-1] = x[n + 1:]
            out[-1] = 0.0
            return out
        z0 = np.zeros(aug_n)
        z0[-1] = 1.0

    outcome = KrylovOutcome(result=np.zeros(n))
    # Probe the augmented operator norm to seed the substep length; a basis
    # of max_basis vectors handles a per-substep norm of roughly
    # (max_basis/3)^2 for dissipative spectra.
    probe = np.empty(aug_n)
    probe[:n] = v / vnorm
    if k > 0:
        probe[n:] = 1.0 / np.sqrt(k)
    rho = np.linalg.norm(aug_apply(probe))
    outcome.total_matvecs += 1
    cap = max(1.0, (cfg.max_basis / 3.0) ** 2)
    dt = 1.0 if rho <= cap else max(cap / rho, 1.0 / cfg.max_substeps)
    dt_min = 1.0 / cfg.max_substeps
    tol_abs = cfg.tol * max(vnorm, 1.0)

    # Advance w = exp(dt * Aug) w over a partition of [0, 1], halving the
    # failing substep only and growing dt back after easy ones.
    w = z0.copy()
    remaining = 1.0
    while remaining > 1e-14:
        step = min(dt, remaining)
        res, m, conv = _expmv(lambda x: step * aug_apply(x), aug_n, w,
                              tol_abs * step, cfg.max_basis)
        outcome.basis_sizes.append(m)
        outcome.total_matvecs += m
        if conv:
            w = res
            remaining -= step
            if m <= 0.4 * cfg.max_basis:
                dt = min(1.0, 2.0 * dt)
        else:
            if dt <= dt_min:
                outcome.result = res[:n]
                raise ConvergenceError(
                    "phi_times_vector stalled below the substep floor "
                    f"1/{cfg.max_substeps}", best=outcome.result, stats=outcome)
            dt = max(dt / 2.0, dt_min)
    outcome.result = w[:n]
    outcome.converged = True
    return outcome


@dataclass
class ICFactor:
    """Zero-fill incomplete Cholesky factor: A ~ L L^T on A's pattern."""

    lower: SparseMatrix

    def __post_init__(self):
        L = self.lower.to_scipy()
        self._L = L.tocsr()
        self._LT = L.T.tocsr()


def ichol_zero_fill(A: SparseMatrix) -> ICFactor:
    """IC(0): Cholesky restricted to the lower-triangle sparsity of A.

    Requires a symmetric matrix with positive diagonal; raises
    FactorizationError on a nonpositive pivot.
    """
    if A.n_rows != A.n_cols:
        raise ValueError("ichol requires a square matrix")
    n = A.n_rows
    indptr, indices, data = A.row_ptr, A.col_idx, A.vals
    rows = [dict() for _ in range(n)]
    for i in range(n):
        for idx in range(indptr[i], indptr[i + 1]):
            j = int(indices[idx])
            if j > i:
                continue
            a = data[idx]
            ri = rows[i]
            if j == i:
                s = a - sum(val * val for col, val in ri.items())
                if s <= 0.0:
                    raise FactorizationError(
                        f"nonpositive pivot {s:.3e} at row {i}")
                ri[i] = np.sqrt(s)
            else:
                s = a
                for col, val in rows[j].items():
                    if col < j and col in ri:
                        s -= ri[col] * val
                ri[j] = s / rows[j][j]
    ptr = np.zeros(n + 1, dtype=np.int64)
    cols, vals = [], []
    for i in range(n):
        items = sorted(rows[i].items())
        ptr[i + 1] = ptr[i] + len(items)
        cols.extend(c for c, _ in items)
        vals.extend(v for _, v in items)
    lower = SparseMatrix(n, n, ptr, np.array(cols, dtype=np.int64),
                         np.array(vals))
    return ICFactor(lower=lower)


def apply_preconditioner(f: ICFactor, r: np.ndarray) -> np.ndarray:
    """Solve L L^T z = r by forward then backward substitution."""
    if r.shape != (f.lower.n_rows,):
        raise ValueError("preconditioner dimension mismatch")
    y = spsolve_triangular(f._L, r, lower=True)
    return spsolve_triangular(f._LT, y, lower=False)


def gmres_solve(A: LinearOperator, b: np.ndarray, x0=None,
                cfg: GmresConfig = GmresConfig()):
    """Restarted GMRES with optional left IC preconditioning.

    Convergence is declared on the true residual ||b - Ax|| <= tol*||b||.
    Returns (x, iterations, converged); raises ConvergenceError (carrying
    the best iterate and final residual) on stagnation or max_iters.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.n,):
        raise ValueError("right-hand side length mismatch")
    M = cfg.preconditioner
    prec = (lambda r: apply_preconditioner(M, r)) if M is not None else (lambda r: r)

    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(A.n), 0, True
    x = np.zeros(A.n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    total_iters = 0
    target = cfg.tol * bnorm
    prev_res = np.inf
    while True:
        r = b - A(x)
        res = np.linalg.norm(r)
        if res <= target:
            return x, total_iters, True
        if total_iters >= cfg.max_iters:
            raise ConvergenceError(
                f"GMRES reached max_iters={cfg.max_iters}, residual {res:.3e}",
                best=x, residual=res)
        if res >= prev_res * (1 - 1e-14):
            raise ConvergenceError(
                f"GMRES stagnated at residual {res:.3e}", best=x, residual=res)
        prev_res = res

        z = prec(r)
        beta = np.linalg.norm(z)
        m = min(cfg.restart, cfg.max_iters - total_iters)
        V = np.zeros((A.n, m + 1))
        H = np.zeros((m + 1, m))
        V[:, 0] = z / beta
        g = np.zeros(m + 1)
        g[0] = beta
        cs = np.zeros(m)
        sn = np.zeros(m)
        k_done = 0
        for j in range(m):
            w = prec(A(V[:, j]))
            total_iters += 1
            for _ in range(2):  # classical Gram-Schmidt with a second pass
                c = V[:, :j + 1].T @ w
                H[:j + 1, j] += c
                w -= V[:, :j + 1] @ c
            hnorm = np.linalg.norm(w)
            H[j + 1, j] = hnorm
            # apply accumulated Givens rotations, then form a new one
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            k_done = j + 1
            if abs(g[j + 1]) <= 0.1 * cfg.tol * beta or hnorm <= _BREAKDOWN * beta:
                break
            V[:, j + 1] = w / hnorm
        y = np.linalg.solve(np.triu(H[:k_done, :k_done]), g[:k_done])
        x = x + V[:, :k_done] @ y
