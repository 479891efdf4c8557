"""Dense evaluation of the exponential-like functions phi_k.

phi_0(z) = e^z and, for k >= 1,

    phi_k(z) = integral_0^1 e^((1-theta) z) theta^(k-1)/(k-1)! dtheta,

equivalently phi_k(z) = (phi_{k-1}(z) - 1/(k-1)!)/z with phi_k(0) = 1/k!.

Matrix arguments are handled through an augmented block matrix whose
exponential (scaling-and-squaring Pade, scipy.linalg.expm) contains the
phi functions, so singular matrices need no special casing.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm

MAX_ORDER = 4
DENSE_CAP = 400

# Below this the upward recurrence cancels catastrophically; the Taylor
# series converges in ~20 terms there.
_TAYLOR_SWITCH = 0.5
_TAYLOR_TERMS = 30


def phi_scalar(k: int, z: float) -> float:
    """phi_k(z) for real z, accurate through the small-z regime."""
    if not 0 <= k <= MAX_ORDER:
        raise ValueError(f"phi order must be in [0, {MAX_ORDER}], got {k}")
    if k == 0:
        return math.exp(z)
    if abs(z) < _TAYLOR_SWITCH:
        # sum_{j>=0} z^j / (j+k)!
        acc = 0.0
        term = 1.0 / math.factorial(k)
        for j in range(_TAYLOR_TERMS):
            acc += term
            term *= z / (j + k + 1)
            if abs(term) <= 1e-18 * abs(acc):
                break
        return acc
    val = math.exp(z)
    for j in range(1, k + 1):
        val = (val - 1.0 / math.factorial(j - 1)) / z
    return val


def _check_small(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    if M.shape[0] > DENSE_CAP:
        raise ValueError(f"dense phi evaluation capped at n={DENSE_CAP}, "
                         f"got n={M.shape[0]}")
    return M


def phi_matrix(k: int, M: np.ndarray) -> np.ndarray:
    """phi_k(M) for a small dense matrix M.

    Uses exp of the (k+1)n x (k+1)n block matrix with M in the top-left
    corner and identities on the block superdiagonal; the top-right block
    is phi_k(M).
    """
    if not 0 <= k <= MAX_ORDER:
        raise ValueError(f"phi order must be in [0, {MAX_ORDER}], got {k}")
    M = _check_small(M)
    n = M.shape[0]
    if k == 0:
        return expm(M)
    dim = (k + 1) * n
    aug = np.zeros((dim, dim))
    aug[:n, :n] = M
    for b in range(k):
        s = b * n
        aug[s:s + n, s + n:s + 2 * n] = np.eye(n)
    return expm(aug)[:n, k * n:(k + 1) * n]


def phi_linear_combination(M: np.ndarray, bs) -> np.ndarray:
    """sum_{j=0}^{k} phi_j(M) b_j through a single augmented exponential.

    bs is the sequence (b_0, ..., b_k); entries may be None for zero terms.
    """
    M = _check_small(M)
    n = M.shape[0]
    k = len(bs) - 1
    if k > MAX_ORDER:
        raise ValueError(f"at most {MAX_ORDER + 1} terms supported")
    vecs = []
    for b in bs:
        v = np.zeros(n) if b is None else np.asarray(b, dtype=np.float64)
        if v.shape != (n,):
            raise ValueError("vector length mismatch")
        vecs.append(v)
    if k == 0:
        return expm(M) @ vecs[0]
    # Augmented operator [[M, W], [0, J]]: W holds b_k..b_1 by column and J
    # is the k x k nilpotent shift; exp applied to [b_0; e_k] yields the sum.
    dim = n + k
    aug = np.zeros((dim, dim))
    aug[:n, :n] = M
    for j in range(1, k + 1):
        aug[:n, n + k - j] = vecs[j]
    for i in range(k - 1):
        aug[n + i, n + i + 1] = 1.0
    z = np.zeros(dim)
    z[:n] = vecs[0]
    z[-1] = 1.0
    return (expm(aug) @ z)[:n]
