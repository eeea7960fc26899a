"""Dense real matrix kernel.

Cyclic-Jacobi symmetric eigensolver, LU solve with partial pivoting plus a
1-norm condition estimate, and a Cholesky-based semidefiniteness probe.
Problem sizes in this package are desk scale (<= ~60), so the kernel is
written for auditability rather than LAPACK-grade speed: it is the
independent path used to re-check anything a solver claims.

All operations are pure; inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import constants


class DimensionError(ValueError):
    """Shapes do not conform."""


class SingularMatrixError(ValueError):
    """Singular or numerically singular input; carries the condition estimate."""

    def __init__(self, message: str, condition: float = np.inf):
        super().__init__(message)
        self.condition = condition


def as_matrix(a, rows: int | None = None, cols: int | None = None,
              name: str = "matrix") -> np.ndarray:
    """Validate and return a 2-D float array with finite entries."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    if rows is not None and arr.shape[0] != rows:
        raise DimensionError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    return arr


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def require_symmetric(M, name: str = "matrix") -> np.ndarray:
    """Check symmetry up to SYMMETRY_RTOL and return the symmetrized matrix."""
    A = as_matrix(M, name=name)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got {A.shape}")
    scale = max(1.0, float(np.linalg.norm(A, "fro")))
    if float(np.linalg.norm(A - A.T, "fro")) > constants.SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric within tolerance")
    return symmetrize(A)


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition of a symmetric matrix.

    eigenvalues are ascending; eigenvectors are the columns of an
    orthogonal matrix, ordered to match.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(M) -> SymEig:
    """Eigendecomposition by cyclic Jacobi rotations.

    Deterministic for a fixed input: sweeps run in row order until the
    off-diagonal Frobenius norm falls below JACOBI_OFF_TOL relative to the
    input norm, or JACOBI_MAX_SWEEPS is reached.
    """
    A = require_symmetric(M)
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return SymEig(A[0].copy(), V)
    norm = float(np.linalg.norm(A, "fro"))
    tol = constants.JACOBI_OFF_TOL * max(norm, np.finfo(float).tiny)
    rot_tol = tol / n
    for _ in range(constants.JACOBI_MAX_SWEEPS):
        off = np.linalg.norm(A - np.diag(np.diag(A)), "fro")
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= rot_tol:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(apq) < 1e-300 * abs(diff):
                    continue
                if diff == 0.0:
                    t = 1.0
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                    if t == 0.0:
                        continue
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return SymEig(w[order], V[:, order])


def lambda_extremes(M) -> tuple[float, float]:
    """(smallest, largest) eigenvalue of a symmetric matrix."""
    w = sym_eig(M).eigenvalues
    return float(w[0]), float(w[-1])


def _lu_factor(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """LU with partial pivoting; returns packed LU and the row permutation p
    such that A[p] = L @ U."""
    n = A.shape[0]
    LU = A.copy()
    perm = np.arange(n)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(LU[k:, k])))
        if LU[piv, k] == 0.0:
            raise SingularMatrixError("matrix is exactly singular", np.inf)
        if piv != k:
            LU[[k, piv], :] = LU[[piv, k], :]
            perm[[k, piv]] = perm[[piv, k]]
        LU[k + 1:, k] /= LU[k, k]
        LU[k + 1:, k + 1:] -= np.outer(LU[k + 1:, k], LU[k, k + 1:])
    return LU, perm


def _lu_solve(LU: np.ndarray, perm: np.ndarray, B: np.ndarray,
              trans: bool = False) -> np.ndarray:
    n = LU.shape[0]
    if not trans:
        X = B[perm].astype(float, copy=True)
        for k in range(1, n):            # forward: L y = P b
            X[k] -= LU[k, :k] @ X[:k]
        for k in range(n - 1, -1, -1):   # backward: U x = y
            X[k] -= LU[k, k + 1:] @ X[k + 1:]
            X[k] /= LU[k, k]
        return X
    # A' z = c  with  A = P' L U:  solve U' y = c, L' w = y, z[perm] = w
    Y = B.astype(float, copy=True)
    for k in range(n):                   # U' lower triangular
        Y[k] -= LU[:k, k] @ Y[:k]
        Y[k] /= LU[k, k]
    for k in range(n - 1, -1, -1):       # L' upper triangular, unit diagonal
        Y[k] -= LU[k + 1:, k] @ Y[k + 1:]
    Z = np.empty_like(Y)
    Z[perm] = Y
    return Z


def _inv_norm1_estimate(LU: np.ndarray, perm: np.ndarray) -> float:
    """Hager-style lower estimate of ||A^{-1}||_1 using the LU factors."""
    n = LU.shape[0]
    x = np.full((n, 1), 1.0 / n)
    est = 0.0
    for _ in range(5):
        y = _lu_solve(LU, perm, x)
        est = float(np.abs(y).sum())
        xi = np.where(y >= 0.0, 1.0, -1.0)
        z = _lu_solve(LU, perm, xi, trans=True)
        j = int(np.argmax(np.abs(z)))
        if float(np.abs(z[j, 0])) <= float(z[:, 0] @ x[:, 0]):
            break
        x = np.zeros((n, 1))
        x[j] = 1.0
    # alternating probe guards against adversarial cancellation
    probe = np.array([(-1.0) ** i * (1.0 + i / max(n - 1, 1)) for i in range(n)])
    y = _lu_solve(LU, perm, probe.reshape(-1, 1))
    alt = 2.0 * float(np.abs(y).sum()) / (3.0 * n)
    return max(est, alt)


def condition_estimate(A) -> float:
    """1-norm condition estimate of a square matrix."""
    M = as_matrix(A, name="A")
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"A must be square, got {M.shape}")
    try:
        LU, perm = _lu_factor(M)
    except SingularMatrixError:
        return np.inf
    norm1 = float(np.abs(M).sum(axis=0).max())
    return norm1 * _inv_norm1_estimate(LU, perm)


def solve(A, B) -> np.ndarray:
    """Solve A X = B by LU with partial pivoting.

    Raises SingularMatrixError when the 1-norm condition estimate exceeds
    CONDITION_LIMIT.  A 1-D right-hand side comes back 1-D.
    """
    M = as_matrix(A, name="A")
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"A must be square, got {M.shape}")
    rhs = np.asarray(B, dtype=float)
    vector = rhs.ndim == 1
    R = as_matrix(rhs, rows=M.shape[0], name="B")
    LU, perm = _lu_factor(M)
    norm1 = float(np.abs(M).sum(axis=0).max())
    cond = norm1 * _inv_norm1_estimate(LU, perm)
    if not np.isfinite(cond) or cond > constants.CONDITION_LIMIT:
        raise SingularMatrixError(
            f"matrix is numerically singular (condition estimate {cond:.3e})",
            cond)
    X = _lu_solve(LU, perm, R)
    return X[:, 0] if vector else X


def chol_psd_check(M, shift: float = 0.0) -> bool:
    """True iff Cholesky of M + shift*I succeeds with all pivots > 0."""
    A = require_symmetric(M) + shift * np.eye(np.asarray(M).shape[0])
    n = A.shape[0]
    L = np.zeros_like(A)
    for k in range(n):
        d = A[k, k] - L[k, :k] @ L[k, :k]
        if d <= 0.0:
            return False
        L[k, k] = np.sqrt(d)
        if k + 1 < n:
            L[k + 1:, k] = (A[k + 1:, k] - L[k + 1:, :k] @ L[k, :k]) / L[k, k]
    return True
