"""Dense complex linear algebra: pivoted solves, numerical rank and null spaces."""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import SingularMatrixError

DEFAULT_RANK_TOL = 1e-8


def solve_linear(A, b, max_condition: float = 1e14) -> np.ndarray:
    """Solve ``A x = b`` by LU with partial pivoting.

    Raises SingularMatrixError when the estimated 1-norm condition number
    exceeds ``max_condition`` or a pivot is exactly zero.
    """
    A = np.asarray(A, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"solve_linear needs a square matrix, got shape {A.shape}")
    anorm = np.linalg.norm(A, 1)
    if anorm == 0:
        raise SingularMatrixError("zero matrix", float("inf"))
    lu, piv, info = scipy.linalg.lapack.zgetrf(A)
    if info > 0:
        raise SingularMatrixError(f"exact zero pivot at position {info}", float("inf"))
    rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
    cond = 1.0 / rcond if rcond > 0 else float("inf")
    if cond > max_condition:
        raise SingularMatrixError(f"matrix is singular to working precision (cond ~ {cond:.3g})", cond)
    x, info = scipy.linalg.lapack.zgetrs(lu, piv, b)
    return x


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(np.asarray(A, dtype=np.complex128), compute_uv=False)


def numerical_rank(A, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above ``rel_tol * sigma_1``; zero for the zero matrix."""
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    s = singular_values(A)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def null_space(A, rel_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the numerical null space, one vector per column."""
    A = np.asarray(A, dtype=np.complex128)
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    n = A.shape[1]
    if A.size == 0:
        return np.eye(n, dtype=np.complex128)
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    if s[0] == 0:
        return np.eye(n, dtype=np.complex128)
    rank = int(np.count_nonzero(s > rel_tol * s[0]))
    return vh[rank:].conj().T
