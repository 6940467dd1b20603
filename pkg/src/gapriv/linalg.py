"""Dense linear-algebra kernel: pseudoinverse, least-squares residuals, norms.

Everything the linear privatizer computes reduces to these three functions.
Matrices with zero columns (or rows) are legal inputs throughout.
"""

import numpy as np

from ._validation import as_matrix, as_vector


class NumericError(ArithmeticError):
    """Raised when a decomposition fails to converge."""


def pinv(M, rank_tol=None):
    """Moore-Penrose pseudoinverse via the thin SVD.

    Singular values ``<= rank_tol`` are treated as zero. The default
    tolerance is ``eps * max(rows, cols) * sigma_max``.
    """
    M = as_matrix(M, "M")
    rows, cols = M.shape
    if rank_tol is not None and rank_tol < 0:
        raise ValueError("rank_tol must be non-negative")
    if rows == 0 or cols == 0:
        return np.zeros((cols, rows))
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge for {rows}x{cols} matrix") from exc
    if rank_tol is None:
        rank_tol = np.finfo(np.float64).eps * max(rows, cols) * (s[0] if s.size else 0.0)
    keep = s > rank_tol
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def residual(X, y):
    """Component of y orthogonal to the column space of X.

    Returns ``(res, norm)`` with ``res = y - X X^+ y`` and ``norm = ||res||_2``.
    """
    X = as_matrix(X)
    y = as_vector(y)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has length {y.shape[0]}")
    if X.shape[1] == 0:
        res = y.copy()
    else:
        res = y - X @ (pinv(X) @ y)
    return res, float(np.linalg.norm(res))


def frob_sq(M):
    """Sum of squared entries."""
    M = np.asarray(M, dtype=np.float64)
    return float(np.sum(M * M))
