"""Small dense symmetric positive definite solves with a one-shot ridge."""

from __future__ import annotations

import numpy as np
from scipy import linalg

__all__ = ["SpdSolveError", "solve_spd"]


class SpdSolveError(np.linalg.LinAlgError):
    """Cholesky failed even after ridge regularization."""


def solve_spd(A, b, return_flag: bool = False):
    """Solve ``A x = b`` for symmetric positive definite ``A`` via Cholesky.

    On factorization failure a ridge ``1e-8 * tr(A)/dim`` is added once and
    the result is flagged.  With ``return_flag=True`` returns ``(x, ridged)``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be a square matrix")
    if not np.allclose(A, A.T, rtol=1e-8, atol=1e-10):
        raise ValueError("A must be symmetric")
    ridged = False
    try:
        c, low = linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError:
        ridge = 1e-8 * np.trace(A) / A.shape[0]
        if ridge <= 0:
            ridge = 1e-8
        ridged = True
        try:
            c, low = linalg.cho_factor(A + ridge * np.eye(A.shape[0]), lower=True)
        except np.linalg.LinAlgError as exc:
            raise SpdSolveError("matrix is not positive definite even after ridge") from exc
    x = linalg.cho_solve((c, low), b)
    if return_flag:
        return x, ridged
    return x
