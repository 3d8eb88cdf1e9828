"""Dense linear algebra for the square-root Kalman filter.

Covariances are carried as upper-triangular factors U with Sigma = U^T U.
The factorizer accepts positive SEMI-definite matrices (zero pivots are
allowed, within tolerance), since deterministic transitions produce
singular predicted covariances. Matrices here are tiny (d <= a few tens),
so plain loops are fine.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import CholeskyError

# Pivot tolerance, relative to the largest diagonal entry.
PIVOT_RTOL = 1e-12


def cholesky_factorize(S):
    """Upper-triangular U with U^T U = S, for symmetric PSD S.

    Raises CholeskyError (naming the pivot index) if a pivot falls below
    -tol, i.e. the matrix is indefinite beyond tolerance.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError("cholesky_factorize needs a square matrix")
    tol = PIVOT_RTOL * max(1.0, float(np.max(np.abs(np.diag(S)))) if n else 1.0)
    U = np.zeros((n, n))
    for i in range(n):
        pivot = S[i, i] - U[:i, i] @ U[:i, i]
        if pivot < -tol:
            raise CholeskyError(f"matrix is not positive semi-definite at pivot {i}", index=i)
        if pivot <= tol:
            # semi-definite direction: the whole row must vanish
            rest = S[i, i + 1 :] - U[:i, i] @ U[:i, i + 1 :]
            if np.any(np.abs(rest) > np.sqrt(tol) * max(1.0, np.max(np.abs(S)))):
                raise CholeskyError(
                    f"matrix is not positive semi-definite at pivot {i}", index=i
                )
            continue
        U[i, i] = np.sqrt(pivot)
        U[i, i + 1 :] = (S[i, i + 1 :] - U[:i, i] @ U[:i, i + 1 :]) / U[i, i]
    return U


def cholesky_downdate(U, K):
    """U' with U'^T U' = U^T U - K^T K, as a sequence of rank-1 downdates.

    K is (m, n): each row is removed in turn. Raises CholeskyError when the
    downdate would break positive definiteness (filter divergence).
    """
    U = np.array(U, dtype=float, copy=True)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    n = U.shape[0]
    scale = max(1.0, float(np.max(np.abs(np.diag(U)))) if n else 1.0)
    tol = PIVOT_RTOL * scale * scale
    for row in K:
        z = np.array(row, dtype=float)
        for i in range(n):
            if z[i] == 0.0:
                continue
            d = U[i, i]
            r2 = d * d - z[i] * z[i]
            if r2 <= tol:
                raise CholeskyError(f"downdate broke positive definiteness at index {i}", index=i)
            r = np.sqrt(r2)
            c = r / d
            s = z[i] / d
            U[i, i] = r
            if i + 1 < n:
                U[i, i + 1 :] = (U[i, i + 1 :] - s * z[i + 1 :]) / c
                z[i + 1 :] = c * z[i + 1 :] - s * U[i, i + 1 :]
    return U


def triangular_solve(U, B, trans=False, side="left"):
    """Solve with an upper-triangular U: op(U) X = B or X op(U) = B.

    op(U) is U^T when trans is true. Plumbing for the V^-1, V^-T and
    U^-1 applications in the filter recursions.
    """
    U = np.asarray(U, dtype=float)
    B = np.asarray(B, dtype=float)
    if np.any(np.diag(U) == 0.0):
        raise CholeskyError("triangular solve with singular factor")
    if side == "left":
        return solve_triangular(U, B, trans=1 if trans else 0, lower=False)
    if side == "right":
        # X op(U) = B  <=>  op(U)^T X^T = B^T
        XT = solve_triangular(U, B.T, trans=0 if trans else 1, lower=False)
        return XT.T
    raise ValueError(f"unknown side {side!r}")


@dataclass
class GaussianState:
    """Mean vector and upper-triangular square root of the covariance."""

    mean: np.ndarray
    sqrt_cov: np.ndarray  # Sigma = sqrt_cov^T sqrt_cov

    @property
    def dim(self):
        return self.mean.shape[0]

    def cov(self):
        return self.sqrt_cov.T @ self.sqrt_cov

    def sample(self, rng, size=None):
        if size is None:
            z = rng.standard_normal(self.dim)
            return self.mean + self.sqrt_cov.T @ z
        z = rng.standard_normal((size, self.dim))
        return self.mean[None, :] + z @ self.sqrt_cov

    def copy(self):
        return GaussianState(self.mean.copy(), self.sqrt_cov.copy())
