"""Dense and sparse linear-algebra kernels used by every solver stage."""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import solve_triangular

from .errors import NumericalError


def require_symmetric(a, rtol=1e-12):
    """Raise ValueError unless the dense matrix is symmetric to ``rtol``."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a - a.T).max(initial=0.0) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    return a


def sym_eig(a, rtol=1e-12):
    """Eigendecomposition of a symmetric dense matrix.

    Returns
    -------
    (eigenvalues, eigenvectors)
        Eigenvalues sorted descending; eigenvectors orthonormal, one per
        column, matching the eigenvalue order.
    """
    a = require_symmetric(a, rtol=rtol)
    vals, vecs = np.linalg.eigh(a)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def forward_substitution(l_mat, b):
    """Solve ``L y = b`` for a unit lower-triangular ``L``.

    ``b`` may be a vector or a matrix of stacked right-hand-side columns.
    """
    l_mat = np.asarray(l_mat, dtype=float)
    b = np.asarray(b, dtype=float)
    if l_mat.ndim != 2 or l_mat.shape[0] != l_mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {l_mat.shape}")
    if b.shape[0] != l_mat.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix {l_mat.shape}, rhs {b.shape}"
        )
    if l_mat.shape[0] == 0:
        return b.copy()
    return solve_triangular(l_mat, b, lower=True, unit_diagonal=True)


class SpdFactor:
    """Prefactorized direct solver for a sparse SPD matrix.

    The factorization is computed once and reused; solves are deterministic.
    """

    def __init__(self, matrix):
        matrix = sp.csr_matrix(matrix)
        self.matrix = matrix
        try:
            self._lu = spla.splu(matrix.tocsc())
        except RuntimeError as exc:  # singular factorization
            raise NumericalError(f"factorization failed: {exc}") from exc

    def solve(self, b, tol=1e-12):
        """Solve to relative residual ``tol``; one refinement pass allowed."""
        b = np.asarray(b, dtype=float)
        x = self._lu.solve(b)
        norm_b = np.linalg.norm(b)
        if norm_b == 0.0:
            return x
        residual = b - self.matrix @ x
        if np.linalg.norm(residual) > tol * norm_b:
            x = x + self._lu.solve(residual)
            residual = b - self.matrix @ x
            if np.linalg.norm(residual) > tol * norm_b:
                raise NumericalError(
                    "SPD solve did not reach the requested tolerance "
                    f"({np.linalg.norm(residual) / norm_b:.3e} > {tol:.3e})"
                )
        return x


def solve_spd(matrix, b, tol=1e-12):
    """One-shot SPD solve; see :class:`SpdFactor` for the reusable form."""
    return SpdFactor(matrix).solve(b, tol=tol)
