"""Proper orthogonal decomposition by the method of snapshots.

All bases are orthonormal with respect to a Gram operator ``C = M + eta*A0``
(the H1 inner product for ``eta = 1/kappa0``). The snapshot method
eigendecomposes ``S^T C S`` instead of forming the square root of ``C``;
modes are recovered as ``theta_n = S psi_n / sigma_n``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import sym_eig

#: modes with sigma below this times sigma_1 are always dropped (rank guard)
DEGENERATE_RTOL = 1e-12


class GramOperator:
    """Sparse SPD Gram matrix defining the working inner product."""

    def __init__(self, matrix):
        self.matrix = matrix

    @classmethod
    def from_model(cls, model, eta=None):
        """H1-type Gram matrix ``M + eta*A0``; default ``eta = 1/kappa0``."""
        if eta is None:
            eta = 1.0 / model.kappa0
        return cls(model.mass + eta * model.stiffness)

    def apply(self, u):
        return self.matrix @ u

    def inner(self, u, v):
        return float(u @ (self.matrix @ v))

    def norm(self, u):
        return float(np.sqrt(max(self.inner(u, u), 0.0)))


@dataclass
class RBasis:
    """Reduced basis: columns of ``vectors`` are C-orthonormal fields.

    ``sigmas`` records the singular value attached to each retained mode in
    append order; ``trunc_sigma`` is the largest singular value truncated
    when the basis was initialized (None if nothing was truncated).
    """

    vectors: np.ndarray  # (n_dofs, N)
    sigmas: np.ndarray   # (N,)
    trunc_sigma: Optional[float] = None

    @property
    def size(self):
        return self.vectors.shape[1]

    @classmethod
    def empty(cls, n_dofs):
        return cls(np.zeros((n_dofs, 0)), np.zeros(0), None)


def _as_snapshot_matrix(snapshots):
    """Snapshots (rows) -> column matrix S of shape (n_dofs, R)."""
    arr = np.asarray(snapshots, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("snapshot set must be a nonempty 2D collection")
    return arr.T


def pod(snapshots, eps_pod, gram, mode="relative"):
    """Extract the dominant C-orthonormal modes of a snapshot set.

    Parameters
    ----------
    snapshots : array-like, shape (R, n_dofs)
        One snapshot per row.
    eps_pod : float
        Threshold on the singular values: modes with
        ``sigma_n >= eps_pod * sigma_1`` (relative mode) or
        ``sigma_n >= eps_pod`` (absolute mode) are retained.
    gram : GramOperator
    mode : {"relative", "absolute"}

    Returns
    -------
    (RBasis, ndarray)
        The basis and the full singular-value list (before truncation).
        The basis may be empty if every sigma falls below the threshold.
    """
    if eps_pod <= 0:
        raise ValueError("eps_pod must be positive")
    if mode not in ("relative", "absolute"):
        raise ValueError(f"unknown POD mode {mode!r}")
    s_mat = _as_snapshot_matrix(snapshots)
    corr = s_mat.T @ gram.apply(s_mat)
    corr = 0.5 * (corr + corr.T)
    eigvals, psi = sym_eig(corr)
    sigmas = np.sqrt(np.clip(eigvals, 0.0, None))

    if sigmas[0] <= 0.0:
        return RBasis.empty(s_mat.shape[0]), sigmas
    valid = sigmas > DEGENERATE_RTOL * sigmas[0]
    threshold = eps_pod * sigmas[0] if mode == "relative" else eps_pod
    keep = valid & (sigmas >= threshold)
    n_keep = int(keep.sum())

    truncated = sigmas[~keep]
    trunc_sigma = float(truncated.max()) if truncated.size else None

    if n_keep == 0:
        basis = RBasis.empty(s_mat.shape[0])
        basis.trunc_sigma = trunc_sigma
        return basis, sigmas
    vectors = (s_mat @ psi[:, :n_keep]) / sigmas[:n_keep]
    # the snapshot method squares the condition number, so trailing modes
    # drift from C-orthonormality; two Gram-Schmidt passes restore it while
    # keeping the span inside span(S)
    _gram_schmidt_inplace(vectors, gram)
    return RBasis(vectors, sigmas[:n_keep].copy(), trunc_sigma), sigmas


def _gram_schmidt_inplace(vectors, gram):
    """Orthonormalize columns in order w.r.t. the Gram inner product."""
    for j in range(vectors.shape[1]):
        v = vectors[:, j]
        for _ in range(2):
            if j:
                prev = vectors[:, :j]
                v -= prev @ (prev.T @ gram.apply(v))
        nrm = gram.norm(v)
        if nrm > 0.0:
            v /= nrm
        vectors[:, j] = v


def project(basis, gram, u):
    """C-orthogonal projection onto the basis span.

    Returns
    -------
    (coefficients, residual)
        ``u = basis @ coefficients + residual`` with the residual
        C-orthogonal to every basis vector.
    """
    u = np.asarray(u, dtype=float)
    if basis.size == 0:
        return np.zeros(0), u.copy()
    coeffs = basis.vectors.T @ gram.apply(u)
    return coeffs, u - basis.vectors @ coeffs


def _reorthonormalize(old_vectors, candidates, gram, drop_tol=1e-8):
    """Two-pass Gram-Schmidt of candidate columns against old + kept ones."""
    kept = []
    for j in range(candidates.shape[1]):
        v = candidates[:, j].copy()
        for _ in range(2):
            if old_vectors.shape[1]:
                v -= old_vectors @ (old_vectors.T @ gram.apply(v))
            for w in kept:
                v -= w * gram.inner(w, v)
        nrm = gram.norm(v)
        if nrm > drop_tol:
            kept.append(v / nrm)
    return kept


def update_rb(basis, new_snapshots, eps_pod, gram):
    """Enrich the basis with the POD modes of the projection residuals.

    An empty snapshot set leaves the basis unchanged, as does a snapshot
    set already contained in the basis span. The threshold is absolute.
    """
    snaps = np.asarray(new_snapshots, dtype=float) if new_snapshots is not None else None
    if snaps is None or snaps.size == 0:
        return basis
    if snaps.ndim == 1:
        snaps = snaps[None, :]
    if basis.size:
        s_mat = snaps.T
        coeffs = basis.vectors.T @ gram.apply(s_mat)
        residuals = (s_mat - basis.vectors @ coeffs).T
    else:
        residuals = snaps
    sub_basis, _ = pod(residuals, eps_pod, gram, mode="absolute")
    if sub_basis.size == 0:
        return basis
    new_cols = _reorthonormalize(basis.vectors, sub_basis.vectors, gram)
    if not new_cols:
        return basis
    vectors = np.column_stack([basis.vectors] + new_cols)
    sigmas = np.concatenate([basis.sigmas, sub_basis.sigmas[: len(new_cols)]])
    return RBasis(vectors, sigmas, basis.trunc_sigma)


def progressive_basis_threshold(basis, eps_pod):
    """Absolute threshold for the progressive updates after initialization.

    The greatest singular value truncated by the initial POD, falling back
    to ``eps_pod * sigma_1`` when nothing was truncated.
    """
    if basis.trunc_sigma is not None:
        return basis.trunc_sigma
    if basis.size:
        return eps_pod * float(basis.sigmas[0])
    return eps_pod


def progressive_rb(trajectories, eps_pod, gram):
    """Progressive reduced basis over an ordered list of trajectories.

    The first trajectory is compressed with the relative threshold; every
    later trajectory enriches the basis through :func:`update_rb` with the
    absolute threshold from :func:`progressive_basis_threshold`.
    """
    if not trajectories:
        raise ValueError("at least one trajectory is required")
    basis, _ = pod(trajectories[0].fields, eps_pod, gram, mode="relative")
    abs_eps = progressive_basis_threshold(basis, eps_pod)
    for traj in trajectories[1:]:
        basis = update_rb(basis, traj.fields, abs_eps, gram)
    return basis
