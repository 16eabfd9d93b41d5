"""Reduced operators and the online time march.

Offline, every operator is Galerkin-projected onto the reduced basis; the
nonlinearity enters through the EIM matrices ``C_j`` assembled with the same
one-point quadrature as the high-fidelity operator. Online, a step touches
only N- and M-sized arrays plus a fixed table of basis values (or gradients)
at the magic points.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .eim import eim_evaluate
from .errors import NumericalError
from .fem import Trajectory, assemble_nonlinear_vector, gamma_field
from .linalg import forward_substitution
from .mesh import element_gradients
from .pod import GramOperator
from .util import float_repr


@dataclass
class ReducedTrajectory:
    """Reduced coefficient history: coefficients[k] solves time node k."""

    parameter: float
    coefficients: np.ndarray  # (K+1, N)


@dataclass
class ReducedModel:
    """Everything the online stage needs, independent of the mesh size.

    ``theta_table`` holds basis values at the magic points for solution
    nonlinearities (shape (M, N)) and basis gradients at the owner elements
    for gradient nonlinearities (shape (M, N, 2)).
    """

    mass_r: np.ndarray          # (N, N)
    stiff_r: np.ndarray         # (N, N)
    loads_r: np.ndarray         # (K, N), row k-1 is Theta^T l^k
    u0_r: np.ndarray            # (N,)
    c_mats: np.ndarray          # (M, N, N)
    b_matrix: np.ndarray        # (M, M) unit lower triangular
    points: np.ndarray          # (M,) grid indices
    theta_table: np.ndarray
    times: np.ndarray           # (K+1,)
    gamma_kind: str
    gamma: object               # Nonlinearity, vectorized
    basis: Optional[object] = None    # RBasis; None for archive-only models
    eim: Optional[object] = None      # EimApprox; None for archive-only models

    @property
    def n_reduced(self):
        return self.mass_r.shape[0]

    @property
    def rank(self):
        return self.points.size

    @property
    def n_steps(self):
        return self.times.size - 1


def _basis_element_gradients(mesh, vectors):
    """Per-triangle gradients of every basis column, shape (n_tri, N, 2)."""
    theta_tri = vectors[mesh.triangles]  # (n_tri, 3, N)
    return np.einsum("tid,tin->tnd", mesh.shape_gradients, theta_tri)


def _theta_table(model, basis, eim):
    grid = model.grid
    if model.gamma.kind == "solution":
        if grid.mode == "nodes":
            return basis.vectors[grid.owner[eim.points], :]
        tri = model.mesh.triangles[grid.owner[eim.points]]
        return basis.vectors[tri].mean(axis=1)
    grads = _basis_element_gradients(model.mesh, basis.vectors)
    return grads[grid.owner[eim.points]]  # (M, N, 2)


def reduce_operators(basis, model, eim, gram=None):
    """Galerkin-project the operators of ``model`` onto ``basis``.

    The EIM matrices ``C_j`` use the same centroid quadrature as
    :func:`preim.fem.assemble_nonlinear_vector`, with nodes-grid fields
    averaged over the element vertices.
    """
    if basis.size == 0:
        raise ValueError("cannot reduce onto an empty basis")
    if eim.rank == 0:
        raise ValueError("EIM rank must be at least 1")
    if gram is None:
        gram = GramOperator.from_model(model)
    theta = basis.vectors
    mass_r = theta.T @ (model.mass @ theta)
    stiff_r = theta.T @ (model.stiffness @ theta)
    mass_r = 0.5 * (mass_r + mass_r.T)
    stiff_r = 0.5 * (stiff_r + stiff_r.T)
    loads_r = np.stack([
        theta.T @ model.load_vector(k)
        for k in range(1, model.n_steps + 1)
    ])
    u0_r = theta.T @ gram.apply(model.u0)

    mesh = model.mesh
    grads = _basis_element_gradients(mesh, theta)  # (n_tri, N, 2)
    gx, gy = grads[:, :, 0], grads[:, :, 1]
    c_mats = np.empty((eim.rank, basis.size, basis.size))
    for j in range(eim.rank):
        if model.grid.mode == "centroids":
            q_tri = eim.q_funcs[:, j]
        else:
            q_tri = eim.q_funcs[mesh.triangles, j].mean(axis=1)
        w = mesh.triangle_areas * q_tri
        c_j = gx.T @ (w[:, None] * gx) + gy.T @ (w[:, None] * gy)
        c_mats[j] = 0.5 * (c_j + c_j.T)

    return ReducedModel(
        mass_r=mass_r,
        stiff_r=stiff_r,
        loads_r=loads_r,
        u0_r=u0_r,
        c_mats=c_mats,
        b_matrix=eim.b_matrix.copy(),
        points=eim.points.copy(),
        theta_table=_theta_table(model, basis, eim),
        times=model.times.copy(),
        gamma_kind=model.gamma.kind,
        gamma=model.gamma,
        basis=basis,
        eim=eim,
    )


def _point_states(rom, coeffs):
    """Reconstruct the nonlinearity state at the magic points only."""
    if rom.gamma_kind == "solution":
        return rom.theta_table @ coeffs
    return np.einsum("mnd,n->md", rom.theta_table, coeffs)


def online_solve(rom, mu):
    """Run the reduced time march for one parameter value.

    Per step: evaluate gamma at the M magic points from the reconstructed
    reduced state, forward-substitute for the EIM coefficients, form the
    rank-M operator combination and solve the dense N-dimensional system.
    """
    n_steps = rom.n_steps
    coeffs = np.empty((n_steps + 1, rom.n_reduced))
    coeffs[0] = rom.u0_r
    steps = np.diff(rom.times)
    factors = {}
    for dt in sorted(set(steps.tolist())):
        try:
            factors[dt] = cho_factor(rom.mass_r + dt * rom.stiff_r)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"reduced system not SPD: {exc}") from exc
    for k in range(1, n_steps + 1):
        dt = steps[k - 1]
        prev = coeffs[k - 1]
        gamma_hat = rom.gamma(mu, _point_states(rom, prev))
        phi = forward_substitution(rom.b_matrix, gamma_hat)
        d_mat = np.tensordot(phi, rom.c_mats, axes=1)
        rhs = dt * rom.loads_r[k - 1] + (rom.mass_r - dt * d_mat) @ prev
        coeffs[k] = cho_solve(factors[dt], rhs)
    return ReducedTrajectory(parameter=float(mu), coefficients=coeffs)


def reconstruct(basis, reduced_trajectory):
    """Expand reduced coefficients into nodal fields."""
    coeffs = reduced_trajectory.coefficients
    if coeffs.shape[1] != basis.size:
        raise ValueError("coefficient width does not match the basis size")
    return Trajectory(
        parameter=reduced_trajectory.parameter,
        fields=coeffs @ basis.vectors.T,
    )


def galerkin_solve(basis, model, mu, eim=None):
    """Reference reduced march with the nonlinear term assembled exactly.

    Debug-grade: reconstructs the full state each step and projects the true
    nonlinear vector (or, if ``eim`` is given, the EIM reconstruction of the
    gamma field over the whole grid). Used to validate the online stage; not
    part of the mesh-independent online path.
    """
    theta = basis.vectors
    mass_r = theta.T @ (model.mass @ theta)
    stiff_r = theta.T @ (model.stiffness @ theta)
    gram = GramOperator.from_model(model)
    coeffs = np.empty((model.n_steps + 1, basis.size))
    coeffs[0] = theta.T @ gram.apply(model.u0)
    for k in range(1, model.n_steps + 1):
        dt = model.steps[k - 1]
        u_full = theta @ coeffs[k - 1]
        g = gamma_field(model, mu, u_full)
        if eim is not None:
            g = eim_evaluate(eim, forward_substitution(
                eim.b_matrix, g[eim.points]))
        b_nl = theta.T @ assemble_nonlinear_vector(model, u_full, g)
        rhs = dt * (theta.T @ model.load_vector(k))
        rhs += mass_r @ coeffs[k - 1] - dt * b_nl
        coeffs[k] = np.linalg.solve(mass_r + dt * stiff_r, rhs)
    return ReducedTrajectory(parameter=float(mu), coefficients=coeffs)


def save_reduced_trajectory_csv(reduced_trajectory, path):
    """Rows = time nodes, columns = reduced coefficients."""
    with open(path, "w", newline="\n") as fh:
        for row in reduced_trajectory.coefficients:
            fh.write(",".join(float_repr(v) for v in row))
            fh.write("\n")
