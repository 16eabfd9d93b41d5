"""High-fidelity model: P1 assembly and the semi-implicit Euler march.

The scheme treats diffusion implicitly and the state-dependent conductivity
explicitly, so every time step is a single SPD solve with a constant matrix
``M + dt*A0`` (factored once per distinct step size).
"""

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError
from .linalg import SpdFactor
from .mesh import element_gradients
from .util import float_repr

#: local P1 mass block, to be scaled by area/12
_MASS_BLOCK = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])


@dataclass(frozen=True)
class Nonlinearity:
    """State-dependent conductivity contribution.

    ``kind`` selects the state fed to ``func``: "solution" passes point
    values of u, "gradient" passes an (n, 2) array of P1 gradients. ``func``
    must be vectorized over the state array and return one value per point.
    """

    kind: str
    func: Callable

    def __post_init__(self):
        if self.kind not in ("solution", "gradient"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")

    def __call__(self, mu, state):
        out = np.asarray(self.func(mu, state), dtype=float)
        if not np.all(np.isfinite(out)):
            raise NumericalError("nonlinearity produced non-finite values")
        return out


@dataclass
class Trajectory:
    """All time slices of one solve: fields[k] is u at time node k."""

    parameter: float
    fields: np.ndarray  # (K+1, n_nodes)

    @property
    def n_steps(self):
        return self.fields.shape[0] - 1


def assemble_mass(mesh):
    """Exact P1 mass matrix (CSR, SPD)."""
    n_tri = mesh.n_triangles
    local = mesh.triangle_areas[:, None, None] / 12.0 * _MASS_BLOCK
    rows = np.repeat(mesh.triangles, 3, axis=1).reshape(n_tri, 3, 3)
    cols = np.tile(mesh.triangles, 3).reshape(n_tri, 3, 3)
    mat = sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())),
        shape=(mesh.n_nodes, mesh.n_nodes),
    ).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_stiffness(mesh, kappa0):
    """Exact P1 stiffness matrix scaled by ``kappa0`` (CSR, symmetric PSD)."""
    if kappa0 <= 0:
        raise ValueError(f"kappa0 must be positive, got {kappa0}")
    grads = mesh.shape_gradients  # (n_tri, 3, 2)
    local = kappa0 * mesh.triangle_areas[:, None, None] * np.einsum(
        "tid,tjd->tij", grads, grads
    )
    n_tri = mesh.n_triangles
    rows = np.repeat(mesh.triangles, 3, axis=1).reshape(n_tri, 3, 3)
    cols = np.tile(mesh.triangles, 3).reshape(n_tri, 3, 3)
    mat = sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())),
        shape=(mesh.n_nodes, mesh.n_nodes),
    ).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_load(mesh, f_nodal, phi_e, mass=None):
    """Load vector for one time node: volume source plus boundary flux.

    The source term uses exact P1 x P1 integration (mass matrix times the
    nodal source); the boundary term integrates the constant flux exactly,
    splitting ``phi_e * edge_length`` evenly between the edge endpoints.
    """
    load = np.zeros(mesh.n_nodes)
    if f_nodal is not None:
        f_nodal = np.asarray(f_nodal, dtype=float)
        if f_nodal.shape != (mesh.n_nodes,):
            raise ValueError("source field length does not match the mesh")
        if mass is None:
            mass = assemble_mass(mesh)
        load += mass @ f_nodal
    if phi_e != 0.0:
        half = 0.5 * phi_e * mesh.boundary_lengths
        np.add.at(load, mesh.boundary_edges[:, 0], half)
        np.add.at(load, mesh.boundary_edges[:, 1], half)
    return load


class HFModel:
    """Complete high-fidelity problem description plus cached operators.

    Parameters
    ----------
    mesh : Mesh
    grid : EvalGrid
        Evaluation grid for the nonlinearity (nodes or centroids mode).
    kappa0 : float
        Base conductivity (normalized units).
    gamma : Nonlinearity
    u0 : ndarray, shape (n_nodes,)
        Initial field.
    times : ndarray, shape (K+1,)
        Strictly increasing time nodes starting at the initial time.
    phi_e : float or ndarray (K+1,), optional
        Boundary flux per time node (constant if scalar).
    source : ndarray (K+1, n_nodes), optional
        Volume source per time node; ``None`` means zero.

    Notes
    -----
    The gradient nonlinearity requires the centroid grid: P1 gradients are
    element-wise constant, so nodal sampling has no canonical meaning.
    """

    def __init__(self, mesh, grid, kappa0, gamma, u0, times,
                 phi_e=0.0, source=None):
        u0 = np.asarray(u0, dtype=float)
        times = np.asarray(times, dtype=float)
        if u0.shape != (mesh.n_nodes,):
            raise ValueError("u0 length does not match the mesh")
        if times.ndim != 1 or times.size < 2:
            raise ValueError("times must contain at least two nodes")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise ValueError("time nodes must be strictly increasing")
        if gamma.kind == "gradient" and grid.mode != "centroids":
            raise ValueError(
                "gradient nonlinearities require the centroid grid"
            )
        self.mesh = mesh
        self.grid = grid
        self.kappa0 = float(kappa0)
        self.gamma = gamma
        self.u0 = u0
        self.times = times
        self.steps = steps
        self.phi_e = np.broadcast_to(
            np.asarray(phi_e, dtype=float), times.shape
        ).copy()
        if source is not None:
            source = np.asarray(source, dtype=float)
            if source.shape != (times.size, mesh.n_nodes):
                raise ValueError("source must be shaped (K+1, n_nodes)")
        self.source = source

        self.mass = assemble_mass(mesh)
        self.stiffness = assemble_stiffness(mesh, self.kappa0)
        self._boundary_unit = assemble_load(mesh, None, 1.0)
        self._factors = {
            dt: SpdFactor(self.mass + dt * self.stiffness)
            for dt in sorted(set(self.steps.tolist()))
        }

    @property
    def n_nodes(self):
        return self.mesh.n_nodes

    @property
    def n_steps(self):
        return self.times.size - 1

    def system_factor(self, dt):
        return self._factors[dt]

    def load_vector(self, k):
        """l^k: volume source plus boundary flux at time node ``k``."""
        load = self.phi_e[k] * self._boundary_unit
        if self.source is not None:
            load = load + self.mass @ self.source[k]
        return load


def _values_on_triangles(mesh, grid, values):
    """Per-triangle value of a grid field (owner value or vertex average)."""
    if grid.mode == "centroids":
        return values
    return values[mesh.triangles].mean(axis=1)


def gamma_field(model, mu, u):
    """Sample the nonlinearity of state ``u`` on the evaluation grid."""
    u = np.asarray(u, dtype=float)
    if u.shape != (model.n_nodes,):
        raise ValueError("state length does not match the mesh")
    grid = model.grid
    if model.gamma.kind == "solution":
        if grid.mode == "nodes":
            state = u[grid.owner]
        else:  # P1 value at the barycenter = vertex average
            state = u[model.mesh.triangles].mean(axis=1)
    else:
        if grid.mode != "centroids":
            raise ValueError(
                "gradient nonlinearities require the centroid grid"
            )
        state = element_gradients(model.mesh, u)
    return model.gamma(mu, state)


def assemble_nonlinear_vector(model, u, g_vals):
    """Assemble the nonlinear stiffness action from sampled gamma values.

    Entry p is the one-point (centroid) quadrature of
    ``gamma * grad(u) . grad(theta_p)``; on the nodes grid, gamma at the
    centroid is taken as the vertex average. Passing an EIM reconstruction
    as ``g_vals`` yields the hyper-reduced operator with the same rule.
    """
    mesh = model.mesh
    u = np.asarray(u, dtype=float)
    g_vals = np.asarray(g_vals, dtype=float)
    if g_vals.shape != (model.grid.n_points,):
        raise ValueError("gamma values do not match the evaluation grid")
    g_tri = _values_on_triangles(mesh, model.grid, g_vals)
    grad_u = element_gradients(mesh, u)
    weight = mesh.triangle_areas * g_tri
    out = np.zeros(mesh.n_nodes)
    for i in range(3):
        contrib = weight * np.einsum(
            "td,td->t", grad_u, mesh.shape_gradients[:, i, :]
        )
        np.add.at(out, mesh.triangles[:, i], contrib)
    return out


def hf_solve(model, mu, solver_tol=1e-12):
    """March the semi-implicit Euler scheme for one parameter value.

    Each step solves ``(M + dt A0) u^k = dt l^k + M u^{k-1} - dt n(u^{k-1})``
    with the nonlinear term evaluated at the previous state.
    """
    fields = np.empty((model.n_steps + 1, model.n_nodes))
    fields[0] = model.u0
    u = model.u0
    for k in range(1, model.n_steps + 1):
        dt = model.steps[k - 1]
        g = gamma_field(model, mu, u)
        if model.kappa0 + g.min(initial=0.0) <= 0.0:
            raise NumericalError(
                f"ellipticity lost at step {k}: kappa0 + min(gamma) <= 0"
            )
        rhs = dt * model.load_vector(k) + model.mass @ u
        rhs -= dt * assemble_nonlinear_vector(model, u, g)
        u = model.system_factor(dt).solve(rhs, tol=solver_tol)
        fields[k] = u
    return Trajectory(parameter=float(mu), fields=fields)


def gamma_stack(model, mu, fields):
    """Gamma fields of every time slice, shape (K+1, n_grid_points)."""
    return np.stack([gamma_field(model, mu, f) for f in fields])


def save_trajectory_csv(trajectory, directory):
    """Dump one trajectory as ``traj_mu<mu>.csv`` (rows = time nodes)."""
    os.makedirs(directory, exist_ok=True)
    name = f"traj_mu{trajectory.parameter:g}.csv"
    path = os.path.join(directory, name)
    with open(path, "w", newline="\n") as fh:
        for row in trajectory.fields:
            fh.write(",".join(float_repr(v) for v in row))
            fh.write("\n")
    return path
