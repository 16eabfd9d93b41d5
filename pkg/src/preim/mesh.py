"""Structured P1 triangulation of the perforated square plate.

The computational domain is the frame (-2, 2)^2 \\ [-1, 1]^2. A uniform grid
of cell size ``h = 1/refine`` covers the bounding square; cells inside the
hole are dropped and every remaining cell is split into two triangles along
its (+,+) diagonal. Node ordering is lexicographic by (y, x), so two calls
with the same refinement produce bit-identical arrays.
"""

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .util import float_repr

#: half-width of the outer square and of the inner hole
OUTER_HALF_WIDTH = 2.0
INNER_HALF_WIDTH = 1.0

#: exact boundary length of the reference domain (outer 16 + inner 8)
BOUNDARY_LENGTH = 24.0

#: exact area of the reference domain (16 - 4)
DOMAIN_AREA = 12.0


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with counter-clockwise elements.

    Attributes
    ----------
    nodes : ndarray, shape (n_nodes, 2)
        Vertex coordinates, lexicographic by (y, x).
    triangles : ndarray, shape (n_triangles, 3)
        Vertex indices, counter-clockwise orientation.
    boundary_edges : ndarray, shape (n_edges, 2)
        Node pairs covering the outer and inner boundary, each pair sorted,
        edges ordered lexicographically.
    boundary_lengths : ndarray, shape (n_edges,)
        Length of each boundary edge.
    h : float
        Cell size of the generating grid.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_lengths: np.ndarray
    h: float

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @cached_property
    def triangle_areas(self):
        """Signed areas (positive for the CCW elements), shape (n_tri,)."""
        p = self.nodes[self.triangles]
        v1 = p[:, 1] - p[:, 0]
        v2 = p[:, 2] - p[:, 0]
        return 0.5 * (v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0])

    @cached_property
    def shape_gradients(self):
        """Gradients of the three barycentric functions, shape (n_tri, 3, 2).

        grad(lambda_i) is the opposite edge rotated by (-y, x), divided by
        twice the element area; constant on each triangle.
        """
        p = self.nodes[self.triangles]
        grads = np.empty((self.n_triangles, 3, 2))
        twice_area = 2.0 * self.triangle_areas
        for i in range(3):
            edge = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
            grads[:, i, 0] = -edge[:, 1] / twice_area
            grads[:, i, 1] = edge[:, 0] / twice_area
        grads.setflags(write=False)
        return grads


@dataclass(frozen=True)
class EvalGrid:
    """Finite evaluation grid for the nonlinearity (nodes or centroids).

    ``owner[i]`` is the node index (nodes mode) or the triangle index
    (centroids mode) that carries point ``i``.
    """

    mode: str
    points: np.ndarray
    owner: np.ndarray

    @property
    def n_points(self):
        return self.points.shape[0]


def generate_perforated_plate(refine):
    """Generate the triangulated frame domain at cell size ``1/refine``.

    Parameters
    ----------
    refine : int
        Number of cells per unit length, >= 1. The mesh has
        ``(4*refine+1)**2 - (2*refine-1)**2`` nodes and ``24*refine**2``
        triangles.

    Returns
    -------
    Mesh
    """
    r = int(refine)
    if r < 1 or refine != r:
        raise ValueError(f"refine must be a positive integer, got {refine!r}")
    h = 1.0 / r
    n = 4 * r  # cells per side of the bounding square

    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))  # jj = y rows
    keep = ~((ii > r) & (ii < 3 * r) & (jj > r) & (jj < 3 * r))
    index = np.full((n + 1, n + 1), -1, dtype=np.int64)
    index[keep] = np.arange(int(keep.sum()))

    xs = -OUTER_HALF_WIDTH + ii[keep] * h
    ys = -OUTER_HALF_WIDTH + jj[keep] * h
    nodes = np.column_stack([xs, ys])

    triangles = []
    for j in range(n):
        for i in range(n):
            if r <= i < 3 * r and r <= j < 3 * r:
                continue  # cell inside the hole
            v00 = index[j, i]
            v10 = index[j, i + 1]
            v01 = index[j + 1, i]
            v11 = index[j + 1, i + 1]
            triangles.append((v00, v10, v11))
            triangles.append((v00, v11, v01))
    triangles = np.asarray(triangles, dtype=np.int64)

    edge_count = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(a), int(b)) if a < b else (int(b), int(a))
            edge_count[key] = edge_count.get(key, 0) + 1
    boundary = sorted(edge for edge, cnt in edge_count.items() if cnt == 1)
    boundary_edges = np.asarray(boundary, dtype=np.int64)
    diff = nodes[boundary_edges[:, 0]] - nodes[boundary_edges[:, 1]]
    boundary_lengths = np.hypot(diff[:, 0], diff[:, 1])

    for arr in (nodes, triangles, boundary_edges, boundary_lengths):
        arr.setflags(write=False)
    return Mesh(nodes, triangles, boundary_edges, boundary_lengths, h)


def eval_grid(mesh, mode):
    """Build the evaluation grid on mesh nodes or on element centroids."""
    if mode == "nodes":
        points = mesh.nodes.copy()
        owner = np.arange(mesh.n_nodes, dtype=np.int64)
    elif mode == "centroids":
        points = mesh.nodes[mesh.triangles].mean(axis=1)
        owner = np.arange(mesh.n_triangles, dtype=np.int64)
    else:
        raise ValueError(f"unknown eval-grid mode {mode!r}")
    points.setflags(write=False)
    owner.setflags(write=False)
    return EvalGrid(mode, points, owner)


def element_gradients(mesh, u):
    """Exact gradient of the P1 interpolant of ``u`` on each triangle.

    Parameters
    ----------
    u : ndarray, shape (n_nodes,)

    Returns
    -------
    ndarray, shape (n_triangles, 2)
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise ValueError(
            f"field has length {u.shape}, expected ({mesh.n_nodes},)"
        )
    vals = u[mesh.triangles]  # (n_tri, 3)
    return np.einsum("ti,tid->td", vals, mesh.shape_gradients)


def save_mesh_csv(mesh, directory):
    """Dump nodes.csv, triangles.csv and boundary.csv into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "nodes.csv"), "w", newline="\n") as fh:
        for x, y in mesh.nodes:
            fh.write(f"{float_repr(x)},{float_repr(y)}\n")
    with open(os.path.join(directory, "triangles.csv"), "w", newline="\n") as fh:
        for i, j, k in mesh.triangles:
            fh.write(f"{i},{j},{k}\n")
    with open(os.path.join(directory, "boundary.csv"), "w", newline="\n") as fh:
        for i, j in mesh.boundary_edges:
            fh.write(f"{i},{j}\n")
