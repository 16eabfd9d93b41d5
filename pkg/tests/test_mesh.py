"""Mesh generation: counts, geometry, determinism, gradient exactness."""

import numpy as np
import pytest

from preim.mesh import (
    element_gradients,
    eval_grid,
    generate_perforated_plate,
    save_mesh_csv,
)


def shoelace_area(nodes, triangle):
    """Independent signed-area oracle for one triangle."""
    (x1, y1), (x2, y2), (x3, y3) = nodes[triangle]
    return 0.5 * ((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))


class TestGeneration:
    @pytest.mark.parametrize("refine,n_nodes,n_tris", [
        (1, 24, 24),
        (2, 72, 96),
        (3, 144, 216),
    ])
    def test_counts(self, refine, n_nodes, n_tris):
        mesh = generate_perforated_plate(refine)
        assert mesh.n_nodes == n_nodes == (4 * refine + 1) ** 2 - (2 * refine - 1) ** 2
        assert mesh.n_triangles == n_tris == 24 * refine ** 2

    @pytest.mark.parametrize("refine", [1, 2, 3])
    def test_total_area_shoelace(self, refine):
        mesh = generate_perforated_plate(refine)
        oracle = sum(shoelace_area(mesh.nodes, t) for t in mesh.triangles)
        assert oracle == pytest.approx(12.0, rel=1e-12)
        assert mesh.triangle_areas.sum() == pytest.approx(12.0, rel=1e-12)

    @pytest.mark.parametrize("refine", [1, 2, 4])
    def test_positive_orientation(self, refine):
        mesh = generate_perforated_plate(refine)
        for tri in mesh.triangles:
            assert shoelace_area(mesh.nodes, tri) > 0

    @pytest.mark.parametrize("refine", [1, 3])
    def test_boundary_length(self, refine):
        mesh = generate_perforated_plate(refine)
        assert mesh.boundary_lengths.sum() == pytest.approx(24.0, rel=1e-12)

    def test_boundary_edges_cover_both_perimeters(self):
        mesh = generate_perforated_plate(2)
        mids = 0.5 * (mesh.nodes[mesh.boundary_edges[:, 0]]
                      + mesh.nodes[mesh.boundary_edges[:, 1]])
        on_outer = (np.abs(np.abs(mids) - 2.0) < 1e-12).any(axis=1)
        on_inner = ~on_outer
        assert mesh.boundary_lengths[on_outer].sum() == pytest.approx(16.0)
        assert mesh.boundary_lengths[on_inner].sum() == pytest.approx(8.0)

    def test_edge_multiplicity(self):
        # boundary edges belong to one triangle, interior edges to two
        mesh = generate_perforated_plate(2)
        count = {}
        for tri in mesh.triangles:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                count[key] = count.get(key, 0) + 1
        boundary = {tuple(e) for e in mesh.boundary_edges}
        for edge, mult in count.items():
            assert mult == (1 if edge in boundary else 2)

    def test_deterministic(self):
        m1 = generate_perforated_plate(3)
        m2 = generate_perforated_plate(3)
        assert np.array_equal(m1.nodes, m2.nodes)
        assert np.array_equal(m1.triangles, m2.triangles)
        assert np.array_equal(m1.boundary_edges, m2.boundary_edges)

    def test_lexicographic_node_order(self):
        mesh = generate_perforated_plate(2)
        keys = [(y, x) for x, y in mesh.nodes]
        assert keys == sorted(keys)

    @pytest.mark.parametrize("bad", [0, -1, 1.5])
    def test_invalid_refine(self, bad):
        with pytest.raises(ValueError):
            generate_perforated_plate(bad)


class TestEvalGrid:
    def test_nodes_mode_identity(self):
        mesh = generate_perforated_plate(1)
        grid = eval_grid(mesh, "nodes")
        assert grid.n_points == 24
        assert np.array_equal(grid.owner, np.arange(24))
        assert np.array_equal(grid.points, mesh.nodes)

    def test_centroids_inside_triangles(self):
        mesh = generate_perforated_plate(1)
        grid = eval_grid(mesh, "centroids")
        assert grid.n_points == mesh.n_triangles
        for e, point in enumerate(grid.points):
            verts = mesh.nodes[mesh.triangles[e]]
            # barycentric coordinates of the centroid are all 1/3
            assert np.allclose(point, verts.mean(axis=0))

    def test_unknown_mode(self):
        mesh = generate_perforated_plate(1)
        with pytest.raises(ValueError):
            eval_grid(mesh, "edges")


class TestElementGradients:
    def test_constant_field(self):
        mesh = generate_perforated_plate(2)
        grads = element_gradients(mesh, np.full(mesh.n_nodes, 4.2))
        assert np.abs(grads).max() < 1e-13

    @pytest.mark.parametrize("coeffs,expected", [
        ((1.0, 0.0, 0.0), (1.0, 0.0)),
        ((2.0, 3.0, -1.0), (2.0, 3.0)),
    ])
    def test_affine_exactness(self, coeffs, expected):
        a, b, c = coeffs
        mesh = generate_perforated_plate(2)
        u = a * mesh.nodes[:, 0] + b * mesh.nodes[:, 1] + c
        grads = element_gradients(mesh, u)
        assert np.allclose(grads, np.asarray(expected), atol=1e-12)

    def test_length_mismatch(self):
        mesh = generate_perforated_plate(1)
        with pytest.raises(ValueError):
            element_gradients(mesh, np.zeros(mesh.n_nodes + 1))


def test_mesh_csv_dump(tmp_path):
    mesh = generate_perforated_plate(1)
    save_mesh_csv(mesh, tmp_path)
    nodes = np.loadtxt(tmp_path / "nodes.csv", delimiter=",")
    tris = np.loadtxt(tmp_path / "triangles.csv", delimiter=",", dtype=int)
    edges = np.loadtxt(tmp_path / "boundary.csv", delimiter=",", dtype=int)
    assert np.array_equal(nodes, mesh.nodes)  # 17 digits round-trip exactly
    assert np.array_equal(tris, mesh.triangles)
    assert np.array_equal(edges, mesh.boundary_edges)
