import numpy as np
import pytest

from facefit.mesh import Mesh
from facefit.raster import (BACKGROUND_DEPTH, face_normals, rasterize,
                            vertex_normals, vertex_normals_backward,
                            vertex_normals_forward)


def quad(width, height, z=(0.0, 0.0, 0.0, 0.0)):
    """Two triangles exactly tiling a width x height viewport."""
    uv = np.array([[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    depths = np.asarray(z, dtype=float)
    return tris, uv, depths


class TestCoverage:
    def test_full_viewport_quad_covers_everything(self):
        tris, uv, z = quad(8, 6)
        shaded = np.tile([[1.0, 0.5, 0.25]], (4, 1))
        rb, dm = rasterize(tris, uv, z, shaded, 8, 6)
        assert rb.coverage.all()
        assert dm.coverage.all()
        np.testing.assert_allclose(rb.color, np.broadcast_to([1.0, 0.5, 0.25],
                                                             (6, 8, 3)))

    def test_shared_edge_claimed_exactly_once(self):
        # each pixel on the diagonal belongs to exactly one triangle
        tris, uv, z = quad(16, 16)
        rb, _ = rasterize(tris, uv, z, np.ones((4, 3)), 16, 16)
        assert rb.coverage.all()
        counts = np.bincount(rb.tri_index.ravel(), minlength=2)
        assert counts.sum() == 256
        assert counts[0] > 0 and counts[1] > 0

    def test_offscreen_triangle_renders_nothing(self):
        tris = np.array([[0, 1, 2]])
        uv = np.array([[-10.0, -10.0], [-5.0, -10.0], [-5.0, -5.0]])
        rb, dm = rasterize(tris, uv, np.zeros(3), np.ones((3, 3)), 4, 4)
        assert not rb.coverage.any()
        assert (dm.depth == BACKGROUND_DEPTH).all()

    def test_degenerate_triangle_counted_and_skipped(self):
        tris = np.array([[0, 1, 2]])
        uv = np.array([[0.0, 0.0], [4.0, 0.0], [8.0, 0.0]])  # collinear
        rb, _ = rasterize(tris, uv, np.zeros(3), np.ones((3, 3)), 8, 8)
        assert rb.degenerate_triangles == 1
        assert not rb.coverage.any()

    def test_winding_does_not_affect_coverage(self):
        tris, uv, z = quad(8, 8)
        flipped = tris[:, ::-1]
        rb1, _ = rasterize(tris, uv, z, np.ones((4, 3)), 8, 8)
        rb2, _ = rasterize(flipped, uv, z, np.ones((4, 3)), 8, 8)
        np.testing.assert_array_equal(rb1.coverage, rb2.coverage)

    def test_accepts_mesh_argument(self):
        tris, uv, z = quad(4, 4)
        verts = np.hstack([uv, z[:, None]])
        mesh = Mesh(verts, tris)
        rb, _ = rasterize(mesh, uv, z, np.ones((4, 3)), 4, 4)
        assert rb.coverage.all()


class TestDepth:
    def test_nearer_triangle_wins(self):
        tris = np.array([[0, 1, 2], [3, 4, 5]])
        base = np.array([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]])
        uv = np.vstack([base, base])
        z = np.array([5.0, 5.0, 5.0, 2.0, 2.0, 2.0])
        shaded = np.vstack([np.zeros((3, 3)), np.ones((3, 3))])
        rb, dm = rasterize(tris, uv, z, shaded, 8, 8)
        sel = rb.coverage
        assert (rb.tri_index[sel] == 1).all()
        np.testing.assert_allclose(dm.depth[sel], 2.0)

    def test_depth_tie_keeps_lower_index(self):
        tris = np.array([[0, 1, 2], [3, 4, 5]])
        base = np.array([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]])
        uv = np.vstack([base, base])
        z = np.full(6, 3.0)
        rb, _ = rasterize(tris, uv, z, np.ones((6, 3)), 8, 8)
        assert (rb.tri_index[rb.coverage] == 0).all()

    def test_slanted_plane_depth_is_analytic(self):
        # depth plane z = 1 + 0.25 x + 0.5 y sampled at pixel centers
        tris, uv, _ = quad(8, 8)
        z = 1.0 + 0.25 * uv[:, 0] + 0.5 * uv[:, 1]
        rb, dm = rasterize(tris, uv, z, np.ones((4, 3)), 8, 8)
        cols, rows = np.meshgrid(np.arange(8), np.arange(8))
        expected = 1.0 + 0.25 * (cols + 0.5) + 0.5 * (rows + 0.5)
        np.testing.assert_allclose(dm.depth, expected, atol=1e-10)

    def test_barycentric_coordinates_sum_to_one(self):
        tris, uv, z = quad(8, 8)
        rb, _ = rasterize(tris, uv, z, np.ones((4, 3)), 8, 8)
        np.testing.assert_allclose(rb.bary.sum(axis=2), 1.0, atol=1e-12)


class TestColor:
    def test_vertex_colors_interpolate_linearly(self):
        tris = np.array([[0, 1, 2]])
        uv = np.array([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]])
        shaded = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
        rb, _ = rasterize(tris, uv, np.zeros(3), shaded, 8, 8)
        # at every covered pixel the color equals the barycentric mix
        sel = rb.coverage
        mixed = rb.bary[sel] @ shaded
        np.testing.assert_allclose(rb.color[sel], mixed, atol=1e-12)
        np.testing.assert_allclose(rb.color[sel].sum(axis=1), 1.0, atol=1e-12)

    def test_flat_color_vector_accepted(self):
        tris, uv, z = quad(4, 4)
        flat = np.tile([0.2, 0.4, 0.6], 4)
        rb, _ = rasterize(tris, uv, z, flat, 4, 4)
        np.testing.assert_allclose(rb.color[rb.coverage],
                                   np.broadcast_to([0.2, 0.4, 0.6], (16, 3)))


class TestNormals:
    def test_face_normal_of_ccw_triangle(self):
        verts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1.0, 0]])
        fn = face_normals(verts, [[0, 1, 2]])
        np.testing.assert_allclose(fn, [[0.0, 0.0, 1.0]])

    def test_face_normal_length_is_twice_area(self):
        verts = np.array([[0.0, 0, 0], [3.0, 0, 0], [0.0, 4.0, 0]])
        fn = face_normals(verts, [[0, 1, 2]])
        assert np.linalg.norm(fn[0]) == pytest.approx(12.0)

    def test_icosphere_normals_point_radially(self):
        from facefit.morphable import _icosphere
        verts, tris = _icosphere(2)
        n = vertex_normals(verts, tris)
        radial = verts / np.linalg.norm(verts, axis=1, keepdims=True)
        cosine = np.sum(n * radial, axis=1)
        assert cosine.min() > np.cos(np.deg2rad(2.0))

    def test_isolated_vertex_gets_default_normal(self):
        verts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1.0, 0], [9.0, 9, 9]])
        n = vertex_normals(verts, [[0, 1, 2]])
        np.testing.assert_array_equal(n[3], [0.0, 0.0, 1.0])

    def test_normals_are_unit_length(self):
        from facefit.morphable import _icosphere
        verts, tris = _icosphere(1)
        n = vertex_normals(verts, tris)
        np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)

    def test_backward_matches_central_differences(self):
        rng = np.random.default_rng(0)
        from facefit.morphable import _icosphere
        verts, tris = _icosphere(0)
        verts = verts + 0.05 * rng.standard_normal(verts.shape)
        grad_n = rng.standard_normal(verts.shape)

        def loss(v):
            n, _ = vertex_normals_forward(v, tris)
            return float(np.sum(n * grad_n))

        _, ctx = vertex_normals_forward(verts, tris)
        gx = vertex_normals_backward(ctx, grad_n)
        h = 1e-6
        for idx in [(0, 0), (3, 1), (7, 2)]:
            up, dn = verts.copy(), verts.copy()
            up[idx] += h
            dn[idx] -= h
            fd = (loss(up) - loss(dn)) / (2 * h)
            assert gx[idx] == pytest.approx(fd, rel=1e-4, abs=1e-8)
