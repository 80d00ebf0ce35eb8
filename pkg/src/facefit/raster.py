"""Z-buffer rasterization of the projected mesh.

Pixel (row, col) samples at (col + 0.5, row + 0.5) with the image origin at
the top-left, y down.  Coverage uses a top-left fill rule so triangles that
share an edge never both claim a pixel on it; depth ties within 1e-12 keep
the lower triangle index.  Depth is interpolated linearly in screen space,
consistent with the scaled-orthographic camera.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

BACKGROUND_DEPTH = np.inf
DEPTH_TIE_EPS = 1e-12
DEGENERATE_AREA_EPS = 1e-12


@dataclass
class DepthMap:
    """Per-pixel camera-space depth; background pixels hold +inf."""

    depth: np.ndarray

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=float)
        if self.depth.ndim != 2:
            raise ValueError("depth must be a 2-D array")

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]

    @property
    def coverage(self):
        return np.isfinite(self.depth)


@dataclass
class RenderBuffer:
    """Rasterization outputs: color, coverage, triangle ids, barycentrics."""

    color: np.ndarray
    coverage: np.ndarray
    tri_index: np.ndarray
    bary: np.ndarray
    degenerate_triangles: int = 0


def _prep_shaded(shaded, n_vertices):
    arr = np.asarray(shaded, dtype=float).reshape(n_vertices, 3)
    return arr


def rasterize(triangles, projected, depths, shaded, width, height):
    """Rasterize screen-space triangles into (RenderBuffer, DepthMap).

    triangles: (T, 3) vertex indices (or a Mesh, whose triangles are used);
    projected: (V, 2) pixel positions; depths: V camera depths; shaded:
    per-vertex colors as a flat 3V vector or (V, 3).
    """
    tris = np.asarray(getattr(triangles, "triangles", triangles),
                      dtype=np.int64).reshape(-1, 3)
    uv = np.asarray(projected, dtype=float).reshape(-1, 2)
    depths = np.asarray(depths, dtype=float).ravel()
    colors = _prep_shaded(shaded, len(uv))

    zbuf = np.full((height, width), BACKGROUND_DEPTH)
    color = np.zeros((height, width, 3))
    tri_index = np.full((height, width), -1, dtype=np.int64)
    bary = np.zeros((height, width, 3))
    degenerate = 0

    for t, (i, j, k) in enumerate(tris):
        a, b, c = uv[i], uv[j], uv[k]
        d = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(d) < DEGENERATE_AREA_EPS:
            degenerate += 1
            continue
        s = 1.0 if d > 0 else -1.0

        xs = (a[0], b[0], c[0])
        ys = (a[1], b[1], c[1])
        col0 = max(int(np.ceil(min(xs) - 0.5)), 0)
        col1 = min(int(np.floor(max(xs) - 0.5)), width - 1)
        row0 = max(int(np.ceil(min(ys) - 0.5)), 0)
        row1 = min(int(np.floor(max(ys) - 0.5)), height - 1)
        if col1 < col0 or row1 < row0:
            continue
        px = np.arange(col0, col1 + 1) + 0.5
        py = (np.arange(row0, row1 + 1) + 0.5)[:, None]

        def edge(p0, p1):
            return (p1[0] - p0[0]) * (py - p0[1]) - (p1[1] - p0[1]) * (px - p0[0])

        e0 = edge(b, c)  # opposite vertex i
        e1 = edge(c, a)  # opposite vertex j
        e2 = edge(a, b)  # opposite vertex k

        def inclusive(p0, p1):
            vx, vy = s * (p1[0] - p0[0]), s * (p1[1] - p0[1])
            return vy < 0 or (vy == 0 and vx > 0)

        def test(e, inc):
            v = e * s
            return (v > 0) | ((v == 0) & inc)

        inside = (test(e0, inclusive(b, c))
                  & test(e1, inclusive(c, a))
                  & test(e2, inclusive(a, b)))
        if not inside.any():
            continue

        w0 = e0 / d
        w1 = e1 / d
        w2 = 1.0 - w0 - w1
        z = w0 * depths[i] + w1 * depths[j] + w2 * depths[k]

        sub_z = zbuf[row0:row1 + 1, col0:col1 + 1]
        better = inside & (z < sub_z - DEPTH_TIE_EPS)
        if not better.any():
            continue
        sub_z[better] = z[better]
        tri_index[row0:row1 + 1, col0:col1 + 1][better] = t
        sub_b = bary[row0:row1 + 1, col0:col1 + 1]
        sub_b[better] = np.stack([w0[better], w1[better], w2[better]], axis=1)
        pix = (w0[..., None] * colors[i] + w1[..., None] * colors[j]
               + w2[..., None] * colors[k])
        color[row0:row1 + 1, col0:col1 + 1][better] = pix[better]

    if degenerate:
        log.debug("rasterize: skipped %d degenerate triangles", degenerate)
    rb = RenderBuffer(color=color, coverage=tri_index >= 0,
                      tri_index=tri_index, bary=bary,
                      degenerate_triangles=degenerate)
    return rb, DepthMap(zbuf)


def face_normals(vertices, triangles):
    """Unnormalized per-face normals (cross products; length = 2 * area)."""
    verts = np.asarray(vertices, dtype=float).reshape(-1, 3)
    tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    e1 = verts[tris[:, 1]] - verts[tris[:, 0]]
    e2 = verts[tris[:, 2]] - verts[tris[:, 0]]
    return np.cross(e1, e2)


def vertex_normals(vertices, triangles=None):
    """Area-weighted vertex normals, normalized to unit length.

    Accepts a Mesh or (vertices, triangles).  Isolated vertices get +z.
    """
    if triangles is None:
        triangles = vertices.triangles
        vertices = vertices.vertices
    n, _ = vertex_normals_forward(np.asarray(vertices, dtype=float).reshape(-1, 3),
                                  np.asarray(triangles, dtype=np.int64).reshape(-1, 3))
    return n


def vertex_normals_forward(verts, tris):
    """Forward pass returning unit normals plus the backprop context."""
    fn = face_normals(verts, tris)
    m = np.zeros_like(verts)
    np.add.at(m, tris[:, 0], fn)
    np.add.at(m, tris[:, 1], fn)
    np.add.at(m, tris[:, 2], fn)
    norms = np.linalg.norm(m, axis=1)
    isolated = norms < 1e-300
    if isolated.any():
        log.debug("vertex_normals: %d zero-norm normals replaced by +z",
                  int(isolated.sum()))
        m = m.copy()
        m[isolated] = (0.0, 0.0, 1.0)
        norms = np.linalg.norm(m, axis=1)
    n = m / norms[:, None]
    ctx = (verts, tris, n, norms, isolated)
    return n, ctx


def vertex_normals_backward(ctx, grad_n):
    """Backpropagate d(loss)/d(unit normals) to the vertex positions."""
    verts, tris, n, norms, isolated = ctx
    gm = (grad_n - n * np.sum(grad_n * n, axis=1, keepdims=True)) / norms[:, None]
    gm[isolated] = 0.0
    gfc = gm[tris[:, 0]] + gm[tris[:, 1]] + gm[tris[:, 2]]
    e1 = verts[tris[:, 1]] - verts[tris[:, 0]]
    e2 = verts[tris[:, 2]] - verts[tris[:, 0]]
    ge1 = np.cross(e2, gfc)
    ge2 = np.cross(gfc, e1)
    gx = np.zeros_like(verts)
    np.add.at(gx, tris[:, 1], ge1)
    np.add.at(gx, tris[:, 2], ge2)
    np.add.at(gx, tris[:, 0], -(ge1 + ge2))
    return gx
