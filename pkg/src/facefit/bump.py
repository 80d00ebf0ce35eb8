"""Bump-map detail layer: encoding, detailed depth, geometry loss, meshing.

Displacements are measured along the viewing ray (depth differences) and
encoded affinely into [0, 255] with 128 as the zero-displacement midpoint:
code = clamp(128 + 127 * displacement / delta_max).  Codes are kept at full
floating precision; 8-bit quantization happens only in files.
"""

from dataclasses import dataclass

import numpy as np

from .camera import rotation_from_euler
from .errors import EmptySurfaceError, ShapeMismatchError
from .mesh import Mesh
from .raster import BACKGROUND_DEPTH, DepthMap, vertex_normals

CODE_MID = 128.0
CODE_SCALE = 127.0


@dataclass
class BumpMap:
    """Per-pixel displacement codes in [0, 255] plus the encoding range."""

    codes: np.ndarray
    delta_max: float

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=float)
        if self.codes.ndim != 2:
            raise ValueError("codes must be a 2-D array")
        if self.delta_max <= 0:
            raise ValueError("delta_max must be positive")
        if self.codes.size and (self.codes.min() < 0 or self.codes.max() > 255):
            raise ValueError("codes must lie in [0, 255]")

    @property
    def height(self):
        return self.codes.shape[0]

    @property
    def width(self):
        return self.codes.shape[1]


def encode_phi(displacement, delta_max):
    """Depth displacement -> code in [0, 255] (affine, clamped)."""
    if delta_max <= 0:
        raise ValueError("delta_max must be positive")
    code = CODE_MID + CODE_SCALE * np.asarray(displacement, dtype=float) / delta_max
    return np.clip(code, 0.0, 255.0)


def decode_phi(code, delta_max):
    """Inverse of encode_phi on the unclamped range."""
    code = np.asarray(code, dtype=float)
    if code.size and (code.min() < 0 or code.max() > 255):
        raise ValueError("codes must lie in [0, 255]")
    return (code - CODE_MID) / CODE_SCALE * delta_max


def _check_dims(a, b, what):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: {a.shape} vs {b.shape}")


def bump_from_depths(detailed, base, coverage=None, delta_max=1.0):
    """Encode the depth difference detailed - base where the face projects.

    Uncovered pixels encode zero displacement (code 128).
    """
    det = detailed.depth if isinstance(detailed, DepthMap) else np.asarray(detailed, float)
    bas = base.depth if isinstance(base, DepthMap) else np.asarray(base, float)
    _check_dims(det, bas, "depth maps")
    if coverage is None:
        coverage = np.isfinite(bas) & np.isfinite(det)
    coverage = np.asarray(coverage, dtype=bool)
    _check_dims(coverage, bas, "coverage")
    codes = np.full(bas.shape, CODE_MID)
    codes[coverage] = encode_phi(det[coverage] - bas[coverage], delta_max)
    return BumpMap(codes, delta_max)


def detailed_depth(base, bump, coverage=None):
    """d'(b) = d(b) + decoded displacement; uncovered pixels keep +inf."""
    bas = base.depth if isinstance(base, DepthMap) else np.asarray(base, float)
    _check_dims(bas, bump.codes, "depth vs bump")
    if coverage is None:
        coverage = np.isfinite(bas)
    coverage = np.asarray(coverage, dtype=bool)
    _check_dims(coverage, bas, "coverage")
    out = np.full(bas.shape, BACKGROUND_DEPTH)
    out[coverage] = bas[coverage] + decode_phi(bump.codes[coverage], bump.delta_max)
    return DepthMap(out)


def _forward_diff_x(a):
    d = np.zeros_like(a)
    d[:, :-1] = a[:, 1:] - a[:, :-1]
    return d


def _forward_diff_y(a):
    d = np.zeros_like(a)
    d[:-1, :] = a[1:, :] - a[:-1, :]
    return d


def geo_loss(estimated, truth):
    """L1 distance between bump maps plus L1 of their forward-difference
    gradients (detail-preserving, noise-suppressing)."""
    est = estimated.codes if isinstance(estimated, BumpMap) else np.asarray(estimated, float)
    tru = truth.codes if isinstance(truth, BumpMap) else np.asarray(truth, float)
    _check_dims(est, tru, "bump maps")
    diff = tru - est
    return float(np.abs(diff).sum()
                 + np.abs(_forward_diff_x(tru) - _forward_diff_x(est)).sum()
                 + np.abs(_forward_diff_y(tru) - _forward_diff_y(est)).sum())


def geo_loss_grad(estimated, truth):
    """Subgradient of geo_loss with respect to the estimated codes."""
    est = estimated.codes if isinstance(estimated, BumpMap) else np.asarray(estimated, float)
    tru = truth.codes if isinstance(truth, BumpMap) else np.asarray(truth, float)
    _check_dims(est, tru, "bump maps")
    g = -np.sign(tru - est)
    sx = np.sign(_forward_diff_x(tru) - _forward_diff_x(est))
    sy = np.sign(_forward_diff_y(tru) - _forward_diff_y(est))
    # adjoint of the forward difference: (D^T s)[j] = s[j-1] - s[j]
    gx = np.zeros_like(est)
    gx[:, :-1] -= sx[:, :-1]
    gx[:, 1:] += sx[:, :-1]
    gy = np.zeros_like(est)
    gy[:-1, :] -= sy[:-1, :]
    gy[1:, :] += sy[:-1, :]
    return g - gx - gy


def mesh_from_depth(depth, coverage=None, pose=None, colors=None):
    """Back-project a depth map into a grid-connected triangle mesh.

    Pixel centers are pushed through the inverse of the projection at the
    given pose; triangles are emitted only between mutually covered
    neighbors.
    """
    from .camera import Pose

    dep = depth.depth if isinstance(depth, DepthMap) else np.asarray(depth, float)
    if coverage is None:
        coverage = np.isfinite(dep)
    coverage = np.asarray(coverage, dtype=bool)
    _check_dims(coverage, dep, "coverage")
    if not coverage.any():
        raise EmptySurfaceError("no covered pixel to mesh")
    pose = pose if pose is not None else Pose()

    h, w = dep.shape
    index = np.full((h, w), -1, dtype=np.int64)
    rows, cols = np.nonzero(coverage)
    index[rows, cols] = np.arange(len(rows))

    u = cols + 0.5
    v = rows + 0.5
    cam = np.stack([
        (u - pose.t2d[0]) / pose.f,
        (v - pose.t2d[1]) / pose.f,
        dep[rows, cols] - pose.t2d[2],
    ], axis=1)
    rot = rotation_from_euler(pose.pitch, pose.yaw, pose.roll)
    verts = cam @ rot  # R^T applied to each camera-space point

    tris = []
    for r in range(h - 1):
        for c in range(w - 1):
            a, b = index[r, c], index[r, c + 1]
            d2, e = index[r + 1, c], index[r + 1, c + 1]
            if a >= 0 and b >= 0 and d2 >= 0:
                tris.append((a, b, d2))
            if b >= 0 and e >= 0 and d2 >= 0:
                tris.append((b, e, d2))
    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)

    vcol = None
    if colors is not None:
        colors = np.asarray(colors, dtype=float)
        vcol = colors[rows, cols]
    mesh = Mesh(verts, tris, colors=vcol)
    if len(tris):
        mesh.normals = vertex_normals(mesh)
    return mesh
