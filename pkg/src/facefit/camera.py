"""Pose, rotation and the scaled-orthographic projection onto the image plane.

Conventions used throughout the repo:
  * model space is right-handed, y up
  * rotation is composed as R = Rz(roll) @ Ry(yaw) @ Rx(pitch)
  * the camera looks along +z; depth = (R p)_z + t2d_z, smaller is closer
  * image origin is top-left, y down; pixel (row, col) samples at
    (col + 0.5, row + 0.5)

The translation vector is 3-dimensional: its z component shifts points in
camera space before projection (it only moves depth), while the x/y
components are added to the projected 2D positions.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericRangeError


@dataclass
class Pose:
    """Rigid pose plus the global scale factor of the projection."""

    pitch: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0
    f: float = 1.0
    t2d: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.t2d = np.asarray(self.t2d, dtype=float)
        if self.t2d.shape != (3,):
            raise ValueError("t2d must be a 3-vector")
        if not np.isfinite([self.pitch, self.yaw, self.roll, self.f]).all():
            raise NumericRangeError("pose angles and scale must be finite")
        if self.f <= 0:
            raise ValueError("scale factor f must be positive")

    def copy(self):
        return Pose(self.pitch, self.yaw, self.roll, self.f, self.t2d.copy())


@dataclass
class ProjectionMatrix:
    """2x3 projection matrix; the default selects the x-y plane."""

    rows: np.ndarray = field(
        default_factory=lambda: np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    )

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.shape != (2, 3):
            raise ValueError("projection matrix must be 2x3")
        if not np.isfinite(self.rows).all():
            raise NumericRangeError("projection matrix entries must be finite")


def _rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)


def rotation_from_euler(pitch, yaw, roll):
    """Rotation matrix R = Rz(roll) @ Ry(yaw) @ Rx(pitch)."""
    return _rz(roll) @ _ry(yaw) @ _rx(pitch)


def rotation_jacobian(pitch, yaw, roll):
    """Derivatives of the rotation matrix with respect to each angle.

    Returns (dR/dpitch, dR/dyaw, dR/droll) as 3x3 matrices.
    """
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx, ry, rz = _rx(pitch), _ry(yaw), _rz(roll)
    drx = np.array([[0, 0, 0], [0, -sp, -cp], [0, cp, -sp]], dtype=float)
    dry = np.array([[-sy, 0, cy], [0, 0, 0], [-cy, 0, -sy]], dtype=float)
    cr, sr = np.cos(roll), np.sin(roll)
    drz = np.array([[-sr, -cr, 0], [cr, -sr, 0], [0, 0, 0]], dtype=float)
    return rz @ ry @ drx, rz @ dry @ rx, drz @ ry @ rx


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        if pts.size % 3:
            raise ValueError("flat point vector length must be a multiple of 3")
        pts = pts.reshape(-1, 3)
    return pts


def project_vertices(points, pose, pr=None):
    """Project 3D model points to 2D pixel positions.

    Each point p maps to f * Pr @ (R p + [0, 0, tz]) + [tx, ty].  Accepts a
    flat 3V vector or a (V, 3) array and returns a (V, 2) array.
    """
    pr = pr if pr is not None else ProjectionMatrix()
    pts = _as_points(points)
    rot = rotation_from_euler(pose.pitch, pose.yaw, pose.roll)
    cam = pts @ rot.T
    cam[:, 2] += pose.t2d[2]
    out = pose.f * (cam @ pr.rows.T) + pose.t2d[:2]
    if not np.isfinite(out).all():
        bad = int(np.argwhere(~np.isfinite(out).all(axis=1))[0, 0])
        raise NumericRangeError(f"non-finite projection at vertex {bad}")
    return out


def camera_depths(points, pose):
    """Depth along the line of sight: (R p)_z + tz."""
    pts = _as_points(points)
    rot = rotation_from_euler(pose.pitch, pose.yaw, pose.roll)
    return pts @ rot.T[:, 2] + pose.t2d[2]


def project_pose_jacobian(points, pose, pr=None):
    """Jacobian of project_vertices w.r.t. (pitch, yaw, roll, f, tx, ty).

    Returns a (V, 2, 6) array.
    """
    pr = pr if pr is not None else ProjectionMatrix()
    pts = _as_points(points)
    rot = rotation_from_euler(pose.pitch, pose.yaw, pose.roll)
    drs = rotation_jacobian(pose.pitch, pose.yaw, pose.roll)
    cam = pts @ rot.T
    jac = np.zeros((len(pts), 2, 6))
    for a, dr in enumerate(drs):
        jac[:, :, a] = pose.f * (pts @ dr.T @ pr.rows.T)
    cam_t = cam.copy()
    cam_t[:, 2] += pose.t2d[2]
    jac[:, :, 3] = cam_t @ pr.rows.T
    jac[:, 0, 4] = 1.0
    jac[:, 1, 5] = 1.0
    return jac
