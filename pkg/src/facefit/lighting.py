"""Second-order real spherical-harmonics shading of per-vertex albedo.

Basis order: Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22.  Any band
attenuation constants are considered folded into the lighting coefficients,
so the irradiance at a normal n is simply basis(n) . gamma.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

C0 = 0.28209479177387814  # 1 / (2 sqrt(pi))
C1 = 0.4886025119029199
C2 = 1.0925484305920792
C20 = 0.31539156525252005
C22 = 0.5462742152960396

# lighting that makes the shaded color equal the albedo (band-0 irradiance 1)
UNIFORM_GAMMA0 = 1.0 / C0


@dataclass
class ShCoefficients:
    """9 lighting coefficients per color channel (stored as a 9x3 matrix)."""

    values: np.ndarray = field(default_factory=lambda: np.zeros((9, 3)))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape == (9,):
            self.values = np.repeat(self.values[:, None], 3, axis=1)
        if self.values.shape != (9, 3):
            raise ValueError("expected 9 coefficients or a 9x3 matrix")
        if not np.isfinite(self.values).all():
            raise ValueError("lighting coefficients must be finite")


def _unitize(normals):
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    norms = np.linalg.norm(normals, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        log.debug("sh_basis: normalizing %d non-unit normals",
                  int(np.sum(np.abs(norms - 1.0) > 1e-6)))
    return normals / np.maximum(norms, 1e-300)[:, None]


def sh_basis(normals):
    """Real SH basis values (bands 0-2) at each unit normal.

    Accepts a single 3-vector or a (V, 3) array; returns shape (9,) or (V, 9).
    """
    single = np.asarray(normals).ndim == 1
    n = _unitize(normals)
    x, y, z = n[:, 0], n[:, 1], n[:, 2]
    b = np.stack([
        np.full_like(x, C0),
        C1 * y, C1 * z, C1 * x,
        C2 * x * y, C2 * y * z,
        C20 * (3 * z * z - 1.0),
        C2 * x * z,
        C22 * (x * x - y * y),
    ], axis=1)
    return b[0] if single else b


def sh_basis_jacobian(normals):
    """d basis / d (unit normal): shape (V, 9, 3)."""
    n = _unitize(np.atleast_2d(normals))
    x, y, z = n[:, 0], n[:, 1], n[:, 2]
    zero = np.zeros_like(x)
    jac = np.zeros((len(n), 9, 3))
    jac[:, 1] = np.stack([zero, np.full_like(x, C1), zero], axis=1)
    jac[:, 2] = np.stack([zero, zero, np.full_like(x, C1)], axis=1)
    jac[:, 3] = np.stack([np.full_like(x, C1), zero, zero], axis=1)
    jac[:, 4] = C2 * np.stack([y, x, zero], axis=1)
    jac[:, 5] = C2 * np.stack([zero, z, y], axis=1)
    jac[:, 6] = C20 * np.stack([zero, zero, 6 * z], axis=1)
    jac[:, 7] = C2 * np.stack([z, zero, x], axis=1)
    jac[:, 8] = np.stack([C22 * 2 * x, -C22 * 2 * y, zero], axis=1)
    return jac


def shade_vertices(albedo, normals, gamma):
    """Lambertian SH shading: per vertex, albedo * (basis(normal) . gamma).

    albedo is a flat 3V vector (or (V, 3)); the result is unclamped so loss
    terms see the raw values.  Clamping happens only when writing images.
    """
    if isinstance(gamma, ShCoefficients):
        gamma = gamma.values
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape == (9,):
        gamma = np.repeat(gamma[:, None], 3, axis=1)
    alb = np.asarray(albedo, dtype=float).reshape(-1, 3)
    basis = sh_basis(np.atleast_2d(normals))
    irradiance = basis @ gamma  # (V, 3)
    return (alb * irradiance).ravel()
