"""Linear face prior (mean + basis matrices) and the unknown parameter vector.

The default profile uses 80 identity, 64 expression and 80 texture
coefficients; together with 9 shared lighting coefficients and the 6 pose
degrees of freedom the parameter vector has 239 entries.
"""

import io
import os
from dataclasses import dataclass, field

import numpy as np

from .camera import Pose
from .errors import ParameterShapeError

DEFAULT_N_ID = 80
DEFAULT_N_EXP = 64
DEFAULT_N_TEX = 80

_MAGIC = "FACEFIT-MODEL 1"


@dataclass
class MorphableModel:
    """Mean shape/albedo plus identity, expression and texture bases.

    Shapes are stored as flat 3V vectors (x0, y0, z0, x1, ...); basis
    matrices are 3V x N.  Immutable after construction.
    """

    mean_shape: np.ndarray
    id_basis: np.ndarray
    exp_basis: np.ndarray
    mean_albedo: np.ndarray
    tex_basis: np.ndarray
    triangles: np.ndarray
    landmark_indices: np.ndarray
    id_sigma: np.ndarray
    exp_sigma: np.ndarray
    tex_sigma: np.ndarray

    def __post_init__(self):
        self.mean_shape = np.asarray(self.mean_shape, dtype=float).ravel()
        self.mean_albedo = np.asarray(self.mean_albedo, dtype=float).ravel()
        self.id_basis = np.asarray(self.id_basis, dtype=float)
        self.exp_basis = np.asarray(self.exp_basis, dtype=float)
        self.tex_basis = np.asarray(self.tex_basis, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.landmark_indices = np.asarray(self.landmark_indices, dtype=np.int64).ravel()
        self.id_sigma = np.asarray(self.id_sigma, dtype=float).ravel()
        self.exp_sigma = np.asarray(self.exp_sigma, dtype=float).ravel()
        self.tex_sigma = np.asarray(self.tex_sigma, dtype=float).ravel()
        n3 = self.mean_shape.size
        if n3 % 3:
            raise ValueError("mean_shape length must be a multiple of 3")
        if self.mean_albedo.size != n3:
            raise ValueError("mean_albedo length must match mean_shape")
        for name, basis in (("id", self.id_basis), ("exp", self.exp_basis),
                            ("tex", self.tex_basis)):
            if basis.shape[0] != n3:
                raise ValueError(f"{name}_basis row count must be {n3}")
        if self.id_basis.shape[1] != self.id_sigma.size:
            raise ValueError("id_sigma length must match id_basis width")
        if self.exp_basis.shape[1] != self.exp_sigma.size:
            raise ValueError("exp_sigma length must match exp_basis width")
        if self.tex_basis.shape[1] != self.tex_sigma.size:
            raise ValueError("tex_sigma length must match tex_basis width")
        for name, sigma in (("id", self.id_sigma), ("exp", self.exp_sigma),
                            ("tex", self.tex_sigma)):
            if sigma.size and sigma.min() <= 0:
                raise ValueError(f"{name}_sigma must be strictly positive")
        if self.triangles.size and self.triangles.max() >= self.n_vertices:
            raise ValueError("triangle index out of range")
        if self.triangles.size and self.triangles.min() < 0:
            raise ValueError("triangle index out of range")
        if len(set(self.landmark_indices.tolist())) != self.landmark_indices.size:
            raise ValueError("landmark_indices must not contain duplicates")
        if self.landmark_indices.size and self.landmark_indices.max() >= self.n_vertices:
            raise ValueError("landmark index out of range")

    @property
    def n_vertices(self):
        return self.mean_shape.size // 3

    @property
    def n_id(self):
        return self.id_basis.shape[1]

    @property
    def n_exp(self):
        return self.exp_basis.shape[1]

    @property
    def n_tex(self):
        return self.tex_basis.shape[1]


@dataclass
class FaceParams:
    """The full unknown vector: shape/texture coefficients, lighting, pose.

    gamma is stored per color channel (9x3); when all three columns are
    identical the lighting counts as 9 degrees of freedom (the tied default),
    otherwise 27.
    """

    alpha_id: np.ndarray
    beta_exp: np.ndarray
    beta_tex: np.ndarray
    gamma: np.ndarray = field(default_factory=lambda: np.zeros((9, 3)))
    pose: Pose = field(default_factory=Pose)

    def __post_init__(self):
        self.alpha_id = np.asarray(self.alpha_id, dtype=float).ravel()
        self.beta_exp = np.asarray(self.beta_exp, dtype=float).ravel()
        self.beta_tex = np.asarray(self.beta_tex, dtype=float).ravel()
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.gamma.shape == (9,):
            self.gamma = np.repeat(self.gamma[:, None], 3, axis=1)
        if self.gamma.shape != (9, 3):
            raise ValueError("gamma must be 9 values or a 9x3 matrix")
        for arr in (self.alpha_id, self.beta_exp, self.beta_tex, self.gamma):
            if not np.isfinite(arr).all():
                raise ValueError("parameters must be finite")

    @staticmethod
    def zeros(model, gamma=None, pose=None):
        p = FaceParams(
            np.zeros(model.n_id), np.zeros(model.n_exp), np.zeros(model.n_tex)
        )
        if gamma is not None:
            p.gamma = np.asarray(gamma, dtype=float)
            if p.gamma.shape == (9,):
                p.gamma = np.repeat(p.gamma[:, None], 3, axis=1)
        if pose is not None:
            p.pose = pose.copy()
        return p

    @property
    def gamma_tied(self):
        g = self.gamma
        return bool(np.array_equal(g[:, 0], g[:, 1]) and np.array_equal(g[:, 0], g[:, 2]))

    @property
    def degrees_of_freedom(self):
        channels = 1 if self.gamma_tied else 3
        return (self.alpha_id.size + self.beta_exp.size + self.beta_tex.size
                + 9 * channels + 6)

    def copy(self):
        return FaceParams(self.alpha_id.copy(), self.beta_exp.copy(),
                          self.beta_tex.copy(), self.gamma.copy(), self.pose.copy())

    def to_vector(self):
        """Flatten to the optimization vector (tied-gamma profile).

        Layout: alpha_id, beta_exp, beta_tex, gamma (9, channel 0),
        pitch, yaw, roll, f, tx, ty.  The z translation is part of the
        camera setup, not a fitted degree of freedom.
        """
        pose = self.pose
        return np.concatenate([
            self.alpha_id, self.beta_exp, self.beta_tex, self.gamma[:, 0],
            [pose.pitch, pose.yaw, pose.roll, pose.f, pose.t2d[0], pose.t2d[1]],
        ])

    @staticmethod
    def from_vector(vec, model, tz=0.0):
        vec = np.asarray(vec, dtype=float).ravel()
        nid, nexp, ntex = model.n_id, model.n_exp, model.n_tex
        if vec.size != nid + nexp + ntex + 9 + 6:
            raise ParameterShapeError(
                f"parameter vector length {vec.size} != {nid + nexp + ntex + 15}")
        o = 0
        alpha = vec[o:o + nid]; o += nid
        beta = vec[o:o + nexp]; o += nexp
        tex = vec[o:o + ntex]; o += ntex
        gamma = vec[o:o + 9]; o += 9
        pitch, yaw, roll, f, tx, ty = vec[o:o + 6]
        pose = Pose(pitch, yaw, roll, f, np.array([tx, ty, tz]))
        return FaceParams(alpha, beta, tex, gamma, pose)


def _check_width(name, coeffs, basis):
    if coeffs.size != basis.shape[1]:
        raise ParameterShapeError(
            f"{name} has {coeffs.size} coefficients but the basis expects "
            f"{basis.shape[1]}")


def assemble_shape(model, params):
    """Base shape: mean + id_basis @ alpha_id + exp_basis @ beta_exp."""
    _check_width("alpha_id", params.alpha_id, model.id_basis)
    _check_width("beta_exp", params.beta_exp, model.exp_basis)
    return (model.mean_shape + model.id_basis @ params.alpha_id
            + model.exp_basis @ params.beta_exp)


def assemble_albedo(model, params, clamp=True):
    """Per-vertex albedo: mean + tex_basis @ beta_tex, clamped to [0, 1]."""
    _check_width("beta_tex", params.beta_tex, model.tex_basis)
    alb = model.mean_albedo + model.tex_basis @ params.beta_tex
    return np.clip(alb, 0.0, 1.0) if clamp else alb


def regularization_loss(params, model):
    """Sum of squared sigma-normalized shape/expression/texture coefficients."""
    _check_width("alpha_id", params.alpha_id, model.id_basis)
    _check_width("beta_exp", params.beta_exp, model.exp_basis)
    _check_width("beta_tex", params.beta_tex, model.tex_basis)
    return float(
        np.sum((params.alpha_id / model.id_sigma) ** 2)
        + np.sum((params.beta_exp / model.exp_sigma) ** 2)
        + np.sum((params.beta_tex / model.tex_sigma) ** 2)
    )


def regularization_grad(params, model):
    """Gradient of regularization_loss w.r.t. (alpha_id, beta_exp, beta_tex)."""
    return (2 * params.alpha_id / model.id_sigma ** 2,
            2 * params.beta_exp / model.exp_sigma ** 2,
            2 * params.beta_tex / model.tex_sigma ** 2)


# ---------------------------------------------------------------------------
# model container file: text header, then little-endian float64/int64 blocks

def save_model(model, path):
    """Write the model container (text header + raw little-endian arrays)."""
    header = io.StringIO()
    header.write(_MAGIC + "\n")
    header.write(f"vertices {model.n_vertices}\n")
    header.write(f"triangles {len(model.triangles)}\n")
    header.write(f"n_id {model.n_id}\n")
    header.write(f"n_exp {model.n_exp}\n")
    header.write(f"n_tex {model.n_tex}\n")
    header.write(f"landmarks {model.landmark_indices.size}\n")
    header.write("id_sigma " + " ".join(repr(float(v)) for v in model.id_sigma) + "\n")
    header.write("exp_sigma " + " ".join(repr(float(v)) for v in model.exp_sigma) + "\n")
    header.write("tex_sigma " + " ".join(repr(float(v)) for v in model.tex_sigma) + "\n")
    header.write("DATA\n")
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header.getvalue().encode("ascii"))
        for arr in (model.mean_shape, model.mean_albedo):
            fh.write(arr.astype("<f8").tobytes())
        for arr in (model.id_basis, model.exp_basis, model.tex_basis):
            fh.write(arr.astype("<f8").tobytes())
        fh.write(model.triangles.astype("<i8").tobytes())
        fh.write(model.landmark_indices.astype("<i8").tobytes())
    os.replace(tmp, path)


def load_model(path):
    """Read a model container written by save_model."""
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.index(b"DATA\n") + len(b"DATA\n")
    lines = blob[:end].decode("ascii").splitlines()
    if lines[0] != _MAGIC:
        raise ValueError(f"not a model container: {path}")
    fields = {}
    for line in lines[1:-1]:
        key, _, rest = line.partition(" ")
        fields[key] = rest
    nv = int(fields["vertices"])
    nt = int(fields["triangles"])
    nid, nexp, ntex = (int(fields[k]) for k in ("n_id", "n_exp", "n_tex"))
    nlm = int(fields["landmarks"])
    sigmas = {k: np.array([float(v) for v in fields[k].split()])
              for k in ("id_sigma", "exp_sigma", "tex_sigma")}
    off = end

    def take(count, dtype):
        nonlocal off
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return np.array(arr)

    mean_shape = take(3 * nv, "<f8")
    mean_albedo = take(3 * nv, "<f8")
    id_basis = take(3 * nv * nid, "<f8").reshape(3 * nv, nid)
    exp_basis = take(3 * nv * nexp, "<f8").reshape(3 * nv, nexp)
    tex_basis = take(3 * nv * ntex, "<f8").reshape(3 * nv, ntex)
    triangles = take(3 * nt, "<i8").reshape(nt, 3)
    landmarks = take(nlm, "<i8")
    return MorphableModel(mean_shape, id_basis, exp_basis, mean_albedo,
                          tex_basis, triangles, landmarks,
                          sigmas["id_sigma"], sigmas["exp_sigma"],
                          sigmas["tex_sigma"])


# ---------------------------------------------------------------------------
# synthetic toy model (icosphere based), so no proprietary asset is needed

def _icosphere(subdivisions=2):
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.add(verts[i], verts[j]) / 2.0
                m /= np.linalg.norm(m)
                verts.append(tuple(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = new_faces
    return np.array(verts), np.array(faces, dtype=np.int64)


def _smooth_columns(cols, triangles, n_vertices, rounds=3):
    """Average each per-vertex column over the mesh neighborhood."""
    nbr = [[] for _ in range(n_vertices)]
    for a, b, c in triangles:
        nbr[a] += [b, c]
        nbr[b] += [a, c]
        nbr[c] += [a, b]
    nbr = [np.unique(n) for n in nbr]
    out = cols
    for _ in range(rounds):
        smoothed = np.empty_like(out)
        for v in range(n_vertices):
            smoothed[v] = (out[v] + out[nbr[v]].sum(axis=0)) / (1 + len(nbr[v]))
        out = smoothed
    return out


def make_toy_model(n_id=DEFAULT_N_ID, n_exp=DEFAULT_N_EXP, n_tex=DEFAULT_N_TEX,
                   seed=0, subdivisions=2):
    """Deterministic synthetic face prior on a squashed icosphere (V=162)."""
    rng = np.random.default_rng(seed)
    verts, faces = _icosphere(subdivisions)
    verts = verts * np.array([0.85, 1.0, 0.75])
    nv = len(verts)

    def smooth_basis(n_cols, scale):
        raw = rng.normal(size=(nv, 3, n_cols))
        flat = _smooth_columns(raw.reshape(nv, -1), faces, nv)
        basis = flat.reshape(nv * 3, n_cols)
        norms = np.linalg.norm(basis, axis=0, keepdims=True)
        return basis / norms * scale * np.sqrt(nv)

    id_basis = smooth_basis(n_id, 0.02)
    exp_basis = smooth_basis(n_exp, 0.015)
    tex_basis = smooth_basis(n_tex, 0.02)

    base_color = np.array([0.78, 0.60, 0.50])
    albedo = np.tile(base_color, (nv, 1))
    albedo += 0.10 * np.stack([verts[:, 1], verts[:, 0], verts[:, 2]], axis=1)
    albedo = np.clip(albedo, 0.08, 0.92)

    # front of the face is the -z hemisphere (camera looks along +z)
    order = np.argsort(verts[:, 2], kind="stable")
    landmarks = np.sort(order[:68])

    decay = lambda n: 1.0 * 0.97 ** np.arange(n) + 0.2
    return MorphableModel(
        mean_shape=verts.ravel(),
        id_basis=id_basis,
        exp_basis=exp_basis,
        mean_albedo=albedo.ravel(),
        tex_basis=tex_basis,
        triangles=faces,
        landmark_indices=landmarks,
        id_sigma=decay(n_id),
        exp_sigma=decay(n_exp),
        tex_sigma=decay(n_tex),
    )
