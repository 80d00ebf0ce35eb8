"""Deterministic synthetic fixtures: toy model, rendered targets, masks,
landmarks, edge maps and detail depth signals, with a manifest file."""

import os

import numpy as np

from . import io
from .camera import Pose, project_vertices
from .fit import default_init_params
from .lighting import UNIFORM_GAMMA0
from .losses import LandmarkSet
from .morphable import FaceParams, make_toy_model, save_model
from .objective import render_params
from .parsing import CELEBAMASK19, ParsingMap

FIXTURE_IMAGE_SIZE = 128
TOY_SIZES = dict(n_id=12, n_exp=8, n_tex=12)


def sample_params(model, rng, width, height):
    """Random parameters near the canonical frontal initialization."""
    init = default_init_params(model, width, height)
    pose = Pose(
        pitch=float(rng.uniform(-0.06, 0.06)),
        yaw=float(rng.uniform(-0.06, 0.06)),
        roll=float(rng.uniform(-0.06, 0.06)),
        f=float(init.pose.f * rng.uniform(0.93, 1.07)),
        t2d=np.array([width / 2 + rng.uniform(-3, 3),
                      height / 2 + rng.uniform(-3, 3),
                      init.pose.t2d[2]]),
    )
    gamma = np.zeros(9)
    gamma[0] = UNIFORM_GAMMA0
    gamma[1:4] = rng.uniform(-0.25, 0.25, size=3)
    return FaceParams(
        0.4 * rng.standard_normal(model.n_id),
        0.3 * rng.standard_normal(model.n_exp),
        0.25 * rng.standard_normal(model.n_tex),
        gamma, pose)


def synthetic_target(model, params, width, height):
    """Render params and quantize to what an 8-bit input image would hold."""
    rb, dm, uv = render_params(model, params, width, height)
    image = np.round(np.clip(rb.color, 0, 1) * 255.0) / 255.0
    landmarks = LandmarkSet(uv[model.landmark_indices])
    return image, dm, landmarks, rb


def eyeglass_parsing(coverage, rng=None):
    """Parsing map: skin on covered pixels, an eyeglass band across the
    middle of the face, background elsewhere."""
    labels = np.zeros(coverage.shape, dtype=np.int64)
    labels[coverage] = 1  # skin
    rows = np.nonzero(coverage.any(axis=1))[0]
    if len(rows):
        mid = (rows[0] + rows[-1]) // 2
        band = slice(max(mid - 4, 0), mid + 4)
        sub = labels[band]
        sub[sub == 1] = 3  # eyeglass
        labels[band] = sub
    return ParsingMap(labels, "celebamask19")


def edge_map_from_coverage(coverage):
    """Edge probability 1 on the silhouette of the coverage mask."""
    from scipy import ndimage

    eroded = ndimage.binary_erosion(coverage)
    return (coverage & ~eroded).astype(float)


def sinusoid_detail(base_depth, coverage, delta_max, cycles=3.0):
    """Base depth plus an in-range sinusoidal displacement field."""
    h, w = base_depth.shape
    yy, xx = np.mgrid[0:h, 0:w]
    disp = 0.6 * delta_max * (np.sin(2 * np.pi * cycles * xx / w)
                              * np.cos(2 * np.pi * cycles * yy / h))
    detailed = base_depth.copy()
    detailed[coverage] = base_depth[coverage] + disp[coverage]
    return detailed


def make_fixtures(out_dir, seed=0, n_targets=3, size=FIXTURE_IMAGE_SIZE):
    """Write the full fixture set; returns the manifest (list of paths)."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    manifest = []

    model = make_toy_model(seed=seed, **TOY_SIZES)
    model_path = os.path.join(out_dir, "toy_model.ffm")
    save_model(model, model_path)
    manifest.append("toy_model.ffm")

    for idx in range(n_targets):
        params = sample_params(model, rng, size, size)
        image, dm, landmarks, rb = synthetic_target(model, params, size, size)
        stem = f"target_{idx}"
        io.write_image(image, os.path.join(out_dir, stem + ".png"))
        io.write_landmarks(landmarks, os.path.join(out_dir, stem + ".landmarks.txt"))
        io.save_params(params, os.path.join(out_dir, stem + ".params.json"))
        io.write_depth(dm, os.path.join(out_dir, stem + ".depth.npy"))

        parsing = eyeglass_parsing(rb.coverage)
        io.write_parsing(parsing, os.path.join(out_dir, stem + ".parsing.png"))
        io.write_gray(edge_map_from_coverage(rb.coverage),
                      os.path.join(out_dir, stem + ".edges.png"))

        span = float(dm.depth[rb.coverage].max() - dm.depth[rb.coverage].min())
        delta_max = max(0.02 * span, 1e-6)
        detail = sinusoid_detail(dm.depth, rb.coverage, delta_max)
        io.write_depth(detail, os.path.join(out_dir, stem + ".detail.npy"))
        manifest += [stem + ext for ext in
                     (".png", ".landmarks.txt", ".params.json", ".depth.npy",
                      ".parsing.png", ".edges.png", ".detail.npy")]

    io.atomic_write_text(os.path.join(out_dir, "manifest.txt"),
                         "\n".join(manifest) + "\n")
    manifest.append("manifest.txt")
    return manifest
