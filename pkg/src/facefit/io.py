"""File I/O: images, masks, landmarks, bump maps, meshes, config files.

All writes go through a temp-file-then-rename so interrupted runs never
leave truncated outputs.
"""

import os

import numpy as np
from PIL import Image

from .bump import BumpMap
from .errors import ShapeMismatchError
from .losses import LandmarkSet
from .mesh import Mesh
from .parsing import ParsingMap


def atomic_write_bytes(path, data):
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def _save_pil(img, path):
    import io as _io

    buf = _io.BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def srgb_decode(x):
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0.04045, x / 12.92, ((x + 0.055) / 1.055) ** 2.4)


def srgb_encode(x):
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * x ** (1 / 2.4) - 0.055)


def read_image(path, srgb=False):
    """8-bit RGB PNG -> float image in [0, 1] (linear by default)."""
    img = np.asarray(Image.open(path).convert("RGB"), dtype=float) / 255.0
    return srgb_decode(img) if srgb else img


def write_image(image, path, srgb=False):
    img = np.asarray(image, dtype=float)
    if srgb:
        img = srgb_encode(np.clip(img, 0.0, 1.0))
    data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    _save_pil(Image.fromarray(data, mode="RGB"), path)


def read_gray(path):
    """8-bit grayscale PNG -> float map in [0, 1]."""
    return np.asarray(Image.open(path).convert("L"), dtype=float) / 255.0


def write_gray(values, path):
    data = np.round(np.clip(np.asarray(values, float), 0.0, 1.0) * 255.0)
    _save_pil(Image.fromarray(data.astype(np.uint8), mode="L"), path)


def read_parsing(path, schema="celebamask19"):
    """8-bit indexed/grayscale PNG of label indices -> ParsingMap."""
    img = Image.open(path)
    if img.mode not in ("L", "P"):
        img = img.convert("L")
    return ParsingMap(np.asarray(img, dtype=np.int64), schema)


def write_parsing(parsing, path):
    _save_pil(Image.fromarray(parsing.labels.astype(np.uint8), mode="L"), path)


def read_landmarks(path):
    """Plain text, one "x y [confidence]" line per landmark."""
    points, conf = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            points.append((float(parts[0]), float(parts[1])))
            conf.append(float(parts[2]) if len(parts) > 2 else 1.0)
    return LandmarkSet(np.asarray(points), np.asarray(conf))


def write_landmarks(landmarks, path):
    lines = [f"{x:.6f} {y:.6f} {c:.6f}"
             for (x, y), c in zip(landmarks.points, landmarks.confidence)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_bump(bump, path):
    """8-bit single-channel PNG plus a .txt sidecar with the encoding range."""
    data = np.round(np.clip(bump.codes, 0.0, 255.0)).astype(np.uint8)
    _save_pil(Image.fromarray(data, mode="L"), path)
    sidecar = os.path.splitext(str(path))[0] + ".txt"
    atomic_write_text(sidecar,
                      f"width = {bump.width}\nheight = {bump.height}\n"
                      f"delta_max = {bump.delta_max!r}\n")


def read_bump(path):
    sidecar = os.path.splitext(str(path))[0] + ".txt"
    meta = read_config(sidecar)
    codes = np.asarray(Image.open(path).convert("L"), dtype=float)
    if codes.shape != (int(meta["height"]), int(meta["width"])):
        raise ShapeMismatchError("bump PNG does not match its sidecar")
    return BumpMap(codes, float(meta["delta_max"]))


def read_depth(path):
    """Depth signal as a .npy array (inf marks background)."""
    return np.load(path)


def write_depth(depth, path):
    import io as _io

    arr = depth.depth if hasattr(depth, "depth") else np.asarray(depth, float)
    buf = _io.BytesIO()
    np.save(buf, arr)
    atomic_write_bytes(path, buf.getvalue())


def read_coords(path):
    """Plain text "x y" lines -> (N, 2) integer array."""
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            x, y = line.split()[:2]
            pts.append((int(x), int(y)))
    return np.asarray(pts, dtype=np.int64).reshape(-1, 2)


def read_config(path):
    """Plain-text "key = value" file -> dict of strings."""
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def export_obj(mesh, path):
    """ASCII OBJ with the "v x y z r g b" vertex-color extension."""
    import logging

    if mesh.n_vertices == 0:
        logging.getLogger(__name__).warning("exporting empty mesh to %s", path)
    lines = []
    for v, c in zip(mesh.vertices, mesh.colors):
        lines.append("v %.6f %.6f %.6f %.6f %.6f %.6f" % (*v, *c))
    for t in mesh.triangles:
        lines.append("f %d %d %d" % (t[0] + 1, t[1] + 1, t[2] + 1))
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def import_obj(path):
    verts, cols, tris = [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vals = [float(p) for p in parts[1:7]]
                verts.append(vals[:3])
                cols.append(vals[3:6] if len(vals) >= 6 else [0.7, 0.7, 0.7])
            elif parts[0] == "f":
                tris.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    verts = np.asarray(verts, dtype=float).reshape(-1, 3)
    cols = np.asarray(cols, dtype=float).reshape(-1, 3)
    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    return Mesh(verts, tris, colors=cols)


def save_params(params, path):
    """Fitted parameters as JSON (full float precision)."""
    import json

    doc = dict(
        alpha_id=params.alpha_id.tolist(),
        beta_exp=params.beta_exp.tolist(),
        beta_tex=params.beta_tex.tolist(),
        gamma=params.gamma.tolist(),
        pose=dict(pitch=params.pose.pitch, yaw=params.pose.yaw,
                  roll=params.pose.roll, f=params.pose.f,
                  t2d=params.pose.t2d.tolist()),
    )
    atomic_write_text(path, json.dumps(doc, indent=1))


def load_params(path):
    import json

    from .camera import Pose
    from .morphable import FaceParams

    with open(path) as fh:
        doc = json.load(fh)
    pose = Pose(doc["pose"]["pitch"], doc["pose"]["yaw"], doc["pose"]["roll"],
                doc["pose"]["f"], np.asarray(doc["pose"]["t2d"]))
    return FaceParams(np.asarray(doc["alpha_id"]), np.asarray(doc["beta_exp"]),
                      np.asarray(doc["beta_tex"]), np.asarray(doc["gamma"]),
                      pose)
