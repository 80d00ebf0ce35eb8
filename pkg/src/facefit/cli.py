"""Batch command-line front end.

Subcommands: reconstruct, make-fixtures, make-toy-model, render,
score-edges.  Exit codes are stable: 0 success, 1 missing/corrupt input or
internal failure, 2 missing landmarks while the landmark term is active,
3 unconstrained fit (nothing visible for a photometric-only objective).
Errors are reported as a single machine-parsable line on stderr.  Set
FACEFIT_LOG=debug for verbose logging.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import io
from .bump import detailed_depth, mesh_from_depth
from .edges import (CoordinateSet, EdgeLinesMap, adversarial_loss,
                    discriminator_loss, distance_field, edge_mse,
                    ground_truth_label)
from .errors import FacefitError, UnconstrainedFitError
from .fit import FitConfig, default_init_params, fit_coarse, fit_detail
from .fixtures import make_fixtures
from .losses import LossWeights
from .mesh import Mesh
from .morphable import load_model, make_toy_model, save_model
from .objective import render_params
from .parsing import fuse_parsing_edges, visibility_mask
from .raster import vertex_normals
from .report import plot_loss_curves, write_report

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_LANDMARKS = 2
EXIT_UNCONSTRAINED = 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _fail(message, code=EXIT_ERROR):
    raise CliError(message, code)


def _load_config(path):
    raw = io.read_config(path) if path else {}
    config = FitConfig.from_mapping(raw)
    wkeys = {}
    for key in ("lambda_feat", "lambda_regu", "lambda_phot", "lambda_land"):
        if key in raw:
            wkeys[key] = float(raw[key])
    weights = LossWeights(**wkeys)
    return raw, config, weights


def _load_or_make_model(raw_config, seed):
    path = raw_config.get("model")
    if path:
        if not os.path.exists(path):
            _fail(f"model file not found: {path}")
        return load_model(path)
    return make_toy_model(seed=seed, n_id=12, n_exp=8, n_tex=12)


def _reconstruct_one(image_path, args):
    raw, config, weights = _load_config(args.config)
    if not os.path.exists(image_path):
        _fail(f"image not found: {image_path}")
    image = io.read_image(image_path, srgb=args.srgb)
    height, width = image.shape[:2]
    model = _load_or_make_model(raw, args.seed)

    visibility = None
    if args.parsing:
        if not os.path.exists(args.parsing):
            _fail(f"parsing map not found: {args.parsing}")
        parsing = io.read_parsing(args.parsing, args.schema)
        if args.edges:
            if not os.path.exists(args.edges):
                _fail(f"edge map not found: {args.edges}")
            edges = EdgeLinesMap(io.read_gray(args.edges))
            parsing = fuse_parsing_edges(parsing, edges)
        visibility = visibility_mask(parsing)

    landmarks = None
    if args.landmarks:
        if not os.path.exists(args.landmarks):
            _fail(f"landmark file not found: {args.landmarks}")
        landmarks = io.read_landmarks(args.landmarks)
    elif weights.lambda_land > 0:
        _fail("landmarks required (lambda_land > 0 and no --landmarks)",
              EXIT_NO_LANDMARKS)

    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir,
                        os.path.splitext(os.path.basename(image_path))[0])

    try:
        coarse = fit_coarse(image, landmarks, visibility, model,
                            weights=weights, config=config)
    except UnconstrainedFitError as exc:
        _fail(str(exc), EXIT_UNCONSTRAINED)
    params = coarse.final_params

    rb, base_depth, _ = render_params(model, params, width, height)
    io.write_image(np.clip(rb.color, 0, 1), stem + ".render.png", srgb=args.srgb)
    io.save_params(params, stem + ".params.json")
    write_report(coarse, stem + ".report.tsv")
    reports = [coarse]

    if args.debug_buffers:
        io.write_gray(rb.coverage.astype(float), stem + ".coverage.png")
        finite = np.isfinite(base_depth.depth)
        if finite.any():
            lo, hi = base_depth.depth[finite].min(), base_depth.depth[finite].max()
            norm = np.zeros_like(base_depth.depth)
            norm[finite] = (base_depth.depth[finite] - lo) / max(hi - lo, 1e-12)
            io.write_gray(norm, stem + ".depth.png")

    depth_for_mesh = base_depth
    if args.detail_signal and not args.no_detail:
        if not os.path.exists(args.detail_signal):
            _fail(f"detail signal not found: {args.detail_signal}")
        signal = io.read_depth(args.detail_signal)
        bump, detail_report = fit_detail(base_depth, signal,
                                         coverage=rb.coverage, config=config)
        io.write_bump(bump, stem + ".bump.png")
        write_report(detail_report, stem + ".detail_report.tsv")
        reports.append(detail_report)
        depth_for_mesh = detailed_depth(base_depth, bump, rb.coverage)

    plot_loss_curves(reports, stem + ".loss_curves.png")

    mesh = mesh_from_depth(depth_for_mesh, rb.coverage, params.pose,
                           colors=rb.color)
    io.export_obj(mesh, stem + ".mesh.obj")
    return EXIT_OK


def cmd_reconstruct(args):
    if os.path.isdir(args.image):
        images = sorted(
            os.path.join(args.image, name) for name in os.listdir(args.image)
            if name.lower().endswith(".png"))
        if not images:
            _fail(f"no PNG images in directory: {args.image}")
        if args.jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(_reconstruct_worker,
                                      [(p, args) for p in images]))
        else:
            codes = [_reconstruct_one(p, args) for p in images]
        return max(codes)
    return _reconstruct_one(args.image, args)


def _reconstruct_worker(job):
    path, args = job
    try:
        return _reconstruct_one(path, args)
    except CliError as exc:
        print(f"facefit: error code={exc.code} image={path} message={exc}",
              file=sys.stderr)
        return exc.code


def cmd_make_toy_model(args):
    model = make_toy_model(n_id=args.n_id, n_exp=args.n_exp, n_tex=args.n_tex,
                           seed=args.seed)
    save_model(model, args.out)
    print(f"wrote {args.out} ({model.n_vertices} vertices, "
          f"{len(model.triangles)} triangles)")
    return EXIT_OK


def cmd_make_fixtures(args):
    manifest = make_fixtures(args.out_dir, seed=args.seed)
    print(f"wrote {len(manifest)} artifacts to {args.out_dir} "
          f"(see manifest.txt)")
    return EXIT_OK


def cmd_render(args):
    raw, _, _ = _load_config(args.config)
    model = _load_or_make_model(raw, args.seed)
    if not os.path.exists(args.params):
        _fail(f"params file not found: {args.params}")
    params = io.load_params(args.params)
    rb, dm, _ = render_params(model, params, args.width, args.height)
    io.write_image(np.clip(rb.color, 0, 1), args.out, srgb=args.srgb)
    if args.obj:
        verts = (model.mean_shape + model.id_basis @ params.alpha_id
                 + model.exp_basis @ params.beta_exp).reshape(-1, 3)
        from .morphable import assemble_albedo

        mesh = Mesh(verts, model.triangles,
                    colors=assemble_albedo(model, params).reshape(-1, 3))
        mesh.normals = vertex_normals(mesh)
        io.export_obj(mesh, args.obj)
    return EXIT_OK


def cmd_score_edges(args):
    if not os.path.exists(args.estimated):
        _fail(f"edge map not found: {args.estimated}")
    est = EdgeLinesMap(io.read_gray(args.estimated))
    if args.truth:
        tru = EdgeLinesMap(io.read_gray(args.truth))
        print(f"edge_mse = {edge_mse(est, tru)!r}")
        if args.coords:
            coords = CoordinateSet(io.read_coords(args.coords))
            field = distance_field(tru, threshold=args.edge_threshold)
            label = ground_truth_label(coords, field, args.theta, args.delta)
            print(f"effectiveness_label = {label}")
    if args.d_gen is not None:
        print(f"adversarial_loss = {adversarial_loss(args.d_gen)!r}")
        if args.d_real is not None and args.d_gt_label is not None:
            print(f"discriminator_loss = "
                  f"{discriminator_loss(args.d_gen, args.d_gt_label, args.d_real)!r}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="facefit",
        description="Single-image 3D face reconstruction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", help="fit a face model to an image")
    rec.add_argument("--image", required=True,
                     help="input PNG (or a directory of PNGs)")
    rec.add_argument("--parsing", help="face parsing map PNG")
    rec.add_argument("--schema", default="celebamask19",
                     help="parsing schema name or schema file")
    rec.add_argument("--edges", help="edge lines map PNG")
    rec.add_argument("--landmarks", help="68-landmark text file")
    rec.add_argument("--config", help="key = value config file")
    rec.add_argument("--out-dir", default=".", help="output directory")
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--jobs", type=int, default=1,
                     help="parallel workers for directory input")
    rec.add_argument("--detail-signal", help="detail depth signal (.npy)")
    rec.add_argument("--no-detail", action="store_true",
                     help="skip the bump-map detail stage")
    rec.add_argument("--srgb", action="store_true",
                     help="decode/encode images as sRGB")
    rec.add_argument("--debug-buffers", action="store_true",
                     help="dump coverage/depth buffers as PNG")
    rec.set_defaults(func=cmd_reconstruct)

    toy = sub.add_parser("make-toy-model", help="generate the synthetic prior")
    toy.add_argument("--out", required=True)
    toy.add_argument("--seed", type=int, default=0)
    toy.add_argument("--n-id", type=int, default=80)
    toy.add_argument("--n-exp", type=int, default=64)
    toy.add_argument("--n-tex", type=int, default=80)
    toy.set_defaults(func=cmd_make_toy_model)

    fix = sub.add_parser("make-fixtures", help="generate test fixtures")
    fix.add_argument("--out-dir", required=True)
    fix.add_argument("--seed", type=int, default=0)
    fix.set_defaults(func=cmd_make_fixtures)

    ren = sub.add_parser("render", help="re-render a saved fit")
    ren.add_argument("--params", required=True, help="params JSON from a fit")
    ren.add_argument("--config", help="config file (for the model path)")
    ren.add_argument("--out", required=True, help="output PNG")
    ren.add_argument("--obj", help="also export the base mesh as OBJ")
    ren.add_argument("--width", type=int, default=128)
    ren.add_argument("--height", type=int, default=128)
    ren.add_argument("--seed", type=int, default=0)
    ren.add_argument("--srgb", action="store_true")
    ren.set_defaults(func=cmd_render)

    sco = sub.add_parser("score-edges", help="edge effectiveness scoring")
    sco.add_argument("--estimated", required=True, help="estimated edge PNG")
    sco.add_argument("--truth", help="ground-truth edge PNG")
    sco.add_argument("--coords", help="coordinate set text file")
    sco.add_argument("--edge-threshold", type=float, default=0.5)
    sco.add_argument("--theta", type=float, default=2.0)
    sco.add_argument("--delta", type=float, default=0.5)
    sco.add_argument("--d-gen", type=float)
    sco.add_argument("--d-gt-label", type=float)
    sco.add_argument("--d-real", type=float)
    sco.set_defaults(func=cmd_score_edges)
    return parser


def main(argv=None):
    level = os.environ.get("FACEFIT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"facefit: error code={exc.code} message={exc}", file=sys.stderr)
        return exc.code
    except FacefitError as exc:
        print(f"facefit: error code={EXIT_ERROR} message={exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
