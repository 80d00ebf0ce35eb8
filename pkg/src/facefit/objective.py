"""Differentiable evaluation of the four-part coarse fitting objective.

The forward pass renders the current parameters with the z-buffer
rasterizer; the backward pass propagates analytic gradients through the
barycentric color interpolation, projection, shading, normals and the
linear bases, while holding the pixel-to-triangle assignment fixed
(fixed-coverage gradients).  Gradients are exact for the objective with
frozen coverage; a finite-difference probe that crosses a coverage change
is therefore expected to disagree and callers should exclude such points
(see coverage_signature).
"""

import numpy as np

from . import lighting
from .camera import rotation_from_euler, rotation_jacobian
from .losses import LossWeights, MeanPoolEmbedder
from .morphable import (FaceParams, assemble_shape, regularization_grad,
                        regularization_loss)
from .raster import rasterize, vertex_normals_backward, vertex_normals_forward


def _perp(v):
    """90-degree rotation used in cross-product derivatives: (y, -x)."""
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def render_params(model, params, width, height):
    """Render a parameter set: (RenderBuffer, DepthMap, projected uv)."""
    from .morphable import assemble_albedo

    shape = assemble_shape(model, params)
    verts = shape.reshape(-1, 3)
    albedo = assemble_albedo(model, params).reshape(-1, 3)
    pose = params.pose
    rot = rotation_from_euler(pose.pitch, pose.yaw, pose.roll)
    cam = verts @ rot.T
    depth = cam[:, 2] + pose.t2d[2]
    uv = pose.f * cam[:, :2] + pose.t2d[:2]
    normals, _ = vertex_normals_forward(verts, model.triangles)
    shaded = albedo * (lighting.sh_basis(normals) @ params.gamma)
    rb, dm = rasterize(model.triangles, uv, depth, shaded.ravel(),
                       width, height)
    return rb, dm, uv


class CoarseObjective:
    """Loss + gradient of the weighted shape objective for a fixed target."""

    def __init__(self, model, target, visibility=None, landmarks=None,
                 weights=None, embedder=None, tz=0.0):
        self.model = model
        self.target = np.asarray(target, dtype=float)
        if self.target.ndim != 3 or self.target.shape[2] != 3:
            raise ValueError("target must be an H x W x 3 image")
        self.height, self.width = self.target.shape[:2]
        if visibility is None:
            visibility = np.ones(self.target.shape[:2], dtype=bool)
        self.visibility = np.asarray(visibility, dtype=bool)
        if self.visibility.shape != self.target.shape[:2]:
            raise ValueError("visibility mask must match the target image")
        self.landmarks = landmarks
        self.weights = weights if weights is not None else LossWeights()
        self.embedder = embedder if embedder is not None else MeanPoolEmbedder()
        self.tz = tz
        self.image_diag = float(np.hypot(self.width, self.height))
        self._vis3 = self.visibility[:, :, None].astype(float)
        self._target_embedding = None

    # ------------------------------------------------------------------
    def _forward(self, vec):
        model = self.model
        params = FaceParams.from_vector(vec, model, tz=self.tz)
        shape = assemble_shape(model, params)
        verts = shape.reshape(-1, 3)

        alb_raw = model.mean_albedo + model.tex_basis @ params.beta_tex
        clamp_active = (alb_raw <= 0.0) | (alb_raw >= 1.0)
        albedo = np.clip(alb_raw, 0.0, 1.0).reshape(-1, 3)

        pose = params.pose
        rot = rotation_from_euler(pose.pitch, pose.yaw, pose.roll)
        cam = verts @ rot.T
        depth = cam[:, 2] + pose.t2d[2]
        uv = pose.f * cam[:, :2] + pose.t2d[:2]

        normals, nctx = vertex_normals_forward(verts, model.triangles)
        basis = lighting.sh_basis(normals)
        gamma9 = params.gamma[:, 0]
        irradiance = basis @ gamma9
        shaded = albedo * irradiance[:, None]

        rb, dm = rasterize(model.triangles, uv, depth, shaded,
                           self.width, self.height)
        return dict(params=params, verts=verts, albedo=albedo,
                    clamp_active=clamp_active, rot=rot, cam=cam, uv=uv,
                    normals=normals, nctx=nctx, basis=basis, gamma9=gamma9,
                    irradiance=irradiance, shaded=shaded, rb=rb, dm=dm)

    def render(self, vec):
        """Render buffer and depth map at the given parameter vector."""
        fw = self._forward(np.asarray(vec, dtype=float))
        return fw["rb"], fw["dm"]

    def coverage_signature(self, vec):
        """Hashable (coverage, triangle assignment, clamp set) fingerprint."""
        fw = self._forward(np.asarray(vec, dtype=float))
        return (fw["rb"].tri_index.tobytes(), fw["clamp_active"].tobytes())

    # ------------------------------------------------------------------
    def evaluate(self, vec, with_grad=True):
        """Return (total, components, grad); grad is None unless requested."""
        vec = np.asarray(vec, dtype=float)
        model = self.model
        w = self.weights
        fw = self._forward(vec)
        params, rb = fw["params"], fw["rb"]
        uv, shaded, albedo = fw["uv"], fw["shaded"], fw["albedo"]
        nv = len(fw["verts"])

        active = rb.coverage & self.visibility
        rows, cols = np.nonzero(active)
        n_active = len(rows)

        # photometric: mean RGB L2 over active pixels
        phot = 0.0
        empty_active = n_active == 0
        g_color = np.zeros_like(rb.color)
        if not empty_active:
            residual = rb.color[rows, cols] - self.target[rows, cols]
            dist = np.linalg.norm(residual, axis=1)
            phot = float(dist.mean())
            if with_grad and w.lambda_phot > 0:
                safe = np.maximum(dist, 1e-12)
                scale = np.where(dist > 1e-12, 1.0 / (safe * n_active), 0.0)
                g_color[rows, cols] += w.lambda_phot * residual * scale[:, None]

        # feature: cosine distance between masked-image embeddings
        feat = 0.0
        if w.lambda_feat > 0:
            if self._target_embedding is None:
                self._target_embedding = self.embedder.embed(
                    self.target * self._vis3)
            masked = rb.color * self._vis3
            emb = self.embedder.embed(masked)
            feat = float(1.0 - np.dot(emb, self._target_embedding))
            if with_grad:
                g_img = self.embedder.embed_backward(
                    masked, -self._target_embedding)
                g_color += w.lambda_feat * g_img * self._vis3

        # landmarks: confidence-weighted mean squared distance / diag^2
        land = 0.0
        g_uv = np.zeros((nv, 2))
        if self.landmarks is not None:
            lm_uv = uv[model.landmark_indices]
            conf = self.landmarks.confidence
            wsum = conf.sum()
            if wsum > 0:
                delta = lm_uv - self.landmarks.points
                land = float((conf * np.sum(delta ** 2, axis=1)).sum()
                             / wsum / self.image_diag ** 2)
                if with_grad and w.lambda_land > 0:
                    g_lm = (w.lambda_land * 2.0 * conf[:, None] * delta
                            / wsum / self.image_diag ** 2)
                    np.add.at(g_uv, model.landmark_indices, g_lm)

        regu = regularization_loss(params, model)

        components = dict(feat=feat, regu=regu, phot=phot, land=land,
                          empty_active=empty_active)
        total = (w.lambda_feat * feat + w.lambda_regu * regu
                 + w.lambda_phot * phot + w.lambda_land * land)
        if not with_grad:
            return total, components, None

        # ---------------- backward ----------------
        g_shaded = np.zeros((nv, 3))
        crows, ccols = np.nonzero(rb.coverage & (np.abs(g_color).sum(axis=2) > 0))
        if len(crows):
            tri_ids = rb.tri_index[crows, ccols]
            vidx = model.triangles[tri_ids]          # (P, 3)
            bw = rb.bary[crows, ccols]               # (P, 3)
            gc = g_color[crows, ccols]               # (P, 3)

            for m in range(3):
                np.add.at(g_shaded, vidx[:, m], bw[:, m, None] * gc)

            # barycentric weights back to projected vertex positions
            g_w = np.stack([np.sum(shaded[vidx[:, m]] * gc, axis=1)
                            for m in range(3)], axis=1)  # (P, 3)
            pa, pb, pc = (uv[vidx[:, m]] for m in range(3))
            p = np.stack([ccols + 0.5, crows + 0.5], axis=1)
            d = ((pb[:, 0] - pa[:, 0]) * (pc[:, 1] - pa[:, 1])
                 - (pb[:, 1] - pa[:, 1]) * (pc[:, 0] - pa[:, 0]))
            g_e = g_w / d[:, None]
            g_d = -np.sum(g_w * bw, axis=1) / d

            ga = (g_e[:, 1, None] * _perp(p - pc) - g_e[:, 2, None] * _perp(p - pb)
                  + g_d[:, None] * _perp(pb - pc))
            gb = (g_e[:, 2, None] * _perp(p - pa) - g_e[:, 0, None] * _perp(p - pc)
                  + g_d[:, None] * _perp(pc - pa))
            gcv = (g_e[:, 0, None] * _perp(p - pb) - g_e[:, 1, None] * _perp(p - pa)
                   + g_d[:, None] * _perp(pa - pb))
            np.add.at(g_uv, vidx[:, 0], ga)
            np.add.at(g_uv, vidx[:, 1], gb)
            np.add.at(g_uv, vidx[:, 2], gcv)

        # shading backward: shaded = albedo * irradiance
        irr = fw["irradiance"]
        g_albedo = g_shaded * irr[:, None]
        g_irr = np.sum(g_shaded * albedo, axis=1)
        g_gamma9 = fw["basis"].T @ g_irr
        g_basis = g_irr[:, None] * fw["gamma9"][None, :]
        jac = lighting.sh_basis_jacobian(fw["normals"])
        g_n = np.einsum("vj,vjd->vd", g_basis, jac)
        g_verts = vertex_normals_backward(fw["nctx"], g_n)

        # texture coefficients (clamped entries get zero gradient)
        g_alb_flat = g_albedo.ravel().copy()
        g_alb_flat[fw["clamp_active"]] = 0.0
        g_tex = model.tex_basis.T @ g_alb_flat

        # projection backward: uv = f * cam_xy + t_xy
        pose = params.pose
        cam = fw["cam"]
        g_f = float(np.sum(g_uv * cam[:, :2]))
        g_txy = g_uv.sum(axis=0)
        g_cam = np.zeros((nv, 3))
        g_cam[:, :2] = pose.f * g_uv
        g_verts += g_cam @ fw["rot"]
        g_rot = g_cam.T @ fw["verts"]
        drs = rotation_jacobian(pose.pitch, pose.yaw, pose.roll)
        g_angles = np.array([np.sum(g_rot * dr) for dr in drs])

        g_shape_flat = g_verts.ravel()
        g_alpha = model.id_basis.T @ g_shape_flat
        g_beta = model.exp_basis.T @ g_shape_flat

        ga_r, gb_r, gt_r = regularization_grad(params, model)
        g_alpha += w.lambda_regu * ga_r
        g_beta += w.lambda_regu * gb_r
        g_tex += w.lambda_regu * gt_r

        grad = np.concatenate([
            g_alpha, g_beta, g_tex, g_gamma9,
            g_angles, [g_f], g_txy,
        ])
        return total, components, grad
