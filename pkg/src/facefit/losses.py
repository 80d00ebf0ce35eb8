"""The four-part weighted coarse-fitting loss and its components.

Default weights follow the published setting: feature 0.2, regularization
3.6e-4, photometric 1.4, landmark 1.6e-3.  The photometric residual is the
L2 norm across RGB averaged over active (covered and visible) pixels, so
pixels outside the visibility mask can never influence the loss.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateEmbeddingError, DomainError, ShapeMismatchError)

DEFAULT_LAMBDA_FEAT = 0.2
DEFAULT_LAMBDA_REGU = 3.6e-4
DEFAULT_LAMBDA_PHOT = 1.4
DEFAULT_LAMBDA_LAND = 1.6e-3

N_LANDMARKS = 68


@dataclass
class LossWeights:
    lambda_feat: float = DEFAULT_LAMBDA_FEAT
    lambda_regu: float = DEFAULT_LAMBDA_REGU
    lambda_phot: float = DEFAULT_LAMBDA_PHOT
    lambda_land: float = DEFAULT_LAMBDA_LAND

    def __post_init__(self):
        for name in ("lambda_feat", "lambda_regu", "lambda_phot", "lambda_land"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")


@dataclass
class LandmarkSet:
    """68 landmark pixel positions with per-point confidence in [0, 1]."""

    points: np.ndarray
    confidence: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(self.points) != N_LANDMARKS:
            raise ValueError(f"expected {N_LANDMARKS} landmarks, got {len(self.points)}")
        if self.confidence is None:
            self.confidence = np.ones(N_LANDMARKS)
        self.confidence = np.asarray(self.confidence, dtype=float).ravel()
        if self.confidence.size != N_LANDMARKS:
            raise ValueError("confidence length must be 68")
        if self.confidence.min() < 0 or self.confidence.max() > 1:
            raise ValueError("confidence weights must lie in [0, 1]")


def _image_of(render):
    return render.color if hasattr(render, "color") else np.asarray(render, float)


def photometric_loss(render, target, visibility=None, return_flag=False):
    """Mean per-pixel RGB L2 distance over covered-and-visible pixels.

    Returns 0 when no pixel is active; pass return_flag=True to also get
    the empty-active-set flag.
    """
    img = _image_of(render)
    target = np.asarray(target, dtype=float)
    if img.shape != target.shape:
        raise ShapeMismatchError(f"render {img.shape} vs target {target.shape}")
    active = np.ones(img.shape[:2], dtype=bool)
    if hasattr(render, "coverage"):
        active &= render.coverage
    if visibility is not None:
        visibility = np.asarray(visibility, dtype=bool)
        if visibility.shape != img.shape[:2]:
            raise ShapeMismatchError(
                f"visibility {visibility.shape} vs image {img.shape[:2]}")
        active &= visibility
    if not active.any():
        return (0.0, True) if return_flag else 0.0
    dist = np.linalg.norm(img[active] - target[active], axis=1)
    loss = float(dist.mean())
    return (loss, False) if return_flag else loss


def landmark_loss(projected, target, image_diag):
    """Confidence-weighted mean squared pixel distance, scaled by diag^-2."""
    projected = np.asarray(projected, dtype=float).reshape(-1, 2)
    if len(projected) != len(target.points):
        raise ShapeMismatchError(
            f"{len(projected)} projected vs {len(target.points)} target landmarks")
    wsum = target.confidence.sum()
    if wsum == 0:
        return 0.0
    d2 = np.sum((projected - target.points) ** 2, axis=1)
    return float((target.confidence * d2).sum() / wsum / image_diag ** 2)


class MeanPoolEmbedder:
    """Deterministic stand-in identity embedding: 8x8 mean-pooled grayscale,
    unit-normalized.  Safe for concurrent read-only use."""

    def __init__(self, grid=8):
        self.grid = grid

    def _pool(self, image):
        img = _image_of(image)
        gray = img.mean(axis=2)
        h, w = gray.shape
        rb = np.linspace(0, h, self.grid + 1).astype(int)[:-1]
        cb = np.linspace(0, w, self.grid + 1).astype(int)[:-1]
        pooled = np.add.reduceat(np.add.reduceat(gray, rb, axis=0), cb, axis=1)
        rl = np.diff(np.append(rb, h))
        cl = np.diff(np.append(cb, w))
        return (pooled / np.outer(rl, cl)).ravel()

    def embed(self, image):
        e = self._pool(image)
        norm = np.linalg.norm(e)
        if norm < 1e-12:
            raise DegenerateEmbeddingError("zero-norm embedding")
        return e / norm

    def embed_backward(self, image, grad_embedding):
        """d(embedding)/d(pixels) applied to a cotangent; returns H x W x 3."""
        img = _image_of(image)
        e = self._pool(image)
        norm = np.linalg.norm(e)
        if norm < 1e-12:
            raise DegenerateEmbeddingError("zero-norm embedding")
        u = e / norm
        g_raw = (grad_embedding - u * np.dot(grad_embedding, u)) / norm
        h, w = img.shape[:2]
        rb = np.linspace(0, h, self.grid + 1).astype(int)
        cb = np.linspace(0, w, self.grid + 1).astype(int)
        g_img = np.zeros((h, w))
        g_cells = g_raw.reshape(self.grid, self.grid)
        for i in range(self.grid):
            for j in range(self.grid):
                area = (rb[i + 1] - rb[i]) * (cb[j + 1] - cb[j])
                g_img[rb[i]:rb[i + 1], cb[j]:cb[j + 1]] = g_cells[i, j] / area
        return np.repeat(g_img[:, :, None], 3, axis=2) / 3.0


def feature_loss(render, target, embedder=None):
    """1 - cosine similarity of the two image embeddings; lies in [0, 2]."""
    embedder = embedder if embedder is not None else MeanPoolEmbedder()
    a = np.asarray(embedder.embed(render), dtype=float)
    b = np.asarray(embedder.embed(target), dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise DegenerateEmbeddingError("zero-norm embedding")
    return float(1.0 - np.dot(a / na, b / nb))


def shape_loss(components, weights=None):
    """Weighted sum of (feature, regularization, photometric, landmark)."""
    weights = weights if weights is not None else LossWeights()
    feat, regu, phot, land = (float(c) for c in components)
    for name, val in (("feature", feat), ("regularization", regu),
                      ("photometric", phot), ("landmark", land)):
        if not np.isfinite(val):
            raise DomainError(f"{name} component must be finite")
        if val < 0:
            raise DomainError(f"{name} component must be non-negative")
    return (weights.lambda_feat * feat + weights.lambda_regu * regu
            + weights.lambda_phot * phot + weights.lambda_land * land)
