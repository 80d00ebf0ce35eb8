"""Edge-lines effectiveness scoring: distance field, ground-truth label rule,
discriminator / adversarial losses and the edge-map MSE.

The label rule reads: compute, over the coordinate set, the fraction of
points whose distance to the nearest ground-truth edge pixel is below the
distance threshold; the map counts as effective (label 1) when that
fraction reaches the probability threshold.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (EmptyCoordinateSetError, EmptyEdgeSetError,
                     SaturationError, ShapeMismatchError)

LOG_CLAMP_EPS = 1e-7


@dataclass
class EdgeLinesMap:
    """Per-pixel edge probability in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("edge map must be 2-D")
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise ValueError("edge probabilities must lie in [0, 1]")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass
class CoordinateSet:
    """Pixel positions (x, y) sampled from a generated edge map."""

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, 2)

    def __len__(self):
        return len(self.coords)


@dataclass
class DistanceField:
    """Per-pixel Euclidean distance to the nearest ground-truth edge pixel."""

    dist: np.ndarray

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=float)
        if self.dist.ndim != 2:
            raise ValueError("distance field must be 2-D")

    def at(self, coords):
        c = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        return self.dist[c[:, 1], c[:, 0]]


def distance_field(gt_edges, threshold=0.5):
    """Exact Euclidean distance transform of the thresholded edge set."""
    values = gt_edges.values if isinstance(gt_edges, EdgeLinesMap) else np.asarray(gt_edges, float)
    edge = values >= threshold
    if not edge.any():
        raise EmptyEdgeSetError("no pixel reaches the edge threshold")
    dist = ndimage.distance_transform_edt(~edge)
    return DistanceField(dist)


def ground_truth_label(coords, field, theta, delta):
    """1 when the fraction of coordinates within theta of an edge is >= delta."""
    pts = coords.coords if isinstance(coords, CoordinateSet) else np.asarray(coords, np.int64).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyCoordinateSetError("empty coordinate set: fraction undefined")
    h, w = field.dist.shape
    if pts[:, 0].min() < 0 or pts[:, 0].max() >= w or pts[:, 1].min() < 0 or pts[:, 1].max() >= h:
        raise ValueError("coordinate outside map bounds")
    frac = float(np.mean(field.dist[pts[:, 1], pts[:, 0]] < theta))
    return 0 if frac < delta else 1


def _as_batch(x):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    return arr


def discriminator_loss(d_gen, d_gt_label, d_real):
    """log(1 - |d_gen - label|) - log(d_real), averaged over a batch.

    Saturating log arguments (|d_gen - label| = 1 or d_real = 0) raise
    SaturationError carrying the value computed with the 1e-7 clamp.
    """
    g = _as_batch(d_gen)
    lab = np.broadcast_to(_as_batch(d_gt_label), g.shape)
    real = np.broadcast_to(_as_batch(d_real), g.shape)
    inner = 1.0 - np.abs(g - lab)
    clamped = float(np.mean(np.log(np.maximum(inner, LOG_CLAMP_EPS))
                            - np.log(np.maximum(real, LOG_CLAMP_EPS))))
    if inner.min() <= 0 or real.min() <= 0:
        raise SaturationError("discriminator loss saturated (log of 0)", clamped)
    return float(np.mean(np.log(inner) - np.log(real)))


def adversarial_loss(d_gen):
    """log(1 - d_gen), averaged over a batch; saturates at d_gen >= 1."""
    g = _as_batch(d_gen)
    inner = 1.0 - g
    clamped = float(np.mean(np.log(np.maximum(inner, LOG_CLAMP_EPS))))
    if inner.min() <= 0:
        raise SaturationError("adversarial loss saturated (d_gen >= 1)", clamped)
    return float(np.mean(np.log(inner)))


def edge_mse(estimated, truth):
    """Mean squared per-pixel difference between two edge maps."""
    est = estimated.values if isinstance(estimated, EdgeLinesMap) else np.asarray(estimated, float)
    tru = truth.values if isinstance(truth, EdgeLinesMap) else np.asarray(truth, float)
    if est.shape != tru.shape:
        raise ShapeMismatchError(f"edge maps: {est.shape} vs {tru.shape}")
    return float(np.mean((est - tru) ** 2))
