"""Indexed triangle mesh with per-vertex color and normal."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    colors: np.ndarray = None
    normals: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        n = len(self.vertices)
        if self.colors is None:
            self.colors = np.full((n, 3), 0.7)
        self.colors = np.asarray(self.colors, dtype=float).reshape(-1, 3)
        if self.normals is None:
            self.normals = np.tile([0.0, 0.0, 1.0], (n, 1))
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        if len(self.colors) != n or len(self.normals) != n:
            raise ValueError("colors and normals must match vertex count")
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= n):
            raise ValueError("triangle index out of range")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)
