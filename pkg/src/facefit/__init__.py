"""Single-image 3D face reconstruction toolkit.

Fits a linear morphable face model plus a bump-map detail layer to a
photograph by gradient-based analysis-by-synthesis, with occlusion-aware
losses driven by face-parsing label maps.
"""

from .bump import (BumpMap, bump_from_depths, decode_phi, detailed_depth,
                   encode_phi, geo_loss, mesh_from_depth)
from .camera import (Pose, ProjectionMatrix, camera_depths, project_vertices,
                     rotation_from_euler)
from .edges import (CoordinateSet, DistanceField, EdgeLinesMap,
                    adversarial_loss, discriminator_loss, distance_field,
                    edge_mse, ground_truth_label)
from .fit import (AdamState, FitConfig, FitReport, adam_step, fit_coarse,
                  fit_detail)
from .lighting import ShCoefficients, sh_basis, shade_vertices
from .losses import (LandmarkSet, LossWeights, MeanPoolEmbedder, feature_loss,
                     landmark_loss, photometric_loss, shape_loss)
from .mesh import Mesh
from .morphable import (FaceParams, MorphableModel, assemble_albedo,
                        assemble_shape, load_model, make_toy_model,
                        regularization_loss, save_model)
from .objective import CoarseObjective, render_params
from .parsing import ParsingMap, fuse_parsing_edges, visibility_mask
from .raster import DepthMap, RenderBuffer, rasterize, vertex_normals

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
