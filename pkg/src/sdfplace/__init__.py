"""Place recognition between signed distance field submaps.

Keypoints are determinant-of-Hessian extrema of the distance field, described
by gradient-orientation histograms in a local frame, matched by RANSAC and
verified by how well each submap's surface lies in the other's field.
"""

from .errors import ComputationError, InputError, SdfPlaceError
from .fitness import Decision, MatchResult, evaluate_fitness
from .grid import SparseField
from .io import load_submap, save_submap
from .pipeline import (
    Features,
    PipelineConfig,
    PrPoint,
    ablate_freespace,
    evaluate_collection,
    extract_features,
    match_pair,
)
from .scene import Box, Plane, Sphere, build_synthetic_scene, carve_submaps, overlap_volume
from .sdf import SdfSubmap, compute_esdf, extract_isosurface, integrate_pointcloud, sample_trilinear
from .transform import RigidTransform

__version__ = "0.1.0"
