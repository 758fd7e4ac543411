"""Spherical gradient-orientation histograms in the keypoint frame."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import LengthMismatch
from .keypoints import Keypoint
from .lrf import Lrf, SupportSet, curvature_class, gauss_weights, sphere_offsets
from .sdf import SdfSubmap

ZERO_GRADIENT = 1e-12


@dataclass(frozen=True)
class DescriptorParams:
    n_div: int = 10
    alpha_dist: float = 1e-7
    alpha_class: float = 1e-5
    r_f: float = 15
    sigma_desc: float = 15
    # "hessian" or "structure": which eigenvalues decide the curvature class
    class_source: str = "hessian"
    # "effective" divides by the solid angle seen through the soft-binning
    # kernel, "geometric" by the exact bin solid angle
    solid_angle: str = "effective"

    @property
    def length(self) -> int:
        return descriptor_length(self.n_div)


def descriptor_length(n_div: int) -> int:
    return 2 * n_div * n_div + 2


@dataclass
class Descriptor:
    values: np.ndarray
    keypoint_index: tuple
    lrf_ordinal: int
    position: np.ndarray

    def __len__(self):
        return len(self.values)


def _bilinear_coords(angle, lo, step, n, wrap):
    """Lower bin, upper bin and upper weight for bin-centre interpolation."""
    u = (angle - lo) / step - 0.5
    i0 = np.floor(u).astype(np.int64)
    f = u - i0
    if wrap:
        return i0 % n, (i0 + 1) % n, f
    below = u < 0
    above = u > n - 1
    i0 = np.where(below, 0, np.where(above, n - 1, i0))
    f = np.where(below | above, 0.0, f)
    return i0, np.minimum(i0 + 1, n - 1), f


def spherical_angles(v: np.ndarray):
    """Azimuth in [-pi, pi] and polar (elevation) in [-pi/2, pi/2]."""
    azimuth = np.arctan2(v[:, 1], v[:, 0])
    polar = np.arctan2(v[:, 2], np.hypot(v[:, 0], v[:, 1]))
    return azimuth, polar


def deposit(vectors: np.ndarray, n_div: int) -> np.ndarray:
    """Bilinear soft-binned magnitude histogram, shape ``(2 n_div, n_div)``.

    Azimuth wraps around; polar interpolation clamps to the boundary bins.
    Zero vectors contribute nothing.
    """
    n_az, n_pol = 2 * n_div, n_div
    step = np.pi / n_div
    v = np.asarray(vectors, dtype=np.float64).reshape(-1, 3)
    mag = np.linalg.norm(v, axis=1)
    keep = mag >= ZERO_GRADIENT
    v, mag = v[keep], mag[keep]
    az, pol = spherical_angles(v)
    i0, i1, fa = _bilinear_coords(az, -np.pi, step, n_az, wrap=True)
    j0, j1, fp = _bilinear_coords(pol, -np.pi / 2, step, n_pol, wrap=False)
    size = n_az * n_pol
    hist = np.zeros(size)
    hist += np.bincount(i0 * n_pol + j0, mag * (1 - fa) * (1 - fp), size)
    hist += np.bincount(i0 * n_pol + j1, mag * (1 - fa) * fp, size)
    hist += np.bincount(i1 * n_pol + j0, mag * fa * (1 - fp), size)
    hist += np.bincount(i1 * n_pol + j1, mag * fa * fp, size)
    return hist.reshape(n_az, n_pol)


def _cos_moment(alpha, beta, a, b):
    """Integral of (alpha + beta t) cos t over [a, b]."""

    def prim(t):
        return alpha * np.sin(t) + beta * (np.cos(t) + t * np.sin(t))

    return prim(b) - prim(a)


@lru_cache(maxsize=16)
def polar_solid_angles(n_div: int, mode: str = "effective") -> np.ndarray:
    """Solid angle per polar band for a single azimuth bin (steradians)."""
    step = np.pi / n_div
    edges = -np.pi / 2 + step * np.arange(n_div + 1)
    if mode == "geometric":
        return step * (np.sin(edges[1:]) - np.sin(edges[:-1]))
    if mode != "effective":
        raise ValueError(f"unknown solid angle mode {mode!r}")
    centers = edges[:-1] + step / 2
    area = np.zeros(n_div)
    area[0] += _cos_moment(1.0, 0.0, -np.pi / 2, centers[0])
    area[-1] += _cos_moment(1.0, 0.0, centers[-1], np.pi / 2)
    for j in range(n_div - 1):
        a, b = centers[j], centers[j + 1]
        # weight of bin j falls linearly from 1 at a to 0 at b, bin j+1 rises
        area[j] += _cos_moment(b / step, -1.0 / step, a, b)
        area[j + 1] += _cos_moment(-a / step, 1.0 / step, a, b)
    return step * area


def histogram(support: SupportSet, lrf: Lrf, n_div: int, solid_angle: str = "effective") -> np.ndarray:
    """Normalised flat histogram (azimuth-major) of the support in the LRF."""
    g_f = support.gradients @ lrf.rotation.T
    hist = deposit(g_f, n_div)
    hist /= max(len(support), 1)
    hist /= polar_solid_angles(n_div, solid_angle)[None, :]
    return hist.ravel()


def mean_support_distance(sdf: SdfSubmap, kp: Keypoint, r_f: float = 15, sigma_desc: float = 15) -> float:
    """Gaussian-weighted mean SDF over the stored voxels of the support sphere."""
    offsets = sphere_offsets(float(r_f))
    vals, found = sdf.voxels.get(kp.voxel + offsets)
    if not found.any():
        return 0.0
    w = gauss_weights(offsets[found], sigma_desc)
    return float(np.sum(w * vals[found, 0]) / np.sum(w))


def describe(
    support: SupportSet,
    lrf: Lrf,
    sdf: SdfSubmap,
    kp: Keypoint,
    params: DescriptorParams = DescriptorParams(),
    b_dist: float | None = None,
) -> Descriptor:
    """Histogram followed by the weighted distance and curvature-class slots.

    ``b_dist`` may be passed in to share it between the LRFs of one keypoint.
    """
    if params.n_div < 2:
        raise ValueError("n_div must be at least 2")
    hist = histogram(support, lrf, params.n_div, params.solid_angle)
    if b_dist is None:
        b_dist = mean_support_distance(sdf, kp, params.r_f, params.sigma_desc)
    b_class = curvature_class(kp, params.class_source, lrf.eigenvalues)
    values = np.concatenate([hist, [params.alpha_dist * b_dist, params.alpha_class * b_class]])
    return Descriptor(values, kp.index, lrf.ordinal, np.asarray(kp.position, dtype=np.float64))


def descriptor_distance(a, b) -> float:
    """Euclidean distance between two descriptors (or raw vectors)."""
    va = np.asarray(a.values if isinstance(a, Descriptor) else a, dtype=np.float64)
    vb = np.asarray(b.values if isinstance(b, Descriptor) else b, dtype=np.float64)
    if va.shape != vb.shape:
        raise LengthMismatch(f"descriptor lengths differ: {va.shape} vs {vb.shape}")
    return float(np.linalg.norm(va - vb))
