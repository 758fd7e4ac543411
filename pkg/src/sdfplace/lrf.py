"""Local reference frames from the gradient structure tensor."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateTensor, InsufficientSupport
from .grid import SparseField
from .keypoints import Keypoint

MIN_SUPPORT = 32
DEGENERACY_RTOL = 1e-9


@lru_cache(maxsize=8)
def sphere_offsets(radius: float) -> np.ndarray:
    """Integer offsets with Euclidean norm <= radius, lexicographic order."""
    r = int(np.floor(radius))
    ax = np.arange(-r, r + 1)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    out = g[np.einsum("ij,ij->i", g, g) <= radius * radius]
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SupportSample:
    offset: np.ndarray
    g: np.ndarray
    gauss_weight: float


@dataclass
class SupportSet:
    """Gradient samples in a spherical support around a keypoint.

    ``gradients`` are already multiplied by ``weights``.
    """

    offsets: np.ndarray
    gradients: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.offsets)

    def __iter__(self):
        for o, g, w in zip(self.offsets, self.gradients, self.weights):
            yield SupportSample(o, g, float(w))

    @classmethod
    def from_samples(cls, samples) -> SupportSet:
        samples = list(samples)
        return cls(
            np.array([s.offset for s in samples], dtype=np.float64).reshape(-1, 3),
            np.array([s.g for s in samples], dtype=np.float64).reshape(-1, 3),
            np.array([s.gauss_weight for s in samples], dtype=np.float64),
        )


def gauss_weights(offsets, sigma_desc: float) -> np.ndarray:
    o = np.asarray(offsets, dtype=np.float64)
    return np.exp(-np.einsum("ij,ij->i", o, o) / (2.0 * sigma_desc**2))


def collect_support(
    gradients: SparseField, kp: Keypoint, r_f: float = 15, sigma_desc: float = 15, min_samples: int = MIN_SUPPORT
) -> SupportSet:
    """Stored gradients within ``r_f`` voxels of the keypoint, Gaussian weighted."""
    if not (r_f > 0 and sigma_desc > 0):
        raise ValueError("r_f and sigma_desc must be positive")
    offsets = sphere_offsets(float(r_f))
    raw, found = gradients.get(kp.voxel + offsets)
    if found.sum() < min_samples:
        raise InsufficientSupport(f"{int(found.sum())} support voxels at {kp.index}")
    offsets = offsets[found]
    w = gauss_weights(offsets, sigma_desc)
    return SupportSet(offsets.astype(np.float64), raw[found] * w[:, None], w)


def structure_tensor(support: SupportSet) -> np.ndarray:
    """Sum of outer products of the weighted gradients."""
    g = support.gradients
    if len(g) == 0:
        raise ValueError("empty support")
    return g.T @ g


@dataclass(frozen=True)
class Lrf:
    """Rows of ``rotation`` are the frame axes a1, a2, a3 (feature_from_submap)."""

    rotation: np.ndarray
    eigenvalues: np.ndarray
    ambiguity_count: int
    ordinal: int = 0


def sign_score(gradients: np.ndarray, axis: np.ndarray) -> float:
    """Signed over absolute projection sum, in [-1, 1]; 0 for a null support."""
    proj = gradients @ axis
    denom = np.abs(proj).sum()
    return float(proj.sum() / denom) if denom > 0 else 0.0


def _signs(s: float, k_axis: float):
    if s >= k_axis:
        return (1.0,)
    if s <= -k_axis:
        return (-1.0,)
    return (1.0, -1.0)


def sorted_eigen(S: np.ndarray):
    """Eigenvalues (descending) and matching eigenvectors as columns."""
    evals, evecs = np.linalg.eigh(S)
    return evals[::-1], evecs[:, ::-1]


def assign_lrfs(S: np.ndarray, support: SupportSet, k_axis: float = 0.5) -> list[Lrf]:
    """One, two or four right-handed frames from the structure tensor.

    The first and third eigenvectors are each signed by the projection score
    of the support gradients; scores inside ``(-k_axis, k_axis)`` keep both
    signs. The middle axis completes the frame as ``a3 x a1``.
    """
    if not 0 < k_axis < 1:
        raise ValueError("k_axis must lie in (0, 1)")
    evals, evecs = sorted_eigen(np.asarray(S, dtype=np.float64))
    l1, l2, l3 = evals
    if l1 <= 0 or (l1 - l2) < DEGENERACY_RTOL * l1 or (l2 - l3) < DEGENERACY_RTOL * l1:
        raise DegenerateTensor(f"eigenvalues {evals}")
    v1, v3 = evecs[:, 0], evecs[:, 2]
    g = support.gradients
    signs1 = _signs(sign_score(g, v1), k_axis)
    signs3 = _signs(sign_score(g, v3), k_axis)
    count = len(signs1) * len(signs3)
    frames = []
    for s1 in signs1:
        for s3 in signs3:
            a1, a3 = s1 * v1, s3 * v3
            a2 = np.cross(a3, a1)
            R = np.stack([a1, a2, a3])
            frames.append(Lrf(R, np.maximum(evals, 0.0), count, len(frames)))
    return frames


def curvature_class(kp: Keypoint, source: str = "hessian", structure_eigenvalues=None) -> int:
    """Number of strictly positive eigenvalues at the keypoint.

    ``source="hessian"`` uses the Hessian eigenvalues stored on the keypoint;
    ``source="structure"`` uses the structure-tensor eigenvalues of its LRF.
    """
    if source == "hessian":
        eigs = kp.hessian_eigs
    elif source == "structure":
        eigs = structure_eigenvalues
    else:
        raise ValueError(f"unknown curvature source {source!r}")
    return int(np.sum(np.asarray(eigs) > 0))
