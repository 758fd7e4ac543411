"""Determinant-of-Hessian keypoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import NEIGHBOR_OFFSETS, SparseField, index_to_point
from .filtering import HESSIAN_COMPONENTS
from .sdf import SdfSubmap


@dataclass(frozen=True)
class Keypoint:
    index: tuple
    position: np.ndarray
    response: float
    sdf_value: float
    hessian_eigs: np.ndarray  # descending

    @property
    def voxel(self) -> np.ndarray:
        return np.asarray(self.index, dtype=np.int64)


def hessian_stack(hessian: dict, indices) -> np.ndarray:
    """``(N, 3, 3)`` Hessians assembled from component fields at ``indices``."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
    H = np.empty((len(idx), 3, 3))
    for name in HESSIAN_COMPONENTS:
        vals, _ = hessian[name].get(idx)
        a, b = "xyz".index(name[0]), "xyz".index(name[1])
        H[:, a, b] = vals
        H[:, b, a] = vals
    return H


def doh_response(hessian: dict) -> SparseField:
    """Determinant of the assembled symmetric Hessian on the common domain."""
    idx = hessian["xx"].indices()
    for name in HESSIAN_COMPONENTS[1:]:
        idx = idx[hessian[name].contains(idx)]
    vals = {name: hessian[name].get(idx)[0] for name in HESSIAN_COMPONENTS}
    xx, xy, xz, yy, yz, zz = (vals[n] for n in HESSIAN_COMPONENTS)
    det = xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz)
    return SparseField.from_arrays(idx, det)


def extremum_mask(doh: SparseField):
    """Indices, values and strict-26-neighbourhood-extremum flags of a field."""
    idx, vals = doh.to_arrays()
    is_max = np.ones(len(idx), dtype=bool)
    is_min = np.ones(len(idx), dtype=bool)
    for off in NEIGHBOR_OFFSETS:
        nb, found = doh.get(idx + off)
        is_max &= found & (vals > nb)
        is_min &= found & (vals < nb)
    return idx, vals, is_max | is_min


def detect_extrema(doh: SparseField, sdf: SdfSubmap | None = None, hessian: dict | None = None) -> list[Keypoint]:
    """Voxels whose response is strictly above or below all 26 stored neighbours.

    ``sdf`` and ``hessian`` fill in positions, distance values and Hessian
    eigenvalues; without them positions assume a unit voxel and the other
    fields are NaN.
    """
    idx, vals, ext = extremum_mask(doh)
    idx, vals = idx[ext], vals[ext]
    vs = sdf.voxel_size if sdf is not None else 1.0
    pos = index_to_point(idx, vs)
    if sdf is not None:
        dist = sdf.voxels.get(idx)[0][:, 0]
    else:
        dist = np.full(len(idx), np.nan)
    if hessian is not None:
        eigs = np.linalg.eigvalsh(hessian_stack(hessian, idx))[:, ::-1]
    else:
        eigs = np.full((len(idx), 3), np.nan)
    return [
        Keypoint(tuple(int(c) for c in i), p, float(v), float(d), e.copy())
        for i, p, v, d, e in zip(idx, pos, vals, dist, eigs)
    ]


def select_top_n(kps, n: int) -> list[Keypoint]:
    """The ``n`` strongest keypoints by |response|; ties broken by voxel index."""
    if n <= 0:
        raise ValueError("n must be positive")
    ordered = sorted(kps, key=lambda kp: (-abs(kp.response), kp.index))
    return ordered[:n]


def filter_by_surface_distance(kps, d_lim: float) -> list[Keypoint]:
    """Keep keypoints strictly closer than ``d_lim`` to a surface."""
    if not d_lim > 0:
        raise ValueError("d_lim must be positive")
    return [kp for kp in kps if abs(kp.sdf_value) < d_lim]
