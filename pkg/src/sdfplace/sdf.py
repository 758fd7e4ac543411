"""Sparse signed distance field submaps.

Covers TSDF fusion of range data by projective ray casting, wavefront ESDF
extension, zero-crossing extraction and trilinear sampling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput
from .grid import (
    NEIGHBOR_OFFSETS,
    SparseField,
    index_to_point,
    key_to_voxel,
    point_to_index,
    voxel_key,
)
from .transform import RigidTransform

log = logging.getLogger(__name__)

MAX_WEIGHT = 1e4
DEFAULT_VOXEL_SIZE = 0.05

_FACE_OFFSETS = np.eye(3, dtype=np.int64)


@dataclass
class SdfSubmap:
    """A sparse voxel grid of (distance, weight) pairs.

    ``pose`` is the submap frame expressed in the world frame (world_from_submap).
    Membership in ``voxels`` defines the observed set.
    """

    voxel_size: float = DEFAULT_VOXEL_SIZE
    truncation: float = 3 * DEFAULT_VOXEL_SIZE
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    id: str = "0"
    voxels: SparseField = field(default_factory=lambda: SparseField((2,)))
    has_esdf: bool = False

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")

    def __len__(self):
        return len(self.voxels)

    def arrays(self):
        """Sorted ``(indices, distances, weights)`` of every stored voxel."""
        idx, vals = self.voxels.to_arrays()
        return idx, vals[:, 0], vals[:, 1]

    def positions(self) -> np.ndarray:
        return index_to_point(self.voxels.indices(), self.voxel_size)

    def distance_field(self) -> SparseField:
        idx, d, _ = self.arrays()
        return SparseField.from_arrays(idx, d)

    def set_voxels(self, indices, distances, weights=1.0):
        indices = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        d = np.broadcast_to(np.asarray(distances, np.float64), (len(indices),))
        w = np.broadcast_to(np.asarray(weights, np.float64), (len(indices),))
        if np.any(w < 0):
            raise ValueError("voxel weights must be nonnegative")
        self.voxels.set(indices, np.stack([d, w], axis=1))

    def copy(self) -> SdfSubmap:
        return SdfSubmap(
            self.voxel_size, self.truncation, self.pose, self.id, self.voxels.copy(), self.has_esdf
        )


@dataclass
class IsoSurfaceCloud:
    points: np.ndarray
    no_surface: bool = False

    def __len__(self):
        return len(self.points)


def integrate_pointcloud(submap: SdfSubmap, sensor_origin, points, max_samples=2_000_000) -> SdfSubmap:
    """Fuse one range scan into ``submap`` in place (and return it).

    ``sensor_origin`` and ``points`` are in the submap frame. Each ray updates
    voxels within ``truncation`` of the hit by projective distance and every
    voxel between the sensor and the band by ``+truncation``.
    """
    vs, trunc = submap.voxel_size, submap.truncation
    if trunc < 2 * vs:
        raise ValueError("truncation must be at least two voxels")
    origin = np.asarray(sensor_origin, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(origin)):
        raise ValueError("sensor origin must be finite")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    finite = np.all(np.isfinite(pts), axis=1)
    if not finite.all():
        log.warning("rejected %d non-finite points", int((~finite).sum()))
        pts = pts[finite]
    if len(pts) == 0:
        return submap

    rays = pts - origin
    depth = np.linalg.norm(rays, axis=1)
    keep = depth > 1e-9
    rays, depth = rays[keep] / depth[keep, None], depth[keep]
    step = 0.25 * vs
    n_steps = np.ceil((depth + trunc) / step).astype(np.int64) + 1

    all_keys, all_d = [], []
    start = 0
    while start < len(depth):
        stop = start + 1
        total = n_steps[start]
        while stop < len(depth) and total + n_steps[stop] <= max_samples:
            total += n_steps[stop]
            stop += 1
        ray_id = np.repeat(np.arange(start, stop), n_steps[start:stop])
        first = np.concatenate([[0], np.cumsum(n_steps[start:stop])[:-1]])
        t = (np.arange(len(ray_id)) - np.repeat(first, n_steps[start:stop])) * step
        t = np.minimum(t, depth[ray_id] + trunc)
        idx = point_to_index(origin + t[:, None] * rays[ray_id], vs)
        new_voxel = np.ones(len(idx), dtype=bool)
        new_voxel[1:] = np.any(idx[1:] != idx[:-1], axis=1) | (ray_id[1:] != ray_id[:-1])
        idx, ray_id = idx[new_voxel], ray_id[new_voxel]
        centers = index_to_point(idx, vs)
        d = depth[ray_id] - np.einsum("ij,ij->i", centers - origin, rays[ray_id])
        band = d >= -trunc
        all_keys.append(voxel_key(idx[band]))
        all_d.append(np.minimum(d[band], trunc))
        start = stop

    keys = np.concatenate(all_keys)
    d = np.concatenate(all_d)
    ukeys, inv = np.unique(keys, return_inverse=True)
    inv = inv.reshape(-1)
    sum_d = np.bincount(inv, weights=d)
    count = np.bincount(inv).astype(np.float64)
    uidx = key_to_voxel(ukeys)
    old, found = submap.voxels.get(uidx)
    w_old = np.where(found, old[:, 1], 0.0)
    d_old = np.where(found, old[:, 0], 0.0)
    w_new = w_old + count
    d_new = (w_old * d_old + sum_d) / w_new
    submap.set_voxels(uidx, d_new, np.minimum(w_new, MAX_WEIGHT))
    submap.has_esdf = False
    return submap


def _neighbor_table(indices: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Row index (into ``indices``) of each offset neighbour, -1 if unstored."""
    rows = SparseField.from_arrays(indices, np.arange(len(indices)), dtype=np.int64)
    table = np.full((len(indices), len(offsets)), -1, dtype=np.int64)
    for n, off in enumerate(offsets):
        r, found = rows.get(indices + off)
        table[found, n] = r[found]
    return table


def _zero_crossings(indices, dist, voxel_size):
    """Sub-voxel zero crossings along grid edges between stored voxels.

    Returns ``(points, voxel_a, voxel_b)`` with row indices of the edge
    endpoints; voxels holding an exact zero emit their own centre once.
    """
    table = _neighbor_table(indices, _FACE_OFFSETS)
    pts, rows_a, rows_b = [], [], []
    centers = index_to_point(indices, voxel_size)
    for axis in range(3):
        nb = table[:, axis]
        a = np.nonzero(nb >= 0)[0]
        b = nb[a]
        da, db = dist[a], dist[b]
        cross = ((da < 0) & (db > 0)) | ((da > 0) & (db < 0))
        a, b, da, db = a[cross], b[cross], da[cross], db[cross]
        t = da / (da - db)
        pts.append(centers[a] + t[:, None] * (centers[b] - centers[a]))
        rows_a.append(a)
        rows_b.append(b)
    zero = np.nonzero(dist == 0)[0]
    pts.append(centers[zero])
    rows_a.append(zero)
    rows_b.append(zero)
    return np.concatenate(pts), np.concatenate(rows_a), np.concatenate(rows_b)


def compute_esdf(tsdf: SdfSubmap, max_distance: float | None = None) -> SdfSubmap:
    """Euclidean distance extension of a TSDF over its observed voxels.

    Brushfire propagation over the 26-connected stored grid: every voxel
    carries the nearest zero-crossing point found so far ("site"), and
    neighbours adopt a site when it is closer than their own. Signs of the
    input are preserved; magnitudes saturate at ``max_distance`` (default
    15 voxels).
    """
    if len(tsdf) == 0:
        raise EmptyInput("cannot compute an ESDF of an empty submap")
    vs = tsdf.voxel_size
    if max_distance is None:
        max_distance = 15 * vs
    idx, dist, weight = tsdf.arrays()
    centers = index_to_point(idx, vs)
    sites, rows_a, rows_b = _zero_crossings(idx, dist, vs)

    n = len(idx)
    best = np.full(n, np.inf)
    site_of = np.full(n, -1, dtype=np.int64)
    rows = np.concatenate([rows_a, rows_b])
    site_ids = np.tile(np.arange(len(sites)), 2)
    d = np.linalg.norm(centers[rows] - sites[site_ids], axis=1)
    order = np.lexsort((site_ids, d, rows))
    rows, site_ids, d = rows[order], site_ids[order], d[order]
    first = np.ones(len(rows), dtype=bool)
    first[1:] = rows[1:] != rows[:-1]
    best[rows[first]] = d[first]
    site_of[rows[first]] = site_ids[first]

    table = _neighbor_table(idx, NEIGHBOR_OFFSETS)
    limit = max_distance + 2 * vs
    active = site_of >= 0
    while active.any():
        changed = np.zeros(n, dtype=bool)
        for k in range(table.shape[1]):
            nb = table[:, k]
            src = np.nonzero((nb >= 0) & active[np.maximum(nb, 0)])[0]
            if len(src) == 0:
                continue
            cand_site = site_of[nb[src]]
            cand = np.linalg.norm(centers[src] - sites[cand_site], axis=1)
            upd = (cand < best[src] - 1e-12) & (cand <= limit)
            best[src[upd]] = cand[upd]
            site_of[src[upd]] = cand_site[upd]
            changed[src[upd]] = True
        active = changed

    sign = np.where(dist < 0, -1.0, 1.0)
    out_d = sign * np.minimum(best, max_distance)
    out = SdfSubmap(vs, tsdf.truncation, tsdf.pose, tsdf.id)
    out.set_voxels(idx, out_d, weight)
    out.has_esdf = True
    return out


def extract_isosurface(sdf: SdfSubmap) -> IsoSurfaceCloud:
    """Zero-crossing points along grid edges, linearly interpolated."""
    if len(sdf) == 0:
        raise EmptyInput("cannot extract an iso-surface from an empty submap")
    idx, dist, _ = sdf.arrays()
    pts, _, _ = _zero_crossings(idx, dist, sdf.voxel_size)
    return IsoSurfaceCloud(pts, no_surface=len(pts) == 0)


_CORNERS = np.array([(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=np.int64)
_SNAP = 1e-9


def sample_trilinear_many(sdf: SdfSubmap, points):
    """Trilinear interpolation of (distance, weight) at many points.

    Returns ``(distance, weight, valid)``. A point is valid only if every
    voxel centre with non-zero interpolation weight is stored.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    u = p / sdf.voxel_size - 0.5
    base = np.floor(u)
    f = u - base
    up = f > 1 - _SNAP
    base[up] += 1
    f[up] = 0.0
    f[f < _SNAP] = 0.0
    base = base.astype(np.int64)
    dist = np.zeros(len(p))
    weight = np.zeros(len(p))
    valid = np.ones(len(p), dtype=bool)
    for c in _CORNERS:
        w = np.prod(np.where(c == 1, f, 1.0 - f), axis=1)
        need = w > 0
        vals, found = sdf.voxels.get(base[need] + c)
        valid[np.nonzero(need)[0][~found]] = False
        vals = np.nan_to_num(vals)
        dist[need] += w[need] * vals[:, 0]
        weight[need] += w[need] * vals[:, 1]
    dist[~valid] = np.nan
    weight[~valid] = np.nan
    return dist, weight, valid


def sample_trilinear(sdf: SdfSubmap, p):
    """(distance, weight) at a single point, or ``None`` if unobserved."""
    d, w, ok = sample_trilinear_many(sdf, np.asarray(p, dtype=np.float64).reshape(1, 3))
    if not ok[0]:
        return None
    return float(d[0]), float(w[0])
