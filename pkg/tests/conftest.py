import numpy as np
import pytest

from sdfplace.sdf import SdfSubmap


def grid_indices(shape, lo=(0, 0, 0)):
    """All indices of a dense box, in C order."""
    g = np.indices(shape).reshape(3, -1).T
    return g + np.asarray(lo)


def dense_submap(values, voxel_size=0.05, lo=(0, 0, 0), weights=1.0, mask=None):
    """Submap holding a dense array (optionally only where ``mask`` is set)."""
    values = np.asarray(values, dtype=np.float64)
    idx = grid_indices(values.shape, lo)
    flat = values.reshape(-1)
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), values.shape).reshape(-1)
    if mask is not None:
        keep = np.asarray(mask).reshape(-1)
        idx, flat, w = idx[keep], flat[keep], w[keep]
    s = SdfSubmap(voxel_size, 3 * voxel_size)
    s.set_voxels(idx, flat, w)
    s.has_esdf = True
    return s


def field_submap(fn, shape, voxel_size=0.05, lo=(0, 0, 0)):
    """Submap sampling ``fn(points)`` at the voxel centres of a dense box."""
    idx = grid_indices(shape, lo)
    p = voxel_size * (idx + 0.5)
    return dense_submap(fn(p).reshape(shape), voxel_size, lo)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
