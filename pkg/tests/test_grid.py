import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sdfplace.grid import (
    BLOCK_SIZE,
    NEIGHBOR_OFFSETS,
    SparseField,
    index_to_point,
    key_to_voxel,
    point_to_index,
    voxel_key,
)

component = st.integers(-(2**20) + 1, 2**20 - 1)


@given(arrays(np.int64, (50, 3), elements=component))
def test_key_round_trip(idx):
    np.testing.assert_array_equal(key_to_voxel(voxel_key(idx)), idx)


@given(arrays(np.int64, (30, 3), elements=component))
def test_keys_are_unique_per_index(idx):
    keys = voxel_key(idx)
    assert len(np.unique(keys)) == len(np.unique(idx, axis=0))


def test_key_range_is_enforced():
    import pytest

    with pytest.raises(ValueError):
        voxel_key([[2**20, 0, 0]])


def test_voxel_center_convention():
    np.testing.assert_allclose(index_to_point([[0, 0, 0], [-1, 2, 3]], 0.1), [[0.05] * 3, [-0.05, 0.25, 0.35]])
    np.testing.assert_array_equal(point_to_index([[0.05, -0.05, 0.099]], 0.1), [[0, -1, 0]])


def test_neighbor_offsets():
    assert NEIGHBOR_OFFSETS.shape == (26, 3)
    assert len({tuple(o) for o in NEIGHBOR_OFFSETS}) == 26
    assert not np.any(np.all(NEIGHBOR_OFFSETS == 0, axis=1))


@settings(max_examples=40, deadline=None)
@given(arrays(np.int64, (60, 3), elements=st.integers(-40, 40)), st.integers(0, 2**31 - 1))
def test_sparse_field_matches_dict(idx, seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=len(idx))
    f = SparseField()
    f.set(idx, vals)
    ref = {tuple(i): v for i, v in zip(idx.tolist(), vals)}  # last write wins
    assert len(f) == len(ref)
    keys = np.array(list(ref), dtype=np.int64)
    got, found = f.get(keys)
    assert found.all()
    np.testing.assert_array_equal(got, [ref[tuple(k)] for k in keys.tolist()])
    probe = rng.integers(-45, 45, size=(100, 3))
    _, found = f.get(probe)
    np.testing.assert_array_equal(found, [tuple(p) in ref for p in probe.tolist()])


def test_to_arrays_sorted_and_blocks():
    f = SparseField((3,))
    idx = np.array([[9, 0, 0], [-1, -1, -1], [0, 0, 1], [0, 0, 0]])
    f.set(idx, np.arange(12.0).reshape(4, 3))
    out_idx, out_vals = f.to_arrays()
    np.testing.assert_array_equal(out_idx, [[-1, -1, -1], [0, 0, 0], [0, 0, 1], [9, 0, 0]])
    np.testing.assert_array_equal(out_vals[0], [3, 4, 5])
    np.testing.assert_array_equal(f.block_coords(), [[-1, -1, -1], [0, 0, 0], [1, 0, 0]])
    assert f.n_blocks == 3


def test_remove_and_contains():
    f = SparseField()
    f.set([[1, 2, 3], [4, 5, 6]], [1.0, 2.0])
    assert (1, 2, 3) in f
    f.remove([[1, 2, 3], [100, 100, 100]])
    assert (1, 2, 3) not in f
    assert len(f) == 1
    vals, found = f.get([[1, 2, 3]])
    assert not found[0] and np.isnan(vals[0])


def test_gather_and_write_dense_round_trip(rng):
    f = SparseField()
    idx = rng.integers(-12, 12, size=(400, 3))
    f.set(idx, rng.normal(size=400))
    lo = np.array([-10, -7, -3])
    vals, mask = f.gather(lo, (17, 13, BLOCK_SIZE + 3))
    for i, j, k in np.argwhere(mask):
        v, ok = f.get(np.array([[i, j, k]]) + lo)
        assert ok[0] and v[0] == vals[i, j, k]
    stored = np.unique(idx, axis=0)
    inside = np.all(stored >= lo, axis=1) & np.all(stored < lo + np.array([17, 13, BLOCK_SIZE + 3]), axis=1)
    assert mask.sum() == inside.sum()
    g = SparseField()
    g.write_dense(lo, vals, mask)
    a, b = g.to_arrays()
    ref_idx = np.argwhere(mask) + lo
    order = np.lexsort(ref_idx.T[::-1])
    np.testing.assert_array_equal(a, ref_idx[order])
    np.testing.assert_array_equal(b, vals[mask][order])


def test_copy_is_independent():
    f = SparseField()
    f.set([[0, 0, 0]], [1.0])
    g = f.copy()
    g.set([[0, 0, 0]], [5.0])
    assert f.get([[0, 0, 0]])[0][0] == 1.0


def test_far_apart_blocks_use_dict_fallback():
    f = SparseField()
    idx = np.array([[-900_000, 0, 0], [900_000, 5, -900_000]])
    f.set(idx, [1.0, 2.0])
    vals, found = f.get(np.vstack([idx, [[0, 0, 0]]]))
    np.testing.assert_array_equal(found, [True, True, False])
    np.testing.assert_array_equal(vals[:2], [1.0, 2.0])
