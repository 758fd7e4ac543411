import numpy as np
import pytest
from scipy.spatial import cKDTree

from conftest import field_submap, grid_indices
from sdfplace.filtering import HESSIAN_COMPONENTS, compute_filters
from sdfplace.fixtures import clutter
from sdfplace.grid import NEIGHBOR_OFFSETS, SparseField
from sdfplace.keypoints import (
    Keypoint,
    detect_extrema,
    doh_response,
    filter_by_surface_distance,
    hessian_stack,
    select_top_n,
)
from sdfplace.scene import build_synthetic_scene
from sdfplace.transform import RigidTransform


def constant_hessian(H, shape=(3, 3, 3)):
    idx = grid_indices(shape)
    return {
        n: SparseField.from_arrays(idx, np.full(len(idx), H["xyz".index(n[0]), "xyz".index(n[1])]))
        for n in HESSIAN_COMPONENTS
    }


def kp(index, response, sdf_value=0.0):
    return Keypoint(tuple(index), np.zeros(3), response, sdf_value, np.zeros(3))


def extrema_oracle(doh: SparseField):
    table = dict(zip(map(tuple, doh.indices().tolist()), doh.values()))
    out = []
    for i, v in table.items():
        nbs = [table.get(tuple(np.add(i, o))) for o in NEIGHBOR_OFFSETS]
        if any(n is None for n in nbs):
            continue
        if all(v > n for n in nbs) or all(v < n for n in nbs):
            out.append(i)
    return sorted(out)


@pytest.fixture(scope="module")
def pocket():
    """A few objects with free-space pockets between them."""
    prims = clutter(np.random.default_rng(2), (0, 0), (1.0, 1.0), 6)
    s = build_synthetic_scene(prims, max_distance=0.5)
    fb = compute_filters(s, 2)
    return s, fb


def test_doh_of_diagonal():
    doh = doh_response(constant_hessian(np.diag([2.0, 2.0, 2.0])))
    np.testing.assert_array_equal(doh.values(), 8.0)


def test_doh_of_linear_field():
    s = field_submap(lambda p: p[:, 0] - 0.5 * p[:, 2], (20, 20, 20), 0.05)
    doh = doh_response(compute_filters(s, 2).hessian)
    assert len(doh) > 0
    assert np.abs(doh.values()).max() <= 1e-12


def test_doh_matches_determinant_oracle(pocket):
    _, fb = pocket
    doh = doh_response(fb.hessian)
    idx, vals = doh.to_arrays()
    ref = np.linalg.det(hessian_stack(fb.hessian, idx))
    scale = np.max(np.abs(np.linalg.eigvalsh(hessian_stack(fb.hessian, idx))), axis=1) ** 3
    assert np.all(np.abs(vals - ref) <= 1e-12 * np.maximum(scale, 1.0))


def test_single_spike():
    idx = grid_indices((5, 5, 5))
    v = np.ones(len(idx))
    v[np.all(idx == 2, axis=1)] = 3.0
    kps = detect_extrema(SparseField.from_arrays(idx, v))
    assert [k.index for k in kps] == [(2, 2, 2)]
    assert kps[0].response == 3.0


def test_plateau_has_no_keypoints():
    idx = grid_indices((5, 5, 5))
    assert detect_extrema(SparseField.from_arrays(idx, np.ones(len(idx)))) == []
    v = np.ones(len(idx))
    v[np.all(idx == 2, axis=1) | np.all(idx == (2, 2, 3), axis=1)] = 3.0  # two-voxel plateau
    assert detect_extrema(SparseField.from_arrays(idx, v)) == []


def test_extrema_match_exhaustive_scan(pocket):
    s, fb = pocket
    doh = doh_response(fb.hessian)
    kps = detect_extrema(doh, s, fb.hessian)
    assert len(kps) > 0
    assert sorted(k.index for k in kps) == extrema_oracle(doh)
    for k in kps:
        assert doh.contains(k.voxel + NEIGHBOR_OFFSETS).all()
        np.testing.assert_allclose(k.position, 0.05 * (k.voxel + 0.5))
        assert k.sdf_value == s.voxels.get(k.voxel[None])[0][0, 0]
        assert np.all(np.diff(k.hessian_eigs) <= 0)


def test_top_n_basic():
    kps = [kp((0, 0, 0), 5.0), kp((1, 0, 0), -7.0), kp((2, 0, 0), 2.0)]
    assert len(select_top_n(kps, 5)) == 3
    assert [k.response for k in select_top_n(kps, 2)] == [-7.0, 5.0]


def test_top_n_matches_sort_oracle(rng):
    idx = rng.integers(-50, 50, size=(10_000, 3))
    resp = rng.integers(-300, 300, size=10_000).astype(float)  # many ties
    kps = [kp(i, r) for i, r in zip(idx.tolist(), resp)]
    got = select_top_n(kps, 5000)
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0], -np.abs(resp)))[:5000]
    assert [k.index for k in got] == [tuple(idx[o]) for o in order]


def test_filter_by_surface_distance():
    kps = [kp((0, 0, 0), 1, 0.02), kp((1, 0, 0), 1, -0.08), kp((2, 0, 0), 1, 0.30)]
    assert filter_by_surface_distance(kps, 1e9) == kps
    assert [k.sdf_value for k in filter_by_surface_distance(kps, 0.05)] == [0.02]
    prev = kps
    for d in (0.30, 0.25, 0.20, 0.15, 0.10, 0.05):
        cur = filter_by_surface_distance(kps, d)
        assert set(k.index for k in cur) <= set(k.index for k in prev)
        prev = cur
    with pytest.raises(ValueError):
        filter_by_surface_distance(kps, 0.0)


def test_detection_is_deterministic(pocket):
    s, _ = pocket
    runs = []
    for workers in (1, 1, 3):
        fb = compute_filters(s, 2, workers=workers)
        runs.append([(k.index, k.response) for k in detect_extrema(doh_response(fb.hessian), s, fb.hessian)])
    assert runs[0] == runs[1] == runs[2]


def test_rotation_repeatability():
    vs = 0.05
    prims = clutter(np.random.default_rng(5), (0, 0), (1.5, 1.5), 12)
    T = RigidTransform.random(np.random.default_rng(0), 0.3)
    out = []
    for pose in (None, T):
        s = build_synthetic_scene(prims, voxel_size=vs, pose=pose)
        fb = compute_filters(s, 2)
        doh = doh_response(fb.hessian)
        out.append((select_top_n(detect_extrema(doh, s, fb.hessian), 500), doh))
    (ka, _), (kb, doh_b) = out
    pa = T.inverse().apply(np.array([k.position for k in ka]))
    pb = np.array([k.position for k in kb])
    # only keypoints whose location is inside the other map's response domain can repeat
    inside = doh_b.contains(np.floor(pa / vs).astype(np.int64))
    d, _ = cKDTree(pb).query(pa[inside])
    assert inside.sum() >= 30
    assert np.mean(d <= 2 * vs) >= 0.6
