import numpy as np
import pytest

from sdfplace.errors import DegenerateSpec, EmptyCarve, InputError
from sdfplace.fixtures import three_room_scene, three_room_views
from sdfplace.scene import (
    Box,
    Plane,
    Sphere,
    build_synthetic_scene,
    carve_submaps,
    make_pair,
    overlap_volume,
    parse_scene,
    relative_pose,
    scene_sdf,
)
from sdfplace.transform import RigidTransform


def test_primitive_distances():
    s = Sphere((1.0, 0.0, 0.0), 0.5)
    np.testing.assert_allclose(s.sdf(np.array([[1.0, 0, 0], [2.0, 0, 0], [1.0, 0.25, 0]])), [-0.5, 0.5, -0.25])
    b = Box((0, 0, 0), (1.0, 2.0, 3.0))
    np.testing.assert_allclose(b.sdf(np.array([[0.0, 0, 0], [2.0, 0, 0], [2.0, 3.0, 0]])), [-1.0, 1.0, np.sqrt(2)])
    rb = Box((0, 0, 0), (1.0, 0.1, 0.1), (0, 0, 90))
    assert abs(rb.sdf(np.array([0.0, 1.0, 0.0])) - 0.0) < 1e-12
    assert abs(rb.sdf(np.array([1.0, 0.0, 0.0])) - 0.9) < 1e-12
    pl = Plane((0, 0, 2.0), 1.0)
    assert pl.sdf(np.array([5.0, 5.0, 3.0])) == pytest.approx(2.0)


def test_union_is_minimum(rng):
    prims = [Sphere((0, 0, 0), 1.0), Box((2, 0, 0), (0.5, 0.5, 0.5))]
    p = rng.uniform(-3, 3, size=(1000, 3))
    np.testing.assert_array_equal(scene_sdf(prims, p), np.minimum(prims[0].sdf(p), prims[1].sdf(p)))


def test_degenerate_primitives():
    with pytest.raises(DegenerateSpec):
        Sphere((0, 0, 0), 0.0)
    with pytest.raises(DegenerateSpec):
        Box((0, 0, 0), (1, 0, 1))
    with pytest.raises(DegenerateSpec):
        Plane((0, 0, 0), 1.0)
    with pytest.raises(DegenerateSpec):
        build_synthetic_scene([])
    with pytest.raises(DegenerateSpec):
        build_synthetic_scene([Plane((0, 0, 1), 0.0)])


def test_rasterised_values_match_analytic():
    prims = [Sphere((0.3, 0.1, -0.2), 0.4), Box((1.0, 0, 0), (0.2, 0.3, 0.2), (0, 0, 30))]
    s = build_synthetic_scene(prims, voxel_size=0.05)
    idx, d, w = s.arrays()
    np.testing.assert_allclose(d, scene_sdf(prims, s.positions()), atol=1e-12)
    assert np.all(np.abs(d) <= 15 * 0.05)
    assert np.all(w == 1.0)


def test_noise_statistics():
    prims = [Sphere((0, 0, 0), 0.5)]
    clean = build_synthetic_scene(prims, voxel_size=0.05)
    noisy = build_synthetic_scene(prims, voxel_size=0.05, noise_sigma=0.01, seed=4)
    a = dict(zip(map(tuple, clean.arrays()[0]), clean.arrays()[1]))
    idx, d, _ = noisy.arrays()
    err = np.array([d[i] - a[tuple(k)] for i, k in enumerate(idx) if tuple(k) in a])
    assert abs(err.mean()) <= 0.012 and abs(err.std() - 0.01) < 0.001


def test_identical_and_disjoint_views():
    prims = [Sphere((0, 0, 0), 0.5), Box((0.8, 0, 0), (0.2, 0.2, 0.2))]
    v = RigidTransform.from_euler((0, 0, 30), (0.1, 0, 0))
    a, b = carve_submaps(prims, [v, v], (1.0, 1.0, 1.0), voxel_size=0.1)
    assert np.abs(relative_pose(a, b).as_matrix() - np.eye(4)).max() < 1e-12
    assert overlap_volume(a, b, RigidTransform.identity()) == pytest.approx(len(a) * 0.1**3)
    far = [Sphere((0, 0, 0), 0.5), Sphere((50, 0, 0), 0.5)]
    a, b = carve_submaps(far, [RigidTransform.identity(), RigidTransform.from_euler((0, 0, 0), (50, 0, 0))], 1.0, 0.1)
    pair = make_pair(a, b)
    assert pair.overlap_volume == 0.0 and not pair.is_match


@pytest.fixture(scope="module")
def rooms():
    return carve_submaps(three_room_scene(), three_room_views(), (1.6, 1.6, 1.0), voxel_size=0.1)


def _voxel_set_oracle(a, b):
    """Count A voxels whose transformed centre falls in a stored B voxel, one point at a time."""
    stored = set(map(tuple, b.arrays()[0]))
    b_from_a = b.pose.inverse() @ a.pose
    n = 0
    for p in a.positions():
        q = b_from_a.apply(p[None])[0]
        n += tuple(np.floor(q / b.voxel_size).astype(int)) in stored
    return n * a.voxel_size**3


def test_overlap_matches_oracle(rooms):
    for i in range(len(rooms)):
        for j in range(i + 1, len(rooms)):
            a, b = rooms[i], rooms[j]
            got = overlap_volume(a, b, relative_pose(a, b).inverse())
            assert got == pytest.approx(_voxel_set_oracle(a, b), abs=1e-12)


def test_overlap_roughly_symmetric(rooms):
    for i, j in ((0, 3), (1, 6), (1, 4), (2, 7)):
        a, b = rooms[i], rooms[j]
        ab = overlap_volume(a, b, relative_pose(a, b).inverse())
        ba = overlap_volume(b, a, relative_pose(b, a).inverse())
        assert ab > 1.0
        assert abs(ab - ba) <= 0.05 * max(ab, ba)


def test_half_shift_overlap():
    prims = [Box((0, 0, 0), (3.0, 3.0, 0.5))]
    a, b = carve_submaps(prims, [RigidTransform.identity(), RigidTransform.from_euler((0, 0, 0), (1.0, 0, 0))], 1.0, 0.1)
    vol = overlap_volume(a, b, relative_pose(a, b).inverse())
    assert vol == pytest.approx(_voxel_set_oracle(a, b))
    assert vol == pytest.approx(0.5 * len(a) * 0.001, rel=0.06)


def test_overlap_invariant_to_world_frame(rooms):
    W = RigidTransform.from_euler((10, 20, 30), (5, -3, 2))
    a, b = rooms[1], rooms[6]
    a2, b2 = a.copy(), b.copy()
    a2.pose, b2.pose = W @ a.pose, W @ b.pose
    v1 = overlap_volume(a, b, relative_pose(a, b).inverse())
    v2 = overlap_volume(a2, b2, relative_pose(a2, b2).inverse())
    assert v1 == pytest.approx(v2, abs=1e-12)


def test_carve_is_deterministic():
    prims = [Sphere((0, 0, 0), 0.5)]
    views = [RigidTransform.identity(), RigidTransform.from_euler((0, 0, 45), (0.2, 0, 0))]
    a = carve_submaps(prims, views, 1.0, 0.1, noise_sigma=0.01, seed=3)
    b = carve_submaps(prims, views, 1.0, 0.1, noise_sigma=0.01, seed=3)
    for x, y in zip(a, b):
        for u, v in zip(x.arrays(), y.arrays()):
            np.testing.assert_array_equal(u, v)


def test_empty_carve():
    with pytest.raises(EmptyCarve):
        carve_submaps([Sphere((0, 0, 0), 0.5)], [RigidTransform.from_euler((0, 0, 0), (30, 0, 0))], 1.0, 0.1)
    with pytest.raises(InputError):
        carve_submaps([Sphere((0, 0, 0), 0.5)], [], 1.0, 0.1)


def test_parse_scene():
    spec = parse_scene(
        """
        voxel_size 0.1   # coarse
        noise 0.0
        sphere 0 0 0 0.5
        box 1 0 0 0.2 0.2 0.2 0 0 45
        plane 0 0 1 -1
        extent 1.0
        view 0 0 0
        view 0.2 0 0 0 0 10
        """
    )
    assert spec.voxel_size == 0.1 and spec.extent == (1.0, 1.0, 1.0)
    assert isinstance(spec.primitives[1], Box) and spec.primitives[1].rotation_deg == (0, 0, 45)
    assert len(spec.carve()) == 2
    with pytest.raises(InputError):
        parse_scene("sphere 1 2 3")
    with pytest.raises(InputError):
        parse_scene("teapot 1 2 3")
