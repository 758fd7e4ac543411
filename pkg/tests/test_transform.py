import numpy as np
import pytest

from sdfplace.transform import RigidTransform


def test_group_axioms(rng):
    for _ in range(20):
        a, b, c = (RigidTransform.random(rng, 3.0) for _ in range(3))
        assoc = ((a @ b) @ c).as_matrix() - (a @ (b @ c)).as_matrix()
        assert np.abs(assoc).max() < 1e-9
        np.testing.assert_allclose((a @ a.inverse()).as_matrix(), np.eye(4), atol=1e-9)
        R = a.rotation
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-9)
        assert abs(np.linalg.det(R) - 1) < 1e-9


def test_apply_matches_matrix(rng):
    T = RigidTransform.random(rng, 2.0)
    p = rng.normal(size=(10, 3))
    h = np.hstack([p, np.ones((10, 1))]) @ T.as_matrix().T
    np.testing.assert_allclose(T.apply(p), h[:, :3], atol=1e-12)
    np.testing.assert_allclose(T @ p[0], h[0, :3], atol=1e-12)


def test_from_euler_and_errors():
    T = RigidTransform.from_euler((0, 0, 90), (1, 2, 3))
    np.testing.assert_allclose(T.apply([1, 0, 0]), [1, 3, 3], atol=1e-12)
    assert T.rotation_angle() == pytest.approx(np.pi / 2)
    t_err, r_err = T.distance_to(RigidTransform.identity())
    assert t_err == pytest.approx(np.sqrt(14))
    assert r_err == pytest.approx(90)


def test_rejects_non_rotations():
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        RigidTransform(2 * np.eye(3), np.zeros(3))
