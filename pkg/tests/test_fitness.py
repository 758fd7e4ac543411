import numpy as np
import pytest

from sdfplace.fitness import Decision, decide, evaluate_fitness
from sdfplace.fixtures import registration_pair
from sdfplace.sdf import extract_isosurface, sample_trilinear
from sdfplace.transform import RigidTransform


@pytest.fixture(scope="module")
def noisy():
    q, t, gt = registration_pair(0, noise_sigma=0.01)
    return q, extract_isosurface(q), t, extract_isosurface(t), gt


@pytest.fixture(scope="module")
def clean():
    q, t, gt = registration_pair(0, noise_sigma=0.0)
    return q, extract_isosurface(q), t, extract_isosurface(t), gt


def test_self_match(noisy):
    q, qi = noisy[:2]
    ev = evaluate_fitness(q, qi, q, qi, RigidTransform.identity())
    assert ev.overlap_ok and ev.overlap_fraction >= 0.99
    assert abs(ev.fitness) <= 0.25 * q.voxel_size


def test_far_translation_has_no_overlap(noisy):
    q, qi, t, ti, _ = noisy
    ev = evaluate_fitness(q, qi, t, ti, RigidTransform.from_euler((0, 0, 0), (100.0, 0, 0)))
    assert ev.forward.valid_count == 0 and ev.backward.valid_count == 0
    assert ev.fitness is None and not ev.overlap_ok
    assert decide(ev.fitness, ev.overlap_ok, 0.05) is Decision.REJECTED_OVERLAP


def test_matches_per_point_loop(noisy):
    q, qi, t, ti, gt = noisy
    T = gt @ RigidTransform.from_euler((1.0, 0, -2.0), (0.02, 0.0, -0.01))
    num = den = 0.0
    valid = total = 0
    for sdf, iso, M in ((q, ti, T), (t, qi, T.inverse())):
        for p in iso.points:
            total += 1
            s = sample_trilinear(sdf, M.apply(p[None])[0])
            if s is None:
                continue
            d, w = s
            num += w * abs(d)
            den += w
            valid += 1
    ev = evaluate_fitness(q, qi, t, ti, T)
    assert abs(ev.fitness - (-num / den)) < 1e-12
    assert abs(ev.overlap_fraction - valid / total) < 1e-12


def test_ground_truth_pair(noisy):
    q, qi, t, ti, gt = noisy
    ev = evaluate_fitness(q, qi, t, ti, gt)
    assert ev.overlap_ok
    assert abs(ev.fitness) <= 0.02


def test_misalignment_is_monotone(clean):
    q, qi, t, ti, gt = clean
    vs = q.voxel_size
    for axis in range(3):
        errs = []
        for k in (0, 1, 2, 4):
            shift = np.zeros(3)
            shift[axis] = k * vs
            T = RigidTransform.from_euler((0, 0, 0), shift) @ gt
            errs.append(abs(evaluate_fitness(q, qi, t, ti, T).fitness))
        assert errs == sorted(errs), (axis, errs)
        assert errs[-1] > errs[0]


def test_swapping_roles_is_symmetric(noisy):
    q, qi, t, ti, gt = noisy
    T = gt @ RigidTransform.from_euler((0, 3.0, 0), (0.03, 0.01, 0))
    a = evaluate_fitness(q, qi, t, ti, T)
    b = evaluate_fitness(t, ti, q, qi, T.inverse())
    assert abs(a.fitness - b.fitness) < 1e-9
    assert abs(a.overlap_fraction - b.overlap_fraction) < 1e-12


def test_overlap_gate_threshold(noisy):
    q, qi, t, ti, gt = noisy
    ev = evaluate_fitness(q, qi, t, ti, gt, k_overlap=1.0)
    assert ev.fitness is None and not ev.overlap_ok


def test_decide():
    assert decide(-0.01, True, 0.05) is Decision.MATCHED
    assert decide(-0.05, True, 0.05) is Decision.REJECTED_FITNESS
    assert decide(-0.2, True, 0.05) is Decision.REJECTED_FITNESS
    assert decide(None, True, 0.05) is Decision.REJECTED_OVERLAP
    assert decide(-0.01, False, 0.05) is Decision.REJECTED_OVERLAP
    fits = -np.linspace(0, 0.1, 21)
    for lo, hi in ((0.02, 0.04), (0.04, 0.08)):
        a = {f for f in fits if decide(f, True, lo) is Decision.MATCHED}
        b = {f for f in fits if decide(f, True, hi) is Decision.MATCHED}
        assert a <= b
