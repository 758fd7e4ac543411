"""Standard synthetic scenes and submap collections with ground truth."""

from __future__ import annotations

import numpy as np

from .scene import Box, Sphere, carve_submaps
from .transform import RigidTransform

WALL = 0.1


def room(center, size, height=2.0, open_sides=()):
    """Floor plus four walls around a rectangular room; sides in 'xXyY' may be left open."""
    cx, cy = center
    sx, sy = size
    prims = [Box((cx, cy, -WALL), (sx / 2, sy / 2, WALL))]
    h = height / 2
    if "x" not in open_sides:
        prims.append(Box((cx - sx / 2 - WALL, cy, h), (WALL, sy / 2, h)))
    if "X" not in open_sides:
        prims.append(Box((cx + sx / 2 + WALL, cy, h), (WALL, sy / 2, h)))
    if "y" not in open_sides:
        prims.append(Box((cx, cy - sy / 2 - WALL, h), (sx / 2, WALL, h)))
    if "Y" not in open_sides:
        prims.append(Box((cx, cy + sy / 2 + WALL, h), (sx / 2, WALL, h)))
    return prims


def clutter(rng: np.random.Generator, lo, hi, count: int):
    """Random spheres and rotated boxes standing inside the box [lo, hi] (xy)."""
    prims = []
    for _ in range(count):
        x, y = rng.uniform(lo, hi)
        if rng.random() < 0.5:
            r = rng.uniform(0.1, 0.3)
            prims.append(Sphere((x, y, rng.uniform(0.1, 1.2)), r))
        else:
            h = rng.uniform(0.08, 0.3, 3)
            prims.append(Box((x, y, rng.uniform(0.1, 0.8)), tuple(h), (0.0, 0.0, rng.uniform(0, 90))))
    return prims


def cluttered_room(seed: int = 3, center=(0.0, 0.0), size=(4.0, 4.0), n_objects: int = 24):
    rng = np.random.default_rng(seed)
    c = np.asarray(center)
    half = np.asarray(size) / 2 - 0.3
    return room(center, size) + clutter(rng, c - half, c + half, n_objects)


def registration_pair(seed: int = 0, noise_sigma: float = 0.01, voxel_size: float = 0.05):
    """Two overlapping submaps of a cluttered room and their true relative pose.

    The second view is rotated by 25 degrees about z and shifted ~0.5 m.
    Returns ``(a, b, a_from_b)``.
    """
    prims = cluttered_room()
    views = [
        RigidTransform.from_euler((0, 0, 0), (0.0, 0.0, 0.8)),
        RigidTransform.from_euler((0, 0, 25), (0.4, -0.3, 0.8)),
    ]
    a, b = carve_submaps(prims, views, (1.6, 1.6, 1.0), voxel_size, noise_sigma=noise_sigma, seed=seed)
    return a, b, a.pose.inverse() @ b.pose


def three_room_scene():
    """Three rooms in a row joined by doorways, with furniture."""
    rng = np.random.default_rng(11)
    prims = []
    for n, cx in enumerate((-4.2, 0.0, 4.2)):
        prims += room((cx, 0.0), (4.0, 4.0))
        prims += clutter(rng, (cx - 1.6, -1.6), (cx + 1.6, 1.6), 16)
    return prims


def three_room_views():
    views = []
    for cx in (-4.2, 0.0, 4.2):
        views.append(RigidTransform.from_euler((0, 0, 0), (cx - 0.6, 0.3, 0.8)))
    views += [
        RigidTransform.from_euler((0, 0, 15), (-2.1, 0.0, 0.8)),
        RigidTransform.from_euler((0, 0, -20), (2.1, -0.2, 0.8)),
        RigidTransform.from_euler((0, 0, 40), (-4.0, -0.5, 0.8)),
        RigidTransform.from_euler((0, 0, 90), (0.5, 0.4, 0.8)),
        RigidTransform.from_euler((0, 0, -35), (4.5, 0.6, 0.8)),
    ]
    return views


def place_collection(noise_sigma: float = 0.01, seed: int = 5, voxel_size: float = 0.05):
    """Eight submaps: four well separated places, each seen from two viewpoints.

    Exactly the four same-place pairs overlap.
    """
    prims, views = [], []
    for p in range(4):
        center = (p * 12.0, 0.0)
        prims += cluttered_room(seed=100 + p, center=center)
        views.append(RigidTransform.from_euler((0, 0, 0), (center[0], 0.0, 0.8)))
        views.append(RigidTransform.from_euler((0, 0, 20 + 5 * p), (center[0] + 0.4, -0.3, 0.8)))
    return carve_submaps(prims, views, (1.6, 1.6, 1.0), voxel_size, noise_sigma=noise_sigma, seed=seed)


def corridor_junction(seed: int = 21):
    """Two 2 m wide corridors crossing in a T-junction, with pillars and alcoves."""
    rng = np.random.default_rng(seed)
    h = 1.0
    prims = [
        Box((0.0, 0.0, -WALL), (8.0, 8.0, WALL)),
        # main corridor along x, walls at y = +-1
        Box((-4.5, 1.0 + WALL, h), (3.5, WALL, h)),
        Box((4.5, 1.0 + WALL, h), (3.5, WALL, h)),
        Box((0.0, -1.0 - WALL, h), (8.0, WALL, h)),
        # side corridor along +y, walls at x = +-1
        Box((-1.0 - WALL, 4.5, h), (WALL, 3.5, h)),
        Box((1.0 + WALL, 4.5, h), (WALL, 3.5, h)),
    ]
    prims += clutter(rng, (-7.5, -0.9), (7.5, 0.9), 22)
    prims += clutter(rng, (-0.9, 1.2), (0.9, 7.5), 12)
    return prims


def corridor_views():
    return [
        RigidTransform.from_euler((0, 0, 0), (-4.0, 0.0, 0.8)),
        RigidTransform.from_euler((0, 0, 20), (-3.4, 0.2, 0.8)),
        RigidTransform.from_euler((0, 0, 0), (0.0, 0.5, 0.8)),
        RigidTransform.from_euler((0, 0, -30), (0.4, 0.9, 0.8)),
        RigidTransform.from_euler((0, 0, 90), (0.0, 4.5, 0.8)),
        RigidTransform.from_euler((0, 0, 70), (0.2, 5.0, 0.8)),
        RigidTransform.from_euler((0, 0, 0), (4.5, 0.0, 0.8)),
        RigidTransform.from_euler((0, 0, 15), (5.0, -0.2, 0.8)),
    ]


def corridor_collection(noise_sigma: float = 0.01, seed: int = 9, voxel_size: float = 0.05):
    return carve_submaps(
        corridor_junction(), corridor_views(), (1.6, 1.6, 1.0), voxel_size, noise_sigma=noise_sigma, seed=seed
    )
