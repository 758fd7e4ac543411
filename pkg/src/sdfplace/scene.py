"""Analytic scenes, rasterised submaps and overlap ground truth.

Scenes are min-unions of solid primitives. Submaps are carved out of a scene
by rasterising its distance field directly on a grid attached to a viewpoint,
which gives exact ground-truth relative poses.

Scene files are line oriented; ``#`` starts a comment::

    voxel_size 0.05          # meters
    truncation 0.15
    max_distance 0.75        # |distance| band kept in each submap
    noise 0.01               # std of additive Gaussian noise on distances
    seed 7
    bounds x0 y0 z0 x1 y1 z1 # rasterisation box for `build` (world frame)
    sphere cx cy cz r
    box cx cy cz hx hy hz [rx ry rz]   # half extents, xyz Euler degrees
    plane nx ny nz d                   # solid where n.p < d
    extent hx hy hz                    # carve box half extents (view frame)
    view x y z [rx ry rz]              # one submap per view line
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpec, EmptyCarve, InputError
from .grid import index_to_point, point_to_index
from .sdf import SdfSubmap
from .transform import RigidTransform


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DegenerateSpec("sphere radius must be positive")

    def sdf(self, p):
        return np.linalg.norm(p - np.asarray(self.center, dtype=np.float64), axis=-1) - self.radius

    def aabb(self):
        c = np.asarray(self.center, dtype=np.float64)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class Box:
    center: tuple
    half_extents: tuple
    rotation_deg: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if min(self.half_extents) <= 0:
            raise DegenerateSpec("box half extents must be positive")

    def _frame(self):
        return RigidTransform.from_euler(self.rotation_deg, self.center)

    def sdf(self, p):
        local = self._frame().inverse().apply(p)
        q = np.abs(local) - np.asarray(self.half_extents, dtype=np.float64)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def aabb(self):
        h = np.asarray(self.half_extents, dtype=np.float64)
        corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]) * h
        world = self._frame().apply(corners)
        return world.min(axis=0), world.max(axis=0)


@dataclass(frozen=True)
class Plane:
    """Half-space solid ``n . p < offset``."""

    normal: tuple
    offset: float

    def __post_init__(self):
        if np.linalg.norm(self.normal) < 1e-12:
            raise DegenerateSpec("plane normal must be nonzero")

    def sdf(self, p):
        n = np.asarray(self.normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        return p @ n - self.offset

    def aabb(self):
        return None


def scene_sdf(primitives, points) -> np.ndarray:
    """Min-union signed distance of the primitives at ``points`` (world frame)."""
    p = np.asarray(points, dtype=np.float64)
    out = np.full(p.shape[:-1], np.inf)
    for prim in primitives:
        out = np.minimum(out, prim.sdf(p))
    return out


def scene_bounds(primitives, margin: float):
    boxes = [prim.aabb() for prim in primitives]
    if any(b is None for b in boxes):
        raise DegenerateSpec("scenes containing planes need explicit bounds")
    lo = np.min([b[0] for b in boxes], axis=0) - margin
    hi = np.max([b[1] for b in boxes], axis=0) + margin
    return lo, hi


def _relevant(primitives, pose, lo, hi, max_distance):
    """Drop primitives farther than ``max_distance`` from the (posed) box [lo, hi]."""
    corners = np.array([[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])])
    world = pose.apply(corners)
    wlo, whi = world.min(axis=0), world.max(axis=0)
    keep = []
    for prim in primitives:
        box = prim.aabb()
        if box is None:
            keep.append(prim)
            continue
        gap = np.maximum(0.0, np.maximum(box[0] - whi, wlo - box[1]))
        if np.linalg.norm(gap) <= max_distance:
            keep.append(prim)
    return keep or list(primitives[:1])


def _rasterize(primitives, pose, lo, hi, voxel_size, max_distance, noise_sigma, rng, chunk=1 << 21):
    """Voxel indices (submap frame) inside [lo, hi] whose |distance| <= max_distance."""
    primitives = _relevant(primitives, pose, lo, hi, max_distance)
    i0 = point_to_index(lo, voxel_size)
    i1 = point_to_index(hi, voxel_size)
    axes = [np.arange(a, b + 1) for a, b in zip(i0, i1)]
    nx, ny, nz = (len(a) for a in axes)
    plane = ny * nz
    idx_out, d_out = [], []
    step = max(1, chunk // max(plane, 1))
    for x0 in range(0, nx, step):
        gi, gj, gk = np.meshgrid(axes[0][x0 : x0 + step], axes[1], axes[2], indexing="ij")
        idx = np.stack([gi.ravel(), gj.ravel(), gk.ravel()], axis=1)
        centers = index_to_point(idx, voxel_size)
        inside = np.all((centers >= lo) & (centers <= hi), axis=1)
        idx, centers = idx[inside], centers[inside]
        d = scene_sdf(primitives, pose.apply(centers))
        keep = np.abs(d) <= max_distance
        idx_out.append(idx[keep])
        d_out.append(d[keep])
    idx = np.concatenate(idx_out) if idx_out else np.zeros((0, 3), np.int64)
    d = np.concatenate(d_out) if d_out else np.zeros(0)
    if noise_sigma > 0:
        d = d + rng.normal(0.0, noise_sigma, len(d))
    return idx, d


def build_synthetic_scene(
    primitives,
    voxel_size=0.05,
    truncation=None,
    max_distance=None,
    noise_sigma=0.0,
    bounds=None,
    pose: RigidTransform | None = None,
    seed=0,
    submap_id="0",
) -> SdfSubmap:
    """Rasterise the min-union SDF of ``primitives`` into a sparse submap.

    Only voxels with ``|distance| <= max_distance`` are stored (default
    15 voxels). ``bounds`` is ``(lo, hi)`` in the submap frame; by default the
    primitives' bounding box grown by ``max_distance``. ``pose`` places the
    submap grid in the world (identity by default).
    """
    primitives = list(primitives)
    if not primitives:
        raise DegenerateSpec("scene needs at least one primitive")
    truncation = 3 * voxel_size if truncation is None else truncation
    max_distance = 15 * voxel_size if max_distance is None else max_distance
    if bounds is None:
        lo, hi = scene_bounds(primitives, max_distance)
        if pose is not None:
            corners = np.array([[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])])
            local = pose.inverse().apply(corners)
            lo, hi = local.min(axis=0), local.max(axis=0)
    else:
        lo, hi = (np.asarray(b, dtype=np.float64) for b in bounds)
    pose = RigidTransform.identity() if pose is None else pose
    rng = np.random.default_rng(seed)
    idx, d = _rasterize(primitives, pose, lo, hi, voxel_size, max_distance, noise_sigma, rng)
    submap = SdfSubmap(voxel_size, truncation, pose, str(submap_id))
    submap.set_voxels(idx, d, 1.0)
    submap.has_esdf = True
    return submap


def carve_submaps(
    primitives,
    viewpoints,
    extent,
    voxel_size=0.05,
    max_distance=None,
    noise_sigma=0.0,
    seed=0,
    truncation=None,
) -> list[SdfSubmap]:
    """One submap per viewpoint, holding the scene inside a box around it.

    ``extent`` is the box half size in the viewpoint frame. Each submap frame
    coincides with its viewpoint, so ``submap.pose`` is the ground truth
    world_from_submap transform.
    """
    viewpoints = list(viewpoints)
    if not viewpoints:
        raise InputError("need at least one viewpoint")
    h = np.asarray(extent, dtype=np.float64) * np.ones(3)
    seeds = np.random.SeedSequence(seed).spawn(len(viewpoints))
    out = []
    for n, (view, ss) in enumerate(zip(viewpoints, seeds)):
        submap = build_synthetic_scene(
            primitives,
            voxel_size=voxel_size,
            truncation=truncation,
            max_distance=max_distance,
            noise_sigma=noise_sigma,
            bounds=(-h, h),
            pose=view,
            seed=ss,
            submap_id=str(n),
        )
        if len(submap) == 0:
            raise EmptyCarve(f"viewpoint {n} observes no voxels")
        out.append(submap)
    return out


def overlap_volume(a: SdfSubmap, b: SdfSubmap, b_from_a: RigidTransform) -> float:
    """Volume (m^3) of A's voxels whose centres land in stored voxels of B."""
    if len(a) == 0 or len(b) == 0:
        return 0.0
    centers = b_from_a.apply(a.positions())
    hit = b.voxels.contains(point_to_index(centers, b.voxel_size))
    return float(hit.sum()) * a.voxel_size**3


def relative_pose(a: SdfSubmap, b: SdfSubmap) -> RigidTransform:
    """a_from_b from the submaps' world poses."""
    return a.pose.inverse() @ b.pose


@dataclass
class EvaluationPair:
    a: SdfSubmap
    b: SdfSubmap
    a_from_b: RigidTransform
    overlap_volume: float
    is_match: bool


def make_pair(a: SdfSubmap, b: SdfSubmap, match_volume=1.0) -> EvaluationPair:
    a_from_b = relative_pose(a, b)
    vol = overlap_volume(a, b, a_from_b.inverse())
    return EvaluationPair(a, b, a_from_b, vol, vol > match_volume)


# -- scene files ---------------------------------------------------------


@dataclass
class SceneSpec:
    primitives: list = field(default_factory=list)
    voxel_size: float = 0.05
    truncation: float | None = None
    max_distance: float | None = None
    noise_sigma: float = 0.0
    seed: int = 0
    bounds: tuple | None = None
    extent: tuple = (2.0, 2.0, 2.0)
    views: list = field(default_factory=list)

    def carve(self) -> list[SdfSubmap]:
        return carve_submaps(
            self.primitives,
            self.views,
            self.extent,
            voxel_size=self.voxel_size,
            max_distance=self.max_distance,
            noise_sigma=self.noise_sigma,
            seed=self.seed,
            truncation=self.truncation,
        )

    def build(self) -> SdfSubmap:
        return build_synthetic_scene(
            self.primitives,
            voxel_size=self.voxel_size,
            truncation=self.truncation,
            max_distance=self.max_distance,
            noise_sigma=self.noise_sigma,
            bounds=self.bounds,
            seed=self.seed,
        )


def _floats(tokens, lineno, counts):
    if len(tokens) not in counts:
        raise InputError(f"line {lineno}: expected {' or '.join(map(str, counts))} numbers")
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise InputError(f"line {lineno}: {exc}") from None


def parse_scene(text: str) -> SceneSpec:
    spec = SceneSpec()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        word, *rest = line.split()
        if word == "sphere":
            v = _floats(rest, lineno, (4,))
            spec.primitives.append(Sphere(tuple(v[:3]), v[3]))
        elif word == "box":
            v = _floats(rest, lineno, (6, 9))
            rot = tuple(v[6:9]) if len(v) == 9 else (0.0, 0.0, 0.0)
            spec.primitives.append(Box(tuple(v[:3]), tuple(v[3:6]), rot))
        elif word == "plane":
            v = _floats(rest, lineno, (4,))
            spec.primitives.append(Plane(tuple(v[:3]), v[3]))
        elif word == "view":
            v = _floats(rest, lineno, (3, 6))
            rot = v[3:6] if len(v) == 6 else (0.0, 0.0, 0.0)
            spec.views.append(RigidTransform.from_euler(rot, v[:3]))
        elif word == "extent":
            spec.extent = tuple(_floats(rest, lineno, (1, 3)) * (3 if len(rest) == 1 else 1))
        elif word == "bounds":
            v = _floats(rest, lineno, (6,))
            spec.bounds = (tuple(v[:3]), tuple(v[3:]))
        elif word in ("voxel_size", "truncation", "max_distance", "noise"):
            (v,) = _floats(rest, lineno, (1,))
            setattr(spec, "noise_sigma" if word == "noise" else word, v)
        elif word == "seed":
            spec.seed = int(_floats(rest, lineno, (1,))[0])
        else:
            raise InputError(f"line {lineno}: unknown directive {word!r}")
    if not spec.primitives:
        raise DegenerateSpec("scene file has no primitives")
    return spec
