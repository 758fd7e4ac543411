"""SDF-based verification of a registration candidate."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .sdf import IsoSurfaceCloud, SdfSubmap, sample_trilinear_many
from .transform import RigidTransform

DEFAULT_K_OVERLAP = 0.15


class Decision(str, Enum):
    MATCHED = "matched"
    REJECTED_OVERLAP = "rejected_overlap"
    REJECTED_FITNESS = "rejected_fitness"
    NO_CANDIDATE = "no_candidate"


@dataclass(frozen=True)
class DirectionalSum:
    weighted_sum: float
    weight_sum: float
    valid_count: int
    total_count: int


@dataclass
class MatchResult:
    query_id: str
    target_id: str
    transform: RigidTransform | None
    inlier_count: int
    fitness: float | None
    overlap_fraction: float
    decision: Decision
    n_correspondences: int = 0


def directional_sum(sdf: SdfSubmap, iso: IsoSurfaceCloud, T: RigidTransform, signed: bool = False) -> DirectionalSum:
    """Weighted distance sum of ``sdf`` sampled at ``T``-transformed iso points.

    ``T`` maps the iso points' frame into the frame of ``sdf``. Unobserved
    samples only count towards ``total_count``. With ``signed=False`` the
    absolute distance is accumulated.
    """
    pts = np.asarray(iso.points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        return DirectionalSum(0.0, 0.0, 0, 0)
    d, w, ok = sample_trilinear_many(sdf, T.apply(pts))
    d, w = d[ok], w[ok]
    if not signed:
        d = np.abs(d)
    return DirectionalSum(float(np.sum(w * d)), float(np.sum(w)), int(ok.sum()), len(pts))


@dataclass(frozen=True)
class FitnessEvaluation:
    fitness: float | None
    overlap_fraction: float
    overlap_ok: bool
    forward: DirectionalSum
    backward: DirectionalSum


def evaluate_fitness(
    query: SdfSubmap,
    query_iso: IsoSurfaceCloud,
    target: SdfSubmap,
    target_iso: IsoSurfaceCloud,
    T: RigidTransform,
    k_overlap: float = DEFAULT_K_OVERLAP,
    signed: bool = False,
) -> FitnessEvaluation:
    """Negative weighted mean distance of each map's surface in the other map.

    ``T`` maps target coordinates into the query frame. Fitness is in meters
    and ``None`` when the overlap gate fails or no weight was collected.
    """
    fwd = directional_sum(query, target_iso, T, signed)
    bwd = directional_sum(target, query_iso, T.inverse(), signed)
    total = fwd.total_count + bwd.total_count
    overlap = (fwd.valid_count + bwd.valid_count) / total if total else 0.0
    N = fwd.weight_sum + bwd.weight_sum
    ok = overlap >= k_overlap and N > 0
    fitness = -(fwd.weighted_sum + bwd.weighted_sum) / N if ok else None
    return FitnessEvaluation(fitness, overlap, ok, fwd, bwd)


def decide(fitness: float | None, overlap_ok: bool, fitness_threshold: float) -> Decision:
    if not overlap_ok or fitness is None:
        return Decision.REJECTED_OVERLAP
    if abs(fitness) < fitness_threshold:
        return Decision.MATCHED
    return Decision.REJECTED_FITNESS
