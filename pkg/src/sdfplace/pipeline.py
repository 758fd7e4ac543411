"""End-to-end feature extraction, pairwise matching and evaluation."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .descriptor import Descriptor, DescriptorParams, describe, descriptor_length, mean_support_distance
from .errors import DegenerateTensor, InputError, InsufficientSubmaps, InsufficientSupport, NoValidCandidate
from .filtering import FilterBank, compute_filters
from .fitness import Decision, MatchResult, decide, evaluate_fitness
from .keypoints import Keypoint, detect_extrema, doh_response, filter_by_surface_distance, select_top_n
from .lrf import Lrf, assign_lrfs, collect_support, structure_tensor
from .registration import Correspondences, RansacConfig, find_correspondences, ransac_register
from .scene import overlap_volume, relative_pose
from .sdf import IsoSurfaceCloud, SdfSubmap, extract_isosurface

log = logging.getLogger(__name__)

DEFAULT_D_LIMS = (0.30, 0.25, 0.20, 0.15, 0.10, 0.05)


@dataclass
class PipelineConfig:
    r_f: float = 15
    n_div: int = 10
    knn: int = 5
    alpha_dist: float = 1e-7
    alpha_class: float = 1e-5
    sigma_grad: float = 2
    sigma_desc: float = 15
    k_axis: float = 0.5
    k_consist: float = 0.9
    k_dist: float | None = None
    k_overlap: float = 0.15
    max_keypoints: int = 5000
    ransac_iterations: int = 4_000_000
    seed: int = 0
    fitness_threshold: float = 0.05
    pose_gate: float = 0.2
    rotation_gate_deg: float | None = None
    match_volume: float = 1.0
    d_lim: float | None = None
    class_source: str = "hessian"
    solid_angle: str = "effective"
    signed_fitness: bool = False
    early_exit: bool = False
    workers: int = 1

    def descriptor_params(self) -> DescriptorParams:
        return DescriptorParams(
            self.n_div, self.alpha_dist, self.alpha_class, self.r_f, self.sigma_desc, self.class_source, self.solid_angle
        )

    def ransac_config(self) -> RansacConfig:
        if self.k_dist is None:
            raise InputError("k_dist is scene-scale and must be configured")
        return RansacConfig(
            k_dist=self.k_dist,
            k_neighbors=self.knn,
            k_consist=self.k_consist,
            max_iterations=self.ransac_iterations,
            rng_seed=self.seed,
            early_exit=self.early_exit,
            workers=self.workers,
        )

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)

    # key=value text form ------------------------------------------------
    def dumps(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'none' if v is None else repr(v) if isinstance(v, float) else v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, base: PipelineConfig | None = None) -> PipelineConfig:
        cfg = base or cls()
        changes = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"config line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            changes[key] = value
        return cfg.with_strings(changes)

    def with_strings(self, changes: dict) -> PipelineConfig:
        """Apply string-valued overrides, converting by field type."""
        types = {f.name: f.type for f in dataclasses.fields(self)}
        parsed = {}
        for key, value in changes.items():
            if key not in types:
                raise InputError(f"unknown config key {key!r}")
            parsed[key] = _parse_value(str(value), types[key], key)
        return self.replace(**parsed)


def _parse_value(value: str, type_name: str, key: str):
    if value.lower() == "none":
        if "None" not in type_name:
            raise InputError(f"{key} cannot be none")
        return None
    try:
        if type_name.startswith("bool"):
            if value.lower() not in ("true", "false", "1", "0"):
                raise ValueError(value)
            return value.lower() in ("true", "1")
        if type_name.startswith("int"):
            return int(float(value)) if "e" in value.lower() else int(value)
        if type_name.startswith("float"):
            return float(value)
        return value
    except ValueError:
        raise InputError(f"bad value for {key}: {value!r}") from None


# -- features --------------------------------------------------------------


@dataclass
class Features:
    submap: SdfSubmap
    keypoints: list
    lrfs: list
    descriptors: list
    iso: IsoSurfaceCloud

    @property
    def matrix(self) -> np.ndarray:
        if not self.descriptors:
            return np.zeros((0, 0))
        return np.stack([d.values for d in self.descriptors])

    @property
    def positions(self) -> np.ndarray:
        if not self.descriptors:
            return np.zeros((0, 3))
        return np.stack([d.position for d in self.descriptors])


@dataclass
class PreparedSubmap:
    """Per-submap intermediate results shared between feature variants."""

    submap: SdfSubmap
    filters: FilterBank | None
    extrema: list
    iso: IsoSurfaceCloud
    _described: dict = field(default_factory=dict)


def prepare_submap(submap: SdfSubmap, cfg: PipelineConfig) -> PreparedSubmap:
    if len(submap) == 0:
        return PreparedSubmap(submap, None, [], IsoSurfaceCloud(np.zeros((0, 3)), True))
    fb = compute_filters(submap, cfg.sigma_grad, cfg.workers)
    kps = detect_extrema(doh_response(fb.hessian), submap, fb.hessian)
    kps = select_top_n(kps, len(kps)) if kps else []
    return PreparedSubmap(submap, fb, kps, extract_isosurface(submap))


def describe_keypoint(prep: PreparedSubmap, kp: Keypoint, cfg: PipelineConfig):
    """``(lrfs, descriptors)`` for one keypoint; empty when it must be skipped."""
    params = cfg.descriptor_params()
    try:
        support = collect_support(prep.filters.gradient, kp, cfg.r_f, cfg.sigma_desc)
        lrfs = assign_lrfs(structure_tensor(support), support, cfg.k_axis)
    except (InsufficientSupport, DegenerateTensor) as exc:
        log.debug("skipping keypoint %s: %s", kp.index, exc)
        return [], []
    b_dist = mean_support_distance(prep.submap, kp, cfg.r_f, cfg.sigma_desc)
    return lrfs, [describe(support, lrf, prep.submap, kp, params, b_dist) for lrf in lrfs]


def features_from_prepared(prep: PreparedSubmap, cfg: PipelineConfig, d_lim: float | None = None) -> Features:
    """Top-N keypoints (after optional distance filtering) with their descriptors."""
    d_lim = cfg.d_lim if d_lim is None else d_lim
    kps = prep.extrema
    if d_lim is not None and math.isfinite(d_lim):
        kps = filter_by_surface_distance(kps, d_lim)
    kps = kps[: cfg.max_keypoints]
    todo = [kp for kp in kps if kp.index not in prep._described]
    if cfg.workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            done = list(pool.map(lambda kp: describe_keypoint(prep, kp, cfg), todo))
    else:
        done = [describe_keypoint(prep, kp, cfg) for kp in todo]
    for kp, res in zip(todo, done):
        prep._described[kp.index] = res
    keypoints, lrfs, descriptors = [], [], []
    for kp in kps:
        kl, kd = prep._described[kp.index]
        keypoints.append(kp)
        lrfs.extend(kl)
        descriptors.extend(kd)
    return Features(prep.submap, keypoints, lrfs, descriptors, prep.iso)


def extract_features(submap: SdfSubmap, cfg: PipelineConfig, d_lim: float | None = None) -> Features:
    """Filters, keypoints, LRFs and descriptors for one submap."""
    return features_from_prepared(prepare_submap(submap, cfg), cfg, d_lim)


# -- matching --------------------------------------------------------------


def match_pair(query: Features, target: Features, cfg: PipelineConfig) -> MatchResult:
    """Correspondences, RANSAC, SDF fitness and the match decision.

    The returned transform maps target coordinates into the query frame.
    """
    qid, tid = query.submap.id, target.submap.id
    empty = MatchResult(qid, tid, None, 0, None, 0.0, Decision.NO_CANDIDATE)
    if not query.descriptors or not target.descriptors:
        return empty
    C: Correspondences = find_correspondences(query.matrix, target.matrix, query.positions, target.positions, cfg.knn)
    empty.n_correspondences = len(C)
    if len(C) < 3:
        return empty
    try:
        cand = ransac_register(C, cfg.ransac_config())
    except NoValidCandidate:
        return empty
    ev = evaluate_fitness(
        query.submap, query.iso, target.submap, target.iso, cand.transform, cfg.k_overlap, cfg.signed_fitness
    )
    decision = decide(ev.fitness, ev.overlap_ok, cfg.fitness_threshold)
    return MatchResult(qid, tid, cand.transform, cand.inlier_count, ev.fitness, ev.overlap_fraction, decision, len(C))


# -- evaluation ------------------------------------------------------------


@dataclass
class PairRecord:
    query_id: str
    target_id: str
    overlap_volume: float
    is_match: bool
    result: MatchResult
    translation_error: float | None
    rotation_error_deg: float | None
    pose_ok: bool

    def predicted(self, threshold: float) -> bool:
        r = self.result
        if r.transform is None or r.fitness is None:
            return False
        return decide(r.fitness, True, threshold) is Decision.MATCHED


@dataclass(frozen=True)
class PrPoint:
    threshold: float
    precision: float | None
    recall: float | None
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass
class Evaluation:
    pairs: list
    pr: list

    def auc(self) -> float:
        return pr_auc(self.pr)


def pr_point(pairs, threshold: float) -> PrPoint:
    """Confusion counts at one fitness threshold.

    A predicted match is a true positive only when the pair truly overlaps
    and the pose passes the gate; every other predicted match is a false
    positive. Unpredicted overlapping pairs are false negatives.
    """
    tp = fp = fn = tn = 0
    for rec in pairs:
        pred = rec.predicted(threshold)
        if pred and rec.is_match and rec.pose_ok:
            tp += 1
        elif pred:
            fp += 1
        elif rec.is_match:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    return PrPoint(threshold, precision, recall, tp, fp, fn, tn)


def default_thresholds(pairs) -> list:
    """Zero plus one threshold just above each observed |fitness|."""
    vals = sorted({abs(r.result.fitness) for r in pairs if r.result.fitness is not None})
    return [0.0] + [v * (1 + 1e-9) + 1e-12 for v in vals]


def pr_auc(points) -> float:
    """Step-wise area under the PR curve (average-precision style)."""
    pts = sorted((p for p in points if p.recall is not None), key=lambda p: (p.recall, p.threshold))
    area, prev = 0.0, 0.0
    for p in pts:
        if p.recall > prev:
            area += (p.recall - prev) * (p.precision or 0.0)
            prev = p.recall
    return area


def pair_record(query: SdfSubmap, target: SdfSubmap, result: MatchResult, cfg: PipelineConfig) -> PairRecord:
    """Attach ground truth (from the submap poses) to a match result."""
    vol = overlap_volume(query, target, relative_pose(query, target).inverse())
    t_err = r_err = None
    ok = False
    if result.transform is not None:
        t_err, r_err = relative_pose(query, target).distance_to(result.transform)
        ok = t_err <= cfg.pose_gate and (cfg.rotation_gate_deg is None or r_err <= cfg.rotation_gate_deg)
    return PairRecord(query.id, target.id, vol, vol > cfg.match_volume, result, t_err, r_err, ok)


def evaluate_collection(
    submaps,
    cfg: PipelineConfig,
    thresholds=None,
    prepared=None,
    d_lim: float | None = None,
) -> Evaluation:
    """Match every unordered pair once (lower index as query) and sweep thresholds.

    Submap poses are ground truth; overlapping volume above
    ``cfg.match_volume`` defines true matches.
    """
    submaps = list(submaps)
    if len(submaps) < 2:
        raise InsufficientSubmaps("evaluation needs at least two submaps")
    if prepared is None:
        prepared = [prepare_submap(s, cfg) for s in submaps]
    feats = [features_from_prepared(p, cfg, d_lim) for p in prepared]
    pairs = []
    for i, j in combinations(range(len(submaps)), 2):
        pairs.append(pair_record(submaps[i], submaps[j], match_pair(feats[i], feats[j], cfg), cfg))
    if thresholds is None:
        thresholds = default_thresholds(pairs)
    return Evaluation(pairs, [pr_point(pairs, t) for t in thresholds])


def ablate_freespace(submaps, cfg: PipelineConfig, d_lims=DEFAULT_D_LIMS, thresholds=None) -> dict:
    """Evaluation per surface-distance limit; ``inf`` is the unrestricted baseline.

    Filtered keypoint sets are refilled from the full response ordering, so
    each limit still gets up to ``max_keypoints`` keypoints.
    """
    submaps = list(submaps)
    prepared = [prepare_submap(s, cfg) for s in submaps]
    out = {}
    for d in [math.inf, *d_lims]:
        out[d] = evaluate_collection(submaps, cfg, thresholds, prepared, d_lim=d)
    return out


def descriptor_dimension(cfg: PipelineConfig) -> int:
    return descriptor_length(cfg.n_div)


__all__ = [
    "Descriptor",
    "Evaluation",
    "Features",
    "Lrf",
    "DEFAULT_D_LIMS",
    "PairRecord",
    "PipelineConfig",
    "PrPoint",
    "ablate_freespace",
    "evaluate_collection",
    "extract_features",
    "match_pair",
    "pair_record",
    "pr_auc",
    "pr_point",
]
