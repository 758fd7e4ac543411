"""Descriptor correspondences and 3-point RANSAC.

Transform convention: candidates map target-submap coordinates into the
query submap, ``p_q ~= T @ p_t``, so the inlier distance is
``||p_q - T p_t||``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTriple, EmptyTarget, NoValidCandidate
from .transform import RigidTransform

MIN_TRIANGLE_AREA = 1e-9
_CHUNK_ITERATIONS = 20_000
_SCORE_BATCH = 64


@dataclass(frozen=True)
class Correspondence:
    p_q: np.ndarray
    p_t: np.ndarray
    distance: float


@dataclass
class Correspondences:
    """Flat correspondence set stored as arrays."""

    p_q: np.ndarray
    p_t: np.ndarray
    distance: np.ndarray
    query_index: np.ndarray
    target_index: np.ndarray

    def __len__(self):
        return len(self.distance)

    def __getitem__(self, i) -> Correspondence:
        return Correspondence(self.p_q[i], self.p_t[i], float(self.distance[i]))

    @classmethod
    def from_points(cls, p_q, p_t, distance=None) -> Correspondences:
        p_q = np.asarray(p_q, dtype=np.float64).reshape(-1, 3)
        p_t = np.asarray(p_t, dtype=np.float64).reshape(-1, 3)
        n = len(p_q)
        d = np.zeros(n) if distance is None else np.asarray(distance, dtype=np.float64)
        return cls(p_q, p_t, d, np.arange(n), np.arange(n))


@dataclass(frozen=True)
class RansacConfig:
    k_dist: float
    k_neighbors: int = 5
    k_consist: float = 0.9
    max_iterations: int = 4_000_000
    rng_seed: int = 0
    early_exit: bool = False
    early_exit_ratio: float = 0.9
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.k_consist < 1:
            raise ValueError("k_consist must lie in (0, 1)")
        if not self.k_dist > 0:
            raise ValueError("k_dist must be positive")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be at least 1")


@dataclass
class TransformCandidate:
    transform: RigidTransform
    inlier_count: int
    sample: tuple


def knn_indices(query: np.ndarray, target: np.ndarray, k: int, block: int = 1024):
    """Exact k nearest target rows per query row.

    Candidates are screened with the BLAS distance expansion, then every
    candidate within a safety margin of the k-th screened distance is
    re-ranked by directly computed distances (ties by target index).
    """
    query = np.asarray(query, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    k = min(k, len(target))
    t_sq = np.einsum("ij,ij->i", target, target)
    scale = float(t_sq.max(initial=0.0)) + 1.0
    out_idx = np.empty((len(query), k), dtype=np.int64)
    out_d = np.empty((len(query), k))
    for s in range(0, len(query), block):
        q = query[s : s + block]
        q_sq = np.einsum("ij,ij->i", q, q)
        approx = q_sq[:, None] + t_sq[None, :] - 2.0 * q @ target.T
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        margin = 1e-9 * (scale + q_sq.max(initial=0.0))
        for r in range(len(q)):
            cand = np.nonzero(approx[r] <= kth[r] + margin)[0]
            d = np.linalg.norm(target[cand] - q[r], axis=1)
            order = np.lexsort((cand, d))[:k]
            out_idx[s + r] = cand[order]
            out_d[s + r] = d[order]
    return out_idx, out_d


def find_correspondences(query_desc, target_desc, query_pos, target_pos, k: int = 5) -> Correspondences:
    """k nearest target descriptors for every query descriptor, flattened."""
    query_desc = np.asarray(query_desc, dtype=np.float64)
    target_desc = np.asarray(target_desc, dtype=np.float64)
    if len(target_desc) == 0:
        raise EmptyTarget("target has no descriptors")
    if len(query_desc) == 0:
        z = np.zeros((0, 3))
        return Correspondences(z, z, np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64))
    idx, dist = knn_indices(query_desc, target_desc, k)
    qi = np.repeat(np.arange(len(query_desc)), idx.shape[1])
    ti = idx.ravel()
    return Correspondences(
        np.asarray(query_pos, dtype=np.float64)[qi],
        np.asarray(target_pos, dtype=np.float64)[ti],
        dist.ravel(),
        qi,
        ti,
    )


def _pair_distances(p):
    """Distances (01, 02, 12) within each triple of a ``(B, 3, 3)`` batch."""
    return np.stack(
        [
            np.linalg.norm(p[:, 0] - p[:, 1], axis=-1),
            np.linalg.norm(p[:, 0] - p[:, 2], axis=-1),
            np.linalg.norm(p[:, 1] - p[:, 2], axis=-1),
        ],
        axis=1,
    )


def consistent_batch(pq: np.ndarray, pt: np.ndarray, k_consist: float) -> np.ndarray:
    d_q = _pair_distances(pq)
    d_t = _pair_distances(pt)
    return np.all((k_consist * d_t < d_q) & (d_q < d_t / k_consist), axis=1)


def consistency_check(triple, k_consist: float = 0.9) -> bool:
    """Edge lengths agree between query and target within factor ``k_consist``."""
    pq = np.array([c.p_q for c in triple], dtype=np.float64)[None]
    pt = np.array([c.p_t for c in triple], dtype=np.float64)[None]
    return bool(consistent_batch(pq, pt, k_consist)[0])


def triangle_area(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return 0.5 * np.linalg.norm(np.cross(p[..., 1, :] - p[..., 0, :], p[..., 2, :] - p[..., 0, :]), axis=-1)


def kabsch_batch(src: np.ndarray, dst: np.ndarray):
    """Least-squares rotations/translations with ``dst ~= R src + t`` per batch item."""
    cs = src.mean(axis=1, keepdims=True)
    cd = dst.mean(axis=1, keepdims=True)
    H = np.einsum("bni,bnj->bij", src - cs, dst - cd)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(np.einsum("bji,bkj->bik", Vt, U)))
    d[d == 0] = 1.0
    D = np.zeros_like(H)
    D[:, 0, 0] = 1.0
    D[:, 1, 1] = 1.0
    D[:, 2, 2] = d
    R = np.einsum("bji,bjk,blk->bil", Vt, D, U)
    t = cd[:, 0] - np.einsum("bij,bj->bi", R, cs[:, 0])
    return R, t


def estimate_rigid(source, target) -> RigidTransform:
    """Rigid transform (no scale) mapping ``source`` points onto ``target`` points.

    Orthogonal Procrustes via SVD with reflection correction.
    """
    src = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if len(src) != len(dst) or len(src) < 3:
        raise ValueError("need at least three paired points")
    if len(src) == 3 and triangle_area(src) <= MIN_TRIANGLE_AREA:
        raise DegenerateTriple("collinear sample")
    R, t = kabsch_batch(src[None], dst[None])
    return RigidTransform(R[0], t[0])


def estimate_from_triple(triple) -> RigidTransform:
    """Transform mapping the target endpoints of three correspondences onto the query ones."""
    pq = np.array([c.p_q for c in triple], dtype=np.float64)
    pt = np.array([c.p_t for c in triple], dtype=np.float64)
    if triangle_area(pq) <= MIN_TRIANGLE_AREA:
        raise DegenerateTriple("collinear query points")
    return estimate_rigid(pt, pq)


def inlier_distances(T: RigidTransform, C: Correspondences) -> np.ndarray:
    return np.linalg.norm(C.p_q - T.apply(C.p_t), axis=1)


def inlier_score(T: RigidTransform, C: Correspondences, k_dist: float) -> int:
    """Number of correspondences with ``||p_q - T p_t|| < k_dist``."""
    if not k_dist > 0:
        raise ValueError("k_dist must be positive")
    return int(np.count_nonzero(inlier_distances(T, C) < k_dist))


def sample_triples(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """``m`` uniformly random triples of distinct indices in ``[0, n)``."""
    a = rng.integers(0, n, m)
    b = rng.integers(0, n - 1, m)
    b = b + (b >= a)
    c = rng.integers(0, n - 2, m)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    c = c + (c >= lo)
    c = c + (c >= hi)
    return np.stack([a, b, c], axis=1)


def _score_batch(R, t, C: Correspondences, k_dist: float) -> np.ndarray:
    counts = np.empty(len(R), dtype=np.int64)
    k2 = k_dist * k_dist
    for s in range(0, len(R), _SCORE_BATCH):
        moved = np.einsum("bij,nj->bni", R[s : s + _SCORE_BATCH], C.p_t) + t[s : s + _SCORE_BATCH, None, :]
        diff = C.p_q[None] - moved
        counts[s : s + _SCORE_BATCH] = np.count_nonzero(np.einsum("bni,bni->bn", diff, diff) < k2, axis=1)
    return counts


def _run_chunk(C: Correspondences, cfg: RansacConfig, seed, n_iter: int):
    rng = np.random.default_rng(seed)
    triples = sample_triples(rng, len(C), n_iter)
    pq = C.p_q[triples]
    pt = C.p_t[triples]
    ok = consistent_batch(pq, pt, cfg.k_consist) & (triangle_area(pq) > MIN_TRIANGLE_AREA)
    pos = np.nonzero(ok)[0]
    if len(pos) == 0:
        return None
    R, t = kabsch_batch(pt[pos], pq[pos])
    counts = _score_batch(R, t, C, cfg.k_dist)
    best = int(np.argmax(counts))  # first maximum
    return int(counts[best]), R[best], t[best], tuple(int(x) for x in triples[pos[best]])


def ransac_register(C: Correspondences, cfg: RansacConfig) -> TransformCandidate:
    """Best 3-point hypothesis by inlier count.

    Iterations run in fixed-size chunks seeded from ``cfg.rng_seed`` via
    ``SeedSequence.spawn``, so results are identical for any worker count.
    Ties keep the earliest hypothesis.
    """
    n = len(C)
    if n < 3:
        raise ValueError("RANSAC needs at least three correspondences")
    n_chunks = max(1, -(-cfg.max_iterations // _CHUNK_ITERATIONS))
    sizes = [_CHUNK_ITERATIONS] * (n_chunks - 1)
    sizes.append(cfg.max_iterations - _CHUNK_ITERATIONS * (n_chunks - 1))
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(n_chunks)

    best = None
    target = cfg.early_exit_ratio * n

    def consider(result):
        nonlocal best
        if result is not None and (best is None or result[0] > best[0]):
            best = result

    if cfg.workers > 1 and not cfg.early_exit:
        with ThreadPoolExecutor(cfg.workers) as pool:
            for result in pool.map(lambda a: _run_chunk(C, cfg, *a), zip(seeds, sizes)):
                consider(result)
    else:
        for seed, size in zip(seeds, sizes):
            consider(_run_chunk(C, cfg, seed, size))
            if cfg.early_exit and best is not None and best[0] > target:
                break
    if best is None:
        raise NoValidCandidate("no sampled triple passed the consistency check")
    count, R, t, sample = best
    return TransformCandidate(RigidTransform(R, t), count, sample)
