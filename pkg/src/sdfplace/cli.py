"""Command line driver: ``sdfplace <command> ...``.

Commands:

    build     point clouds or a scene file -> submap archives (.fsdf)
    synth     write one of the built-in fixture collections as archives
    features  keypoints.csv, lrfs.csv and descriptors.bin for one archive
    match     register two archives, pairs.csv with one row
    evaluate  all pairs of a collection, pairs.csv and pr.csv
    ablate    evaluate under several free-space limits, pairs.csv and pr.csv

Every command reads ``--config FILE`` (``key = value`` lines, see
``PipelineConfig``) and accepts flag overrides on top of it. Exit status is
0 on success, 2 for usage errors, 3 for bad input and 4 when a computation
cannot proceed.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import fixtures, io
from .errors import InputError, SdfPlaceError
from .pipeline import (
    DEFAULT_D_LIMS,
    PipelineConfig,
    ablate_freespace,
    evaluate_collection,
    extract_features,
    match_pair,
    pair_record,
)
from .scene import parse_scene
from .sdf import SdfSubmap, compute_esdf, integrate_pointcloud
from .transform import RigidTransform

log = logging.getLogger("sdfplace")

FIXTURES = {
    "registration": lambda seed: list(fixtures.registration_pair(seed)[:2]),
    "places": lambda seed: fixtures.place_collection(seed=seed),
    "corridor": lambda seed: fixtures.corridor_collection(seed=seed),
}

# flag -> config key
OVERRIDES = {
    "max_keypoints": "max_keypoints",
    "d_lim": "d_lim",
    "k_dist": "k_dist",
    "iters": "ransac_iterations",
    "seed": "seed",
    "knn": "knn",
    "k_overlap": "k_overlap",
    "fitness_threshold": "fitness_threshold",
    "pose_gate": "pose_gate",
    "workers": "workers",
}


class UsageError(SdfPlaceError):
    category = "usage"
    exit_code = 2


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config:
        cfg = PipelineConfig.loads(Path(args.config).read_text(), cfg)
    changes = {key: getattr(args, flag) for flag, key in OVERRIDES.items() if getattr(args, flag, None) is not None}
    for kv in args.set or ():
        if "=" not in kv:
            raise UsageError(f"--set expects key=value, got {kv!r}")
        k, v = kv.split("=", 1)
        changes[k.strip()] = v.strip()
    return cfg.with_strings(changes)


def _sweep(text: str | None):
    if text is None:
        return None
    try:
        lo, hi, n = text.split(":")
        return list(np.linspace(float(lo), float(hi), int(n)))
    except ValueError:
        raise UsageError(f"--fitness-sweep expects lo:hi:n, got {text!r}") from None


def _archives(paths) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out += sorted(p.glob("*.fsdf"))
        else:
            out.append(p)
    if not out:
        raise InputError("no submap archives given")
    return out


def _load(paths) -> list[SdfSubmap]:
    return [io.load_submap(p) for p in _archives(paths)]


def _outdir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_collection(submaps, out: Path) -> None:
    files = []
    for s in submaps:
        name = f"{s.id}.fsdf"
        io.save_submap(s, out / name)
        files.append(name)
    io.write_poses_csv(out / "poses.csv", submaps, files)
    log.info("wrote %d submaps to %s", len(submaps), out)


def cmd_build(args) -> None:
    out = _outdir(args)
    if args.scene:
        spec = parse_scene(Path(args.scene).read_text())
        submaps = spec.carve() if spec.views else [spec.build()]
        _write_collection(submaps, out)
        return
    if not args.points:
        raise UsageError("build needs --scene or --points")
    origins = args.origin or [[0.0, 0.0, 0.0]]
    if len(origins) not in (1, len(args.points)):
        raise UsageError("give one --origin, or one per point cloud")
    trunc = args.truncation if args.truncation is not None else 3 * args.voxel_size
    tsdf = SdfSubmap(args.voxel_size, trunc, RigidTransform.identity(), args.id)
    for n, path in enumerate(args.points):
        pts = io.read_pointcloud(path)
        try:
            integrate_pointcloud(tsdf, origins[n if len(origins) > 1 else 0], pts)
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
    if len(tsdf) == 0:
        raise InputError("point clouds produced no observed voxels")
    _write_collection([compute_esdf(tsdf, args.max_distance)], out)


def cmd_synth(args) -> None:
    _write_collection(FIXTURES[args.fixture](args.fixture_seed), _outdir(args))


def cmd_features(args) -> None:
    cfg = _config(args)
    out = _outdir(args)
    (submap,) = _load([args.submap])
    f = extract_features(submap, cfg)
    io.write_keypoints_csv(out / "keypoints.csv", f.keypoints)
    io.write_lrfs_csv(out / "lrfs.csv", f.descriptors, f.lrfs)
    (out / "descriptors.bin").write_bytes(io.descriptors_to_bytes(f.descriptors, cfg.n_div))
    log.info("%s: %d keypoints, %d descriptors", submap.id, len(f.keypoints), len(f.descriptors))


def cmd_match(args) -> None:
    cfg = _config(args)
    out = _outdir(args)
    q, t = _load([args.query, args.target])
    result = match_pair(extract_features(q, cfg), extract_features(t, cfg), cfg)
    io.write_pairs_csv(out / "pairs.csv", [pair_record(q, t, result, cfg)])
    print(f"{q.id} {t.id} {result.decision.value} fitness={result.fitness}")


def cmd_evaluate(args) -> None:
    cfg = _config(args)
    out = _outdir(args)
    ev = evaluate_collection(_load(args.submaps), cfg, _sweep(args.fitness_sweep))
    io.write_pairs_csv(out / "pairs.csv", ev.pairs)
    io.write_pr_csv(out / "pr.csv", ev.pr)
    print(f"pairs={len(ev.pairs)} aupr={ev.auc():.6f}")


def cmd_ablate(args) -> None:
    cfg = _config(args)
    out = _outdir(args)
    d_lims = DEFAULT_D_LIMS if args.d_lims is None else [float(v) for v in args.d_lims.split(",")]
    res = ablate_freespace(_load(args.submaps), cfg, d_lims, _sweep(args.fitness_sweep))
    io.write_pairs_csv(out / "pairs.csv", {d: e.pairs for d, e in res.items()})
    io.write_pr_csv(out / "pr.csv", {d: e.pr for d, e in res.items()})
    for d, e in res.items():
        print(f"d_lim={'inf' if math.isinf(d) else d} aupr={e.auc():.6f}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--max-keypoints", type=int)
    p.add_argument("--d-lim", type=float)
    p.add_argument("--k-dist", type=float)
    p.add_argument("--iters", type=int, help="RANSAC iterations")
    p.add_argument("--seed", type=int)
    p.add_argument("--knn", type=int)
    p.add_argument("--k-overlap", type=float)
    p.add_argument("--fitness-threshold", type=float)
    p.add_argument("--pose-gate", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdfplace", description="SDF submap place recognition")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="point clouds or scene file -> submap archives")
    p.add_argument("--scene", help="scene description file")
    p.add_argument("--points", nargs="+", help=".ply or .xyz files in the submap frame")
    p.add_argument("--origin", nargs=3, type=float, action="append", help="sensor origin (repeat per cloud)")
    p.add_argument("--voxel-size", type=float, default=0.05)
    p.add_argument("--truncation", type=float)
    p.add_argument("--max-distance", type=float)
    p.add_argument("--id", default="0")
    p.add_argument("-o", "--output", default=".")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("synth", help="write a built-in fixture collection")
    p.add_argument("fixture", choices=sorted(FIXTURES))
    p.add_argument("--fixture-seed", type=int, default=0, help="noise seed")
    p.add_argument("-o", "--output", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="keypoints, LRFs and descriptors of one submap")
    p.add_argument("submap")
    _common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("match", help="match two submaps")
    p.add_argument("query")
    p.add_argument("target")
    _common(p)
    p.set_defaults(func=cmd_match)

    for name, func, text in (
        ("evaluate", cmd_evaluate, "match all pairs and sweep the fitness threshold"),
        ("ablate", cmd_ablate, "evaluate with free-space keypoints removed"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("submaps", nargs="+", help="archives or directories of archives")
        p.add_argument("--fitness-sweep", metavar="LO:HI:N")
        if name == "ablate":
            p.add_argument("--d-lims", help="comma separated limits in meters")
        _common(p)
        p.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except SdfPlaceError as exc:
        print(f"sdfplace: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"sdfplace: input: {exc}", file=sys.stderr)
        return InputError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
