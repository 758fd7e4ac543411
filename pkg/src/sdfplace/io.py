"""File formats: submap archives, point clouds, feature dumps and result CSVs.

Submap archive (little-endian)::

    magic "FSDF" | version u32 | voxel_size f64 | truncation f64
    | rotation 9 x f64 (row-major) | translation 3 x f64 | count u64
    then count records of {i32 x 3 index, f32 distance, f32 weight}

Descriptor dump (little-endian)::

    n_div u32 | count u64
    then count records of {i32 x 3 keypoint index, u8 lrf ordinal, f32 x (2 n_div^2 + 2)}
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .descriptor import descriptor_length
from .errors import InputError, UnsupportedVersion
from .grid import SparseField
from .sdf import SdfSubmap
from .transform import RigidTransform

ARCHIVE_MAGIC = b"FSDF"
ARCHIVE_VERSION = 1
_HEADER = struct.Struct("<4sIdd9d3dQ")
_RECORD = np.dtype([("index", "<i4", (3,)), ("distance", "<f4"), ("weight", "<f4")])
_DESC_HEADER = struct.Struct("<IQ")


def submap_to_bytes(submap: SdfSubmap) -> bytes:
    idx, d, w = submap.arrays()
    R = submap.pose.rotation
    header = _HEADER.pack(
        ARCHIVE_MAGIC,
        ARCHIVE_VERSION,
        submap.voxel_size,
        submap.truncation,
        *R.ravel(),
        *submap.pose.translation,
        len(idx),
    )
    rec = np.empty(len(idx), dtype=_RECORD)
    rec["index"] = idx
    rec["distance"] = d
    rec["weight"] = w
    return header + rec.tobytes()


def submap_from_bytes(data: bytes, submap_id: str = "0") -> SdfSubmap:
    if len(data) < _HEADER.size:
        raise InputError("truncated submap archive")
    fields = _HEADER.unpack_from(data)
    magic, version, vs, trunc = fields[:4]
    if magic != ARCHIVE_MAGIC:
        raise InputError("not a submap archive (bad magic)")
    if version != ARCHIVE_VERSION:
        raise UnsupportedVersion(f"submap archive version {version} is not supported")
    R = np.array(fields[4:13]).reshape(3, 3)
    t = np.array(fields[13:16])
    count = fields[16]
    body = data[_HEADER.size :]
    if len(body) != count * _RECORD.itemsize:
        raise InputError("submap archive record count does not match its size")
    rec = np.frombuffer(body, dtype=_RECORD)
    submap = SdfSubmap(vs, trunc, RigidTransform(R, t), submap_id)
    submap.set_voxels(rec["index"].astype(np.int64), rec["distance"].astype(np.float64), rec["weight"].astype(np.float64))
    submap.has_esdf = True
    return submap


def save_submap(submap: SdfSubmap, path) -> None:
    Path(path).write_bytes(submap_to_bytes(submap))


def load_submap(path, submap_id: str | None = None) -> SdfSubmap:
    path = Path(path)
    return submap_from_bytes(path.read_bytes(), path.stem if submap_id is None else submap_id)


def field_to_submap(field: SparseField, voxel_size: float, pose=None) -> SdfSubmap:
    """Wrap a scalar field as a submap (weight 1) for debug dumps."""
    idx, vals = field.to_arrays()
    out = SdfSubmap(voxel_size, 2 * voxel_size, pose or RigidTransform.identity(), "field")
    out.set_voxels(idx, vals, 1.0)
    return out


# -- point clouds ----------------------------------------------------------


def read_xyz(path) -> np.ndarray:
    pts = np.loadtxt(path, ndmin=2, usecols=(0, 1, 2), comments="#")
    return pts.reshape(-1, 3)


def read_ply(path) -> np.ndarray:
    """Vertex positions from an ASCII PLY file."""
    with open(path, encoding="ascii", errors="replace") as fh:
        if fh.readline().strip() != "ply":
            raise InputError(f"{path}: not a PLY file")
        n_vertex, props, element, fmt = None, [], None, None
        for line in fh:
            words = line.split()
            if not words:
                continue
            if words[0] == "format":
                fmt = words[1]
            elif words[0] == "element":
                element = words[1]
                if element == "vertex":
                    n_vertex = int(words[2])
            elif words[0] == "property" and element == "vertex":
                props.append(words[-1])
            elif words[0] == "end_header":
                break
        if fmt != "ascii":
            raise InputError(f"{path}: only ASCII PLY is supported")
        if n_vertex is None or not {"x", "y", "z"} <= set(props):
            raise InputError(f"{path}: PLY has no x/y/z vertex properties")
        rows = [fh.readline() for _ in range(n_vertex)]
    data = np.loadtxt(io.StringIO("".join(rows)), ndmin=2)
    if data.shape[0] != n_vertex:
        raise InputError(f"{path}: expected {n_vertex} vertices")
    cols = [props.index(c) for c in "xyz"]
    return data[:, cols]


def write_ply(path, points) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    with open(path, "w") as fh:
        fh.write(f"ply\nformat ascii 1.0\nelement vertex {len(pts)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\nend_header\n")
        np.savetxt(fh, pts, fmt="%.9g")


def read_pointcloud(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".ply":
        return read_ply(path)
    return read_xyz(path)


# -- feature dumps ---------------------------------------------------------


def descriptors_to_bytes(descriptors, n_div: int) -> bytes:
    dim = descriptor_length(n_div)
    dtype = np.dtype([("index", "<i4", (3,)), ("lrf", "u1"), ("values", "<f4", (dim,))])
    rec = np.empty(len(descriptors), dtype=dtype)
    for n, d in enumerate(descriptors):
        if len(d.values) != dim:
            raise InputError("descriptor length does not match n_div")
        rec[n] = (d.keypoint_index, d.lrf_ordinal, d.values)
    return _DESC_HEADER.pack(n_div, len(descriptors)) + rec.tobytes()


def descriptors_from_bytes(data: bytes):
    """``(n_div, records)`` where records is a numpy structured array."""
    n_div, count = _DESC_HEADER.unpack_from(data)
    dim = descriptor_length(n_div)
    dtype = np.dtype([("index", "<i4", (3,)), ("lrf", "u1"), ("values", "<f4", (dim,))])
    body = data[_DESC_HEADER.size :]
    if len(body) != count * dtype.itemsize:
        raise InputError("descriptor dump size does not match its header")
    return n_div, np.frombuffer(body, dtype=dtype)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_keypoints_csv(path, keypoints) -> None:
    _write_rows(
        path,
        ["i", "j", "k", "x", "y", "z", "response", "sdf_value"],
        ([*kp.index, *kp.position, kp.response, kp.sdf_value] for kp in keypoints),
    )


def read_keypoints_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_lrfs_csv(path, descriptors, lrfs) -> None:
    header = ["i", "j", "k", "ordinal"] + [f"r{a}{b}" for a in range(3) for b in range(3)] + ["e1", "e2", "e3"]
    _write_rows(
        path,
        header,
        ([*d.keypoint_index, lrf.ordinal, *lrf.rotation.ravel(), *lrf.eigenvalues] for d, lrf in zip(descriptors, lrfs)),
    )


PAIR_COLUMNS = [
    "query",
    "target",
    "overlap_volume",
    "is_match",
    "decision",
    "n_correspondences",
    "inlier_count",
    "fitness",
    "overlap_fraction",
    "translation_error",
    "rotation_error_deg",
    "pose_ok",
    "tx",
    "ty",
    "tz",
    "rotvec_x",
    "rotvec_y",
    "rotvec_z",
]


def pair_row(rec) -> list:
    r = rec.result
    if r.transform is not None:
        t = list(r.transform.translation)
        rv = list(Rotation.from_matrix(r.transform.rotation).as_rotvec())
    else:
        t = rv = [None] * 3
    return [
        rec.query_id,
        rec.target_id,
        rec.overlap_volume,
        int(rec.is_match),
        r.decision.value,
        r.n_correspondences,
        r.inlier_count,
        r.fitness,
        r.overlap_fraction,
        rec.translation_error,
        rec.rotation_error_deg,
        int(rec.pose_ok),
        *t,
        *rv,
    ]


def write_pairs_csv(path, pairs) -> None:
    """Per-pair log. A ``{d_lim: records}`` mapping adds a leading d_lim column."""
    if isinstance(pairs, dict):
        rows = ([d, *pair_row(p)] for d, recs in pairs.items() for p in recs)
        _write_rows(path, ["d_lim"] + PAIR_COLUMNS, rows)
    else:
        _write_rows(path, PAIR_COLUMNS, (pair_row(p) for p in pairs))


PR_COLUMNS = ["threshold", "precision", "recall", "tp", "fp", "fn", "tn"]


def _pr_row(p) -> list:
    return [p.threshold, p.precision, p.recall, p.tp, p.fp, p.fn, p.tn]


def write_pr_csv(path, points) -> None:
    """PR sweep. A ``{d_lim: points}`` mapping adds a leading d_lim column."""
    if isinstance(points, dict):
        _write_rows(path, ["d_lim"] + PR_COLUMNS, ([d, *_pr_row(p)] for d, pts in points.items() for p in pts))
    else:
        _write_rows(path, PR_COLUMNS, (_pr_row(p) for p in points))


def write_poses_csv(path, submaps, files) -> None:
    rows = []
    for s, f in zip(submaps, files):
        rows.append([s.id, f, *s.pose.translation, *Rotation.from_matrix(s.pose.rotation).as_rotvec()])
    _write_rows(path, ["id", "file", "tx", "ty", "tz", "rotvec_x", "rotvec_y", "rotvec_z"], rows)
