"""Block-hashed sparse voxel storage.

Voxels are grouped into dense ``8x8x8`` blocks; a dict keyed by block
coordinates maps to a slot in stacked block arrays. Vectorised lookups go
through a dense block lookup table over the bounding box of allocated blocks
(falling back to the dict when that box gets too large).
"""

from __future__ import annotations

import numpy as np

BLOCK_SIZE = 8
_BLOCK_SHIFT = 3
_KEY_BITS = 21
_KEY_OFFSET = 1 << 20
_KEY_MASK = (1 << _KEY_BITS) - 1
_MAX_LUT_CELLS = 1 << 24

# 26-neighbourhood offsets, lexicographic order
NEIGHBOR_OFFSETS = np.array(
    [(i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1) if (i, j, k) != (0, 0, 0)],
    dtype=np.int64,
)


def voxel_key(indices) -> np.ndarray:
    """Pack integer voxel indices into 64-bit keys (valid for |component| < 2**20)."""
    idx = np.asarray(indices, dtype=np.int64)
    if np.any(np.abs(idx) >= _KEY_OFFSET):
        raise ValueError("voxel index component out of hashable range")
    u = idx + _KEY_OFFSET
    return (u[..., 0] << (2 * _KEY_BITS)) | (u[..., 1] << _KEY_BITS) | u[..., 2]


def key_to_voxel(keys) -> np.ndarray:
    k = np.asarray(keys, dtype=np.int64)
    out = np.stack(
        [(k >> (2 * _KEY_BITS)) & _KEY_MASK, (k >> _KEY_BITS) & _KEY_MASK, k & _KEY_MASK], axis=-1
    )
    return out - _KEY_OFFSET


def index_to_point(indices, voxel_size: float) -> np.ndarray:
    """Voxel-center convention: ``p = voxel_size * (index + 0.5)``."""
    return voxel_size * (np.asarray(indices, dtype=np.float64) + 0.5)


def point_to_index(points, voxel_size: float) -> np.ndarray:
    """Index of the voxel containing each point."""
    return np.floor(np.asarray(points, dtype=np.float64) / voxel_size).astype(np.int64)


class SparseField:
    """Sparse map from integer voxel index to a fixed-shape value.

    ``value_shape`` is ``()`` for scalar fields, ``(3,)`` for vector fields,
    ``(2,)`` for (distance, weight) SDF storage.
    """

    def __init__(self, value_shape=(), dtype=np.float64):
        self.value_shape = tuple(value_shape)
        self.dtype = np.dtype(dtype)
        self._slots: dict[tuple[int, int, int], int] = {}
        self._n = 0
        self._coords = np.zeros((0, 3), dtype=np.int64)
        self._values = np.zeros((0, BLOCK_SIZE, BLOCK_SIZE, BLOCK_SIZE) + self.value_shape, self.dtype)
        self._mask = np.zeros((0, BLOCK_SIZE, BLOCK_SIZE, BLOCK_SIZE), dtype=bool)
        self._lut = None
        self._arrays = None

    # -- construction -----------------------------------------------------
    @classmethod
    def from_arrays(cls, indices, values, value_shape=None, dtype=np.float64) -> SparseField:
        values = np.asarray(values, dtype=dtype)
        if value_shape is None:
            value_shape = values.shape[1:]
        field = cls(value_shape, dtype)
        field.set(indices, values)
        return field

    def empty_like(self, value_shape=None) -> SparseField:
        return SparseField(self.value_shape if value_shape is None else value_shape, self.dtype)

    def copy(self) -> SparseField:
        out = SparseField(self.value_shape, self.dtype)
        out._slots = dict(self._slots)
        out._n = self._n
        out._coords = self._coords[: self._n].copy()
        out._values = self._values[: self._n].copy()
        out._mask = self._mask[: self._n].copy()
        return out

    def _invalidate(self):
        self._arrays = None

    def _grow(self, needed: int):
        cap = len(self._coords)
        if needed <= cap:
            return
        new_cap = max(needed, 2 * cap, 16)
        pad = new_cap - cap
        self._coords = np.concatenate([self._coords, np.zeros((pad, 3), np.int64)])
        self._values = np.concatenate(
            [self._values, np.zeros((pad,) + self._values.shape[1:], self.dtype)]
        )
        self._mask = np.concatenate([self._mask, np.zeros((pad,) + self._mask.shape[1:], bool)])

    def _allocate(self, block_coords: np.ndarray) -> np.ndarray:
        """Return slots for the given block coordinates, allocating missing ones."""
        slots = np.empty(len(block_coords), dtype=np.int64)
        new = []
        for n, b in enumerate(map(tuple, block_coords.tolist())):
            s = self._slots.get(b)
            if s is None:
                s = self._n + len(new)
                self._slots[b] = s
                new.append(b)
            slots[n] = s
        if new:
            self._grow(self._n + len(new))
            self._coords[self._n : self._n + len(new)] = new
            self._n += len(new)
            self._lut = None
        return slots

    # -- lookup -----------------------------------------------------------
    def _block_slots(self, block_coords: np.ndarray) -> np.ndarray:
        """Slot per block coordinate, -1 where unallocated (vectorised)."""
        n = len(block_coords)
        if self._n == 0 or n == 0:
            return np.full(n, -1, dtype=np.int64)
        if self._lut is None:
            lo = self._coords[: self._n].min(axis=0)
            hi = self._coords[: self._n].max(axis=0)
            shape = hi - lo + 1
            if np.prod(shape) <= _MAX_LUT_CELLS:
                lut = np.full(tuple(shape), -1, dtype=np.int64)
                c = self._coords[: self._n] - lo
                lut[c[:, 0], c[:, 1], c[:, 2]] = np.arange(self._n)
                self._lut = (lo, hi, lut)
            else:
                self._lut = (lo, hi, None)
        lo, hi, lut = self._lut
        inside = np.all((block_coords >= lo) & (block_coords <= hi), axis=1)
        out = np.full(n, -1, dtype=np.int64)
        if lut is not None:
            c = block_coords[inside] - lo
            out[inside] = lut[c[:, 0], c[:, 1], c[:, 2]]
        else:
            get = self._slots.get
            out[inside] = [get(b, -1) for b in map(tuple, block_coords[inside].tolist())]
        return out

    def get(self, indices):
        """Vectorised lookup.

        Returns ``(values, found)``; missing entries hold NaN (or zero for
        non-float dtypes).
        """
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        slots = self._block_slots(idx >> _BLOCK_SHIFT)
        loc = idx & (BLOCK_SIZE - 1)
        found = slots >= 0
        s = np.where(found, slots, 0)
        if self._n == 0:
            found[:] = False
            values = np.zeros((len(idx),) + self.value_shape, self.dtype)
        else:
            found &= self._mask[s, loc[:, 0], loc[:, 1], loc[:, 2]]
            values = self._values[s, loc[:, 0], loc[:, 1], loc[:, 2]]
        if self.dtype.kind == "f":
            values[~found] = np.nan
        return values, found

    def contains(self, indices) -> np.ndarray:
        return self.get(indices)[1]

    def __contains__(self, index) -> bool:
        return bool(self.contains(np.asarray(index).reshape(1, 3))[0])

    def __len__(self) -> int:
        return int(self._mask[: self._n].sum())

    @property
    def n_blocks(self) -> int:
        return self._n

    def block_coords(self) -> np.ndarray:
        """Allocated blocks holding at least one voxel, lexicographically sorted."""
        occupied = self._mask[: self._n].any(axis=(1, 2, 3))
        c = self._coords[: self._n][occupied]
        return c[np.lexsort(c.T[::-1])]

    # -- mutation ---------------------------------------------------------
    def set(self, indices, values):
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        if len(idx) == 0:
            return
        vals = np.broadcast_to(np.asarray(values, dtype=self.dtype), (len(idx),) + self.value_shape)
        blocks = idx >> _BLOCK_SHIFT
        ub, inv = np.unique(blocks, axis=0, return_inverse=True)
        slots = self._allocate(ub)[inv.reshape(-1)]
        loc = idx & (BLOCK_SIZE - 1)
        self._values[slots, loc[:, 0], loc[:, 1], loc[:, 2]] = vals
        self._mask[slots, loc[:, 0], loc[:, 1], loc[:, 2]] = True
        self._invalidate()

    def remove(self, indices):
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        slots = self._block_slots(idx >> _BLOCK_SHIFT)
        keep = slots >= 0
        loc = idx[keep] & (BLOCK_SIZE - 1)
        self._mask[slots[keep], loc[:, 0], loc[:, 1], loc[:, 2]] = False
        self._invalidate()

    # -- bulk access ------------------------------------------------------
    def to_arrays(self):
        """All stored ``(indices, values)`` sorted lexicographically by index."""
        if self._arrays is None:
            slot, li, lj, lk = np.nonzero(self._mask[: self._n])
            idx = self._coords[slot] * BLOCK_SIZE + np.stack([li, lj, lk], axis=1)
            vals = self._values[slot, li, lj, lk]
            order = np.lexsort(idx.T[::-1])
            idx = idx[order]
            vals = vals[order]
            idx.setflags(write=False)
            vals.setflags(write=False)
            self._arrays = (idx, vals)
        return self._arrays

    def indices(self) -> np.ndarray:
        return self.to_arrays()[0]

    def values(self) -> np.ndarray:
        return self.to_arrays()[1]

    def bounds(self):
        """Inclusive (min, max) voxel index over stored voxels."""
        idx = self.indices()
        if len(idx) == 0:
            raise ValueError("empty field has no bounds")
        return idx.min(axis=0), idx.max(axis=0)

    def gather(self, lo, shape):
        """Dense copy of the box ``[lo, lo + shape)``.

        Returns ``(values, mask)``; unstored cells are NaN (float dtypes) and
        ``False`` in the mask.
        """
        lo = np.asarray(lo, dtype=np.int64)
        shape = tuple(int(s) for s in shape)
        fill = np.nan if self.dtype.kind == "f" else 0
        values = np.full(shape + self.value_shape, fill, dtype=self.dtype)
        mask = np.zeros(shape, dtype=bool)
        hi = lo + np.array(shape)
        b_lo = lo >> _BLOCK_SHIFT
        b_hi = (hi - 1) >> _BLOCK_SHIFT
        for bi in range(b_lo[0], b_hi[0] + 1):
            for bj in range(b_lo[1], b_hi[1] + 1):
                for bk in range(b_lo[2], b_hi[2] + 1):
                    s = self._slots.get((bi, bj, bk))
                    if s is None:
                        continue
                    origin = np.array([bi, bj, bk]) * BLOCK_SIZE
                    a = np.maximum(origin, lo)
                    b = np.minimum(origin + BLOCK_SIZE, hi)
                    src = tuple(slice(x - o, y - o) for x, y, o in zip(a, b, origin))
                    dst = tuple(slice(x - l, y - l) for x, y, l in zip(a, b, lo))
                    m = self._mask[s][src]
                    mask[dst] = m
                    values[dst] = np.where(
                        m.reshape(m.shape + (1,) * len(self.value_shape)), self._values[s][src], fill
                    )
        return values, mask

    def write_dense(self, lo, values, mask):
        """Store ``values`` wherever ``mask`` is set, for a dense box at ``lo``."""
        lo = np.asarray(lo, dtype=np.int64)
        nz = np.argwhere(mask)
        if len(nz) == 0:
            return
        self.set(nz + lo, values[mask])
