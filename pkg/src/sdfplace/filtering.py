"""Separable convolution over sparse voxel grids.

All filters use valid-support semantics: an output voxel exists only where
every input voxel under the kernel's (box) support is stored. Work is split
into cubic chunks that are gathered with a halo, filtered densely with
``scipy.ndimage`` and cropped; chunks may be processed on a thread pool and
are merged in a fixed order, so results do not depend on scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NonPositiveSigma
from .grid import BLOCK_SIZE, SparseField
from .sdf import SdfSubmap

CHUNK_SIZE = 32  # voxels per chunk side, multiple of BLOCK_SIZE

# First-derivative taps (unit response to a unit ramp) and triangle smoothing.
SOBEL_DERIVATIVE = np.array([1.0, 0.0, -1.0]) / 2.0
SOBEL_SMOOTH = np.array([1.0, 2.0, 1.0]) / 4.0

HESSIAN_COMPONENTS = ("xx", "xy", "xz", "yy", "yz", "zz")


@dataclass(frozen=True)
class Kernel:
    """Separable kernel: one odd-length tap array per axis (convolution order)."""

    taps: tuple

    def __post_init__(self):
        taps = tuple(np.asarray(t, dtype=np.float64) for t in self.taps)
        if len(taps) != 3 or any(t.ndim != 1 or len(t) % 2 == 0 for t in taps):
            raise ValueError("kernel needs three odd-length 1-D tap arrays")
        object.__setattr__(self, "taps", taps)

    @property
    def radii(self) -> tuple:
        return tuple(len(t) // 2 for t in self.taps)

    @property
    def radius(self) -> int:
        return max(self.radii)

    def __matmul__(self, other: Kernel) -> Kernel:
        """Composition (convolution) of two separable kernels."""
        return Kernel(tuple(np.convolve(a, b) for a, b in zip(self.taps, other.taps)))

    def dense(self) -> np.ndarray:
        tx, ty, tz = self.taps
        return tx[:, None, None] * ty[None, :, None] * tz[None, None, :]


def gaussian_taps(sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    r = math.ceil(3 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (x / sigma) ** 2)
    return taps / taps.sum()


def gaussian_kernel(sigma: float) -> Kernel:
    """Isotropic Gaussian with taps on ``[-ceil(3 sigma), ceil(3 sigma)]``, unit sum."""
    g = gaussian_taps(sigma)
    return Kernel((g, g, g))


def sobel_kernel(axis: int) -> Kernel:
    """3x3x3 Sobel derivative along ``axis`` (voxel units)."""
    return Kernel(tuple(SOBEL_DERIVATIVE if a == axis else SOBEL_SMOOTH for a in range(3)))


def hessian_kernel(a: int, b: int) -> Kernel:
    """Second-derivative kernel D_a * D_b (no blur)."""
    return sobel_kernel(a) @ sobel_kernel(b)


def _erode(mask: np.ndarray, radii) -> np.ndarray:
    out = mask.astype(np.uint8)
    for axis, r in enumerate(radii):
        if r > 0:
            out = ndimage.minimum_filter1d(out, 2 * r + 1, axis=axis, mode="constant", cval=0)
    return out.astype(bool)


def _apply(values: np.ndarray, kernel: Kernel) -> np.ndarray:
    out = values
    for axis, taps in enumerate(kernel.taps):
        if len(taps) > 1:
            out = ndimage.convolve1d(out, taps, axis=axis, mode="constant", cval=0.0)
        elif taps[0] != 1.0:
            out = out * taps[0]
    return out


def _chunk_origins(field: SparseField) -> np.ndarray:
    blocks = field.block_coords()
    if len(blocks) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    per = CHUNK_SIZE // BLOCK_SIZE
    chunks = np.unique(np.floor_divide(blocks, per), axis=0)
    return chunks * CHUNK_SIZE


def _run_chunks(source: SparseField, halo: int, compute, outputs: dict, workers: int = 1, channel=None):
    """Gather every chunk of ``source`` with ``halo``, run ``compute`` and merge.

    ``compute(values, mask)`` returns ``{name: (array, valid_mask)}`` over the
    padded region; results are cropped to the chunk and written into
    ``outputs[name]`` in chunk order.
    """
    origins = _chunk_origins(source)
    shape = (CHUNK_SIZE + 2 * halo,) * 3
    crop = (slice(halo, halo + CHUNK_SIZE),) * 3

    def job(origin):
        values, mask = source.gather(origin - halo, shape)
        if channel is not None:
            values = values[..., channel]
        values = np.where(mask, values, 0.0)
        result = compute(values, mask)
        return {name: (arr[crop], valid[crop]) for name, (arr, valid) in result.items()}

    if workers > 1 and len(origins) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(job, origins))
    else:
        results = [job(o) for o in origins]
    for origin, result in zip(origins, results):
        for name, (arr, valid) in result.items():
            outputs[name].write_dense(origin, arr, valid)


def convolve_valid(field: SparseField, kernel: Kernel, workers: int = 1) -> SparseField:
    """Discrete convolution of a scalar sparse field with valid-support semantics."""
    out = {"out": SparseField()}
    radii = kernel.radii

    def compute(values, mask):
        return {"out": (_apply(values, kernel), _erode(mask, radii))}

    _run_chunks(field, max(radii), compute, out, workers)
    return out["out"]


@dataclass
class FilterBank:
    """Blurred SDF plus the gradient and Hessian derived from it (metric units)."""

    blurred: SparseField
    gradient: SparseField
    hessian: dict

    def hessian_arrays(self):
        """Common sorted indices and an ``(N, 3, 3)`` stack of Hessians."""
        idx, hxx = self.hessian["xx"].to_arrays()
        H = np.empty((len(idx), 3, 3))
        for name in HESSIAN_COMPONENTS:
            vals = self.hessian[name].values()
            a, b = "xyz".index(name[0]), "xyz".index(name[1])
            H[:, a, b] = vals
            H[:, b, a] = vals
        return idx, H


def compute_filters(sdf: SdfSubmap, sigma_grad: float = 2.0, workers: int = 1) -> FilterBank:
    """Blur once with a Gaussian, then take Sobel gradient and Hessian of the blur.

    Gradient is divided by ``voxel_size`` and the Hessian by ``voxel_size**2``.
    """
    g = gaussian_kernel(sigma_grad)
    rg = g.radius
    vs = sdf.voxel_size
    derivs = [sobel_kernel(a) for a in range(3)]
    second = {name: hessian_kernel("xyz".index(name[0]), "xyz".index(name[1])) for name in HESSIAN_COMPONENTS}
    outputs = {"blurred": SparseField(), "gradient": SparseField((3,))}
    outputs.update({name: SparseField() for name in HESSIAN_COMPONENTS})

    def compute(values, mask):
        blurred = _apply(values, g)
        valid_b = _erode(mask, (rg,) * 3)
        grad = np.stack([_apply(blurred, d) for d in derivs], axis=-1) / vs
        res = {
            "blurred": (blurred, valid_b),
            "gradient": (grad, _erode(valid_b, (1, 1, 1))),
        }
        valid_h = _erode(valid_b, (2, 2, 2))
        for name, k in second.items():
            res[name] = (_apply(blurred, k) / vs**2, valid_h)
        return res

    _run_chunks(sdf.voxels, rg + 2, compute, outputs, workers, channel=0)
    return FilterBank(
        outputs["blurred"], outputs["gradient"], {name: outputs[name] for name in HESSIAN_COMPONENTS}
    )


def compute_gradient(sdf: SdfSubmap, sigma_grad: float = 2.0, workers: int = 1) -> SparseField:
    """Metric gradient ``D_axis * G * Phi / voxel_size`` as a vector field."""
    g = gaussian_kernel(sigma_grad)
    kernels = [sobel_kernel(a) @ g for a in range(3)]
    r = kernels[0].radius
    out = {"gradient": SparseField((3,))}
    vs = sdf.voxel_size

    def compute(values, mask):
        grad = np.stack([_apply(values, k) for k in kernels], axis=-1) / vs
        return {"gradient": (grad, _erode(mask, (r,) * 3))}

    _run_chunks(sdf.voxels, r, compute, out, workers, channel=0)
    return out["gradient"]


def compute_hessian(sdf: SdfSubmap, sigma_grad: float = 2.0, workers: int = 1) -> dict:
    """Six metric Hessian component fields ``D_a * D_b * G * Phi / voxel_size**2``."""
    return compute_filters(sdf, sigma_grad, workers).hessian
