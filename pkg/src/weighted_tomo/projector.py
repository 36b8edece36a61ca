"""Ray-driven parallel-beam system matrices and weighted projection.

Each detector bin contributes one ray through its center.  Matrix entries
are exact ray/voxel intersection lengths, computed with a Siddon-style
traversal of the grid planes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .geometry import Geometry, ImageGrid, Sinogram

# segments shorter than this fraction of a voxel are rounding debris from
# rays passing (numerically) through voxel corners
_SEGMENT_TOL = 1e-9


def trace_ray(origin, direction, geometry: Geometry):
    """Voxel indices and intersection lengths of an infinite line with the grid.

    ``origin`` is any point on the line and ``direction`` a unit vector.
    Returns two arrays ``(indices, lengths)`` ordered along the ray; both are
    empty when the line misses the grid.
    """
    nx, ny, vs = geometry.num_voxels_x, geometry.num_voxels_y, geometry.voxel_size
    bounds = ((-0.5 * nx * vs, 0.5 * nx * vs), (-0.5 * ny * vs, 0.5 * ny * vs))
    s_lo, s_hi = -np.inf, np.inf
    planes = []
    for c, r, (lo, hi), n in zip(origin, direction, bounds, (nx, ny)):
        if abs(r) < 1e-12:
            if not (lo < c < hi):
                return np.empty(0, dtype=np.int64), np.empty(0)
            planes.append(np.empty(0))
            continue
        a, b = (lo - c) / r, (hi - c) / r
        s_lo, s_hi = max(s_lo, min(a, b)), min(s_hi, max(a, b))
        planes.append((lo + vs * np.arange(n + 1) - c) / r)
    if s_hi - s_lo <= _SEGMENT_TOL * vs:
        return np.empty(0, dtype=np.int64), np.empty(0)

    s = np.concatenate([[s_lo, s_hi], *planes])
    s = np.unique(s[(s >= s_lo) & (s <= s_hi)])
    lengths = np.diff(s)
    keep = lengths > _SEGMENT_TOL * vs
    mid = 0.5 * (s[:-1] + s[1:])[keep]
    lengths = lengths[keep]
    ix = np.floor((origin[0] + mid * direction[0] - bounds[0][0]) / vs).astype(np.int64)
    iy = np.floor((origin[1] + mid * direction[1] - bounds[1][0]) / vs).astype(np.int64)
    np.clip(ix, 0, nx - 1, out=ix)
    np.clip(iy, 0, ny - 1, out=iy)
    return iy * nx + ix, lengths


def ray_frame(theta: float):
    """Unit ray direction and detector axis for rotation angle ``theta``.

    At ``theta = 0`` rays travel along +x and the detector runs along +y.
    """
    c, s = np.cos(theta), np.sin(theta)
    return np.array([c, s]), np.array([-s, c])


@dataclass(frozen=True)
class SystemBlock:
    """Per-angle system matrix ``A_theta`` of shape ``(N_j, V)``."""

    angle_index: int
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape


def build_system_block(geometry: Geometry, j: int) -> SystemBlock:
    if not 0 <= j < geometry.num_angles:
        raise IndexError(f"angle index {j} out of range")
    direction, axis = ray_frame(geometry.angles[j])
    rows, cols, vals = [], [], []
    for n, t in enumerate(geometry.detector_offsets(j)):
        idx, lengths = trace_ray(t * axis, direction, geometry)
        if idx.size == 0:
            raise ValueError(
                f"ray {n} of angle {j} misses the grid; build the geometry with "
                "Geometry.parallel_beam to drop such bins"
            )
        rows.append(np.full(idx.size, n))
        cols.append(idx)
        vals.append(lengths)
    shape = (geometry.detector_bins_per_angle[j], geometry.num_voxels)
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    )
    mat.sort_indices()
    return SystemBlock(j, mat)


@dataclass(frozen=True)
class BlockSystem:
    """The block-diagonal matrix ``B``, stored as its Omega diagonal blocks."""

    geometry: Geometry
    blocks: tuple

    @classmethod
    def build(cls, geometry: Geometry) -> "BlockSystem":
        return cls(geometry, tuple(build_system_block(geometry, j)
                                   for j in range(geometry.num_angles)))

    @cached_property
    def stacked(self) -> sp.csr_matrix:
        """Unweighted ``A`` (the per-angle blocks stacked vertically)."""
        return sp.vstack([b.matrix for b in self.blocks], format="csr")

    @cached_property
    def row_angle(self) -> np.ndarray:
        """Angle index of every sinogram row."""
        return np.repeat(np.arange(self.geometry.num_angles),
                         self.geometry.detector_bins_per_angle)


def _check(system: BlockSystem, weights, n_values: int, expected: int, what: str):
    if weights.values.shape != (system.geometry.num_angles, system.geometry.num_voxels):
        raise ValueError(f"weight field shape {weights.values.shape} does not match "
                         "the system geometry")
    if n_values != expected:
        raise ValueError(f"{what} has {n_values} values, expected {expected}")


def forward_project_array(system: BlockSystem, weights, x: np.ndarray) -> np.ndarray:
    """``B W x`` on plain arrays."""
    x = np.asarray(x, dtype=float)
    _check(system, weights, x.size, system.geometry.num_voxels, "image")
    w = weights.values
    return np.concatenate([b.matrix @ (w[b.angle_index] * x) for b in system.blocks])


def back_project_array(system: BlockSystem, weights, p: np.ndarray) -> np.ndarray:
    """``W^T B^T p`` on plain arrays."""
    p = np.asarray(p, dtype=float)
    _check(system, weights, p.size, system.geometry.total_rows, "sinogram")
    w = weights.values
    offs = system.geometry.row_offsets
    out = np.zeros(system.geometry.num_voxels)
    for b in system.blocks:
        j = b.angle_index
        out += w[j] * (b.matrix.T @ p[offs[j]:offs[j + 1]])
    return out


def forward_project(system: BlockSystem, weights, image: ImageGrid) -> Sinogram:
    return Sinogram(system.geometry, forward_project_array(system, weights, image.values))


def back_project(system: BlockSystem, weights, sinogram: Sinogram) -> ImageGrid:
    return ImageGrid(system.geometry, back_project_array(system, weights, sinogram.values))
