"""Shared domain types: parallel-beam geometry, image grids and sinograms.

Voxels are flattened row-major (``i = iy * nx + ix``) and sinogram rows are
ordered angle-major.  Both the voxel grid and the detector are centered on
the rotation axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Geometry:
    """2D parallel-beam acquisition geometry.

    ``detector_bin_size`` may be a scalar or one value per angle; a per-angle
    spacing lets diagonal views place their rays through voxel centers.
    """

    num_voxels_x: int
    num_voxels_y: int
    angles: Sequence[float]
    detector_bins_per_angle: Sequence[int]
    voxel_size: float = 1.0
    detector_bin_size: float | Sequence[float] = 1.0

    def __post_init__(self):
        if int(self.num_voxels_x) <= 0 or int(self.num_voxels_y) <= 0:
            raise ValueError("voxel counts must be positive")
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        angles = tuple(float(a) for a in np.atleast_1d(np.asarray(self.angles, dtype=float)))
        if not angles:
            raise ValueError("at least one projection angle is required")
        for a in angles:
            if not (0.0 <= a < np.pi):
                raise ValueError(f"angle {a!r} outside [0, pi)")
        bins = tuple(int(n) for n in np.atleast_1d(self.detector_bins_per_angle))
        if len(bins) != len(angles):
            raise ValueError(
                f"detector_bins_per_angle has {len(bins)} entries for {len(angles)} angles"
            )
        if any(n <= 0 for n in bins):
            raise ValueError("detector bin counts must be positive")
        sizes = np.atleast_1d(np.asarray(self.detector_bin_size, dtype=float))
        if sizes.size == 1:
            sizes = np.full(len(angles), sizes[0])
        if sizes.size != len(angles):
            raise ValueError("detector_bin_size must be a scalar or one value per angle")
        if np.any(sizes <= 0):
            raise ValueError("detector_bin_size must be positive")
        object.__setattr__(self, "num_voxels_x", int(self.num_voxels_x))
        object.__setattr__(self, "num_voxels_y", int(self.num_voxels_y))
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "detector_bins_per_angle", bins)
        object.__setattr__(self, "detector_bin_size", tuple(float(s) for s in sizes))

    @classmethod
    def parallel_beam(cls, nx, ny, angles, num_bins, bin_size=1.0, voxel_size=1.0):
        """Build a geometry with ``num_bins`` centered bins per angle, dropping
        the outermost bins whose rays miss the grid."""
        angles = np.atleast_1d(np.asarray(angles, dtype=float))
        sizes = np.broadcast_to(np.asarray(bin_size, dtype=float), angles.shape)
        counts = np.broadcast_to(np.asarray(num_bins, dtype=int), angles.shape)
        kept = []
        for theta, n, s in zip(angles, counts, sizes):
            half = 0.5 * voxel_size * (nx * abs(np.sin(theta)) + ny * abs(np.cos(theta)))
            offsets = (np.arange(n) - (n - 1) / 2.0) * s
            # bins are removed in symmetric pairs so offsets stay centered
            hits = np.abs(offsets) < half - 1e-9 * voxel_size
            while n > 0 and not (hits[0] and hits[-1]):
                hits = hits[1:-1]
                n -= 2
            if n <= 0:
                raise ValueError(f"no detector bin at angle {theta} intersects the grid")
            kept.append(int(n))
        return cls(nx, ny, tuple(angles), tuple(kept), voxel_size, tuple(sizes))

    @property
    def num_voxels(self) -> int:
        return self.num_voxels_x * self.num_voxels_y

    @property
    def num_angles(self) -> int:
        return len(self.angles)

    @property
    def total_rows(self) -> int:
        return sum(self.detector_bins_per_angle)

    @property
    def shape(self) -> tuple[int, int]:
        """Image array shape ``(ny, nx)``."""
        return (self.num_voxels_y, self.num_voxels_x)

    @property
    def row_offsets(self) -> np.ndarray:
        """Start row of each angle in the stacked sinogram (length Omega + 1)."""
        return np.concatenate([[0], np.cumsum(self.detector_bins_per_angle)])

    def row_index(self, j: int, n: int) -> int:
        if not (0 <= j < self.num_angles) or not (0 <= n < self.detector_bins_per_angle[j]):
            raise IndexError(f"projection ({j}, {n}) outside the geometry")
        return int(self.row_offsets[j]) + n

    def detector_offsets(self, j: int) -> np.ndarray:
        n = self.detector_bins_per_angle[j]
        return (np.arange(n) - (n - 1) / 2.0) * self.detector_bin_size[j]

    def voxel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened ``(x, y)`` coordinates of every voxel center."""
        nx, ny, vs = self.num_voxels_x, self.num_voxels_y, self.voxel_size
        xs = (np.arange(nx) - (nx - 1) / 2.0) * vs
        ys = (np.arange(ny) - (ny - 1) / 2.0) * vs
        gx, gy = np.meshgrid(xs, ys)
        return gx.ravel(), gy.ravel()

    def to_dict(self) -> dict:
        return {
            "num_voxels_x": self.num_voxels_x,
            "num_voxels_y": self.num_voxels_y,
            "voxel_size": self.voxel_size,
            "angles": list(self.angles),
            "detector_bins_per_angle": list(self.detector_bins_per_angle),
            "detector_bin_size": list(self.detector_bin_size),
        }


def flatten_index(ix: int, iy: int, geometry: Geometry) -> int:
    if not (0 <= ix < geometry.num_voxels_x and 0 <= iy < geometry.num_voxels_y):
        raise IndexError(f"voxel ({ix}, {iy}) outside a "
                         f"{geometry.num_voxels_x}x{geometry.num_voxels_y} grid")
    return iy * geometry.num_voxels_x + ix


def unflatten_index(i: int, geometry: Geometry) -> tuple[int, int]:
    if not (0 <= i < geometry.num_voxels):
        raise IndexError(f"voxel index {i} outside grid of {geometry.num_voxels}")
    iy, ix = divmod(i, geometry.num_voxels_x)
    return ix, iy


@dataclass(frozen=True)
class ImageGrid:
    geometry: Geometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _readonly(np.ravel(self.values))
        if values.size != self.geometry.num_voxels:
            raise ValueError(f"image has {values.size} values, geometry expects "
                             f"{self.geometry.num_voxels}")
        if not np.all(np.isfinite(values)):
            raise ValueError("image contains non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, geometry: Geometry) -> "ImageGrid":
        return cls(geometry, np.zeros(geometry.num_voxels))

    def as_array(self) -> np.ndarray:
        """Values as a ``(ny, nx)`` array (row ``iy``, column ``ix``)."""
        return self.values.reshape(self.geometry.shape)


@dataclass(frozen=True)
class Sinogram:
    geometry: Geometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _readonly(np.ravel(self.values))
        if values.size != self.geometry.total_rows:
            raise ValueError(f"sinogram has {values.size} values, geometry expects "
                             f"{self.geometry.total_rows}")
        if not np.all(np.isfinite(values)):
            raise ValueError("sinogram contains non-finite values")
        object.__setattr__(self, "values", values)

    def view(self, j: int) -> np.ndarray:
        """Projection values of angle ``j``."""
        offs = self.geometry.row_offsets
        return self.values[offs[j]:offs[j + 1]]

    def __getitem__(self, key: tuple[int, int]) -> float:
        j, n = key
        return float(self.values[self.geometry.row_index(j, n)])


def toy_geometry() -> Geometry:
    """4x4 grid, four views, 22 rays in total.

    Views at 0, 30, 90 and 120 degrees carry 4, 7, 4 and 7 bins; each view's
    bins evenly tile the grid's projected extent.  Two orthogonal pairs off
    the 45-degree lattice diagonals keep the unweighted system full rank.
    """
    angles = (0.0, np.pi / 6, np.pi / 2, 2 * np.pi / 3)
    bins = (4, 7, 4, 7)
    sizes = tuple(4.0 * (abs(np.sin(a)) + abs(np.cos(a))) / n for a, n in zip(angles, bins))
    return Geometry(4, 4, angles, bins, detector_bin_size=sizes)
