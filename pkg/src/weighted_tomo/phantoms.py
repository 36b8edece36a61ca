"""Ground-truth phantoms used by the two experiments."""

from __future__ import annotations

import numpy as np

from .geometry import Geometry, ImageGrid

# (ix, iy) cells of the small right triangle in the 4x4 toy object
TRIANGLE4_VOXELS = ((1, 1), (2, 1), (1, 2))

# margin and gap of the wedge phantom, as fractions of the grid size
WEDGE_MARGIN = 0.125
WEDGE_GAP = 0.1


def grid_geometry(nx: int, ny: int | None = None) -> Geometry:
    """Image-only geometry (one dummy angle) for phantoms built without a scan."""
    return Geometry(nx, nx if ny is None else ny, (0.0,), (1,))


def make_triangle4(geometry: Geometry | None = None) -> ImageGrid:
    geometry = geometry or grid_geometry(4)
    if geometry.shape != (4, 4):
        raise ValueError("the triangle phantom is defined on a 4x4 grid")
    img = np.zeros((4, 4))
    for ix, iy in TRIANGLE4_VOXELS:
        img[iy, ix] = 1.0
    return ImageGrid(geometry, img)


def make_two_wedge(nx: int, ny: int | None = None, geometry: Geometry | None = None) -> ImageGrid:
    """Two right-triangle wedges of value 1 separated by a gap along the anti-diagonal.

    Inside a square inset by ``WEDGE_MARGIN`` on each side, with normalized
    coordinates ``u, v`` in ``[0, 1]``, the lower wedge is ``u + v < 1 - gap/2``
    and the upper wedge ``u + v > 1 + gap/2``.  Classification uses voxel
    centers, so the image is binary.
    """
    ny = nx if ny is None else ny
    if nx < 16 or ny < 16:
        raise ValueError("wedge phantom needs at least a 16x16 grid")
    geometry = geometry or grid_geometry(nx, ny)
    if geometry.shape != (ny, nx):
        raise ValueError("geometry does not match the requested phantom size")
    u = ((np.arange(nx) + 0.5) / nx - WEDGE_MARGIN) / (1 - 2 * WEDGE_MARGIN)
    v = ((np.arange(ny) + 0.5) / ny - WEDGE_MARGIN) / (1 - 2 * WEDGE_MARGIN)
    uu, vv = np.meshgrid(u, v)
    inside = (uu > 0) & (uu < 1) & (vv > 0) & (vv < 1)
    total = uu + vv
    wedge = inside & ((total < 1 - WEDGE_GAP / 2) | (total > 1 + WEDGE_GAP / 2))
    return ImageGrid(geometry, wedge.astype(float))


def make_uniform(geometry: Geometry, value: float = 1.0) -> ImageGrid:
    if not 0.0 <= value <= 1.0:
        raise ValueError("phantom values must lie in [0, 1]")
    return ImageGrid(geometry, np.full(geometry.num_voxels, float(value)))
