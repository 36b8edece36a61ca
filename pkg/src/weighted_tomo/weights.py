"""Position- and angle-dependent voxel weights.

A :class:`WeightField` holds ``w[j, i]``, the weight of voxel ``i`` under
angle ``j``.  As a matrix it is the vertical stack of the diagonal blocks
``diag(w[j])``, shape ``(V * Omega, V)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Geometry
from .projector import ray_frame

DEFAULT_DENSIFY_CAP = 4096


class DensifyError(ValueError):
    """Raised when a dense realization would exceed the configured size cap."""


@dataclass(frozen=True)
class WeightField:
    geometry: Geometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = self.geometry
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape != (g.num_angles, g.num_voxels):
            raise ValueError(f"weights must have shape {(g.num_angles, g.num_voxels)}, "
                             f"got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("weights contain non-finite values")
        zero = np.flatnonzero(np.sum(values**2, axis=0) == 0)
        if zero.size:
            raise ValueError(f"voxel {int(zero[0])} has zero weight under every angle")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def angle_image(self, j: int) -> np.ndarray:
        return self.values[j].reshape(self.geometry.shape)


def ramp_weights(geometry: Geometry, s_min: float = 0.25, s_max: float = 1.0) -> WeightField:
    """Linear sensitivity ramp that rotates with source and detector.

    The weight runs from ``s_max`` on the source side of the grid to ``s_min``
    on the detector side, normalized over the grid's extent along the ray.
    """
    if s_min < 0:
        raise ValueError("s_min must be nonnegative")
    if not s_max > s_min:
        raise ValueError("s_max must exceed s_min")
    xs, ys = geometry.voxel_centers()
    hx = 0.5 * geometry.num_voxels_x * geometry.voxel_size
    hy = 0.5 * geometry.num_voxels_y * geometry.voxel_size
    w = np.empty((geometry.num_angles, geometry.num_voxels))
    for j, theta in enumerate(geometry.angles):
        direction, _ = ray_frame(theta)
        # distance toward the source, i.e. against the ray direction
        d = -(xs * direction[0] + ys * direction[1])
        half = hx * abs(direction[0]) + hy * abs(direction[1])
        w[j] = s_min + (s_max - s_min) * (d + half) / (2 * half)
    return WeightField(geometry, w)


def constant_weights(geometry: Geometry, c: float = 1.0) -> WeightField:
    if c == 0:
        raise ValueError("constant weight must be nonzero")
    return WeightField(geometry, np.full((geometry.num_angles, geometry.num_voxels), float(c)))


def wtw_inverse_diagonal(weights: WeightField) -> np.ndarray:
    """Diagonal of ``(W^T W)^{-1}``, i.e. ``1 / sum_j w[j, i]**2``."""
    col = np.sum(weights.values**2, axis=0)
    zero = np.flatnonzero(col == 0)
    if zero.size:
        raise ValueError(f"voxel {int(zero[0])} has zero weight under every angle")
    return 1.0 / col


def densify_W(weights: WeightField, cap: int = DEFAULT_DENSIFY_CAP) -> np.ndarray:
    n_ang, v = weights.values.shape
    if v * n_ang > cap:
        raise DensifyError(f"W would have {v * n_ang} rows, above the cap of {cap}")
    out = np.zeros((n_ang * v, v))
    eye = np.arange(v)
    for j in range(n_ang):
        out[j * v + eye, eye] = weights.values[j]
    return out


def wwt_dense(weights: WeightField, cap: int = DEFAULT_DENSIFY_CAP) -> np.ndarray:
    """``W W^T`` assembled from its diagonal blocks ``W_a W_b``."""
    n_ang, v = weights.values.shape
    if v * n_ang > cap:
        raise DensifyError(f"W W^T would be {v * n_ang} square, above the cap of {cap}")
    w = weights.values
    out = np.zeros((n_ang * v, n_ang * v))
    eye = np.arange(v)
    for a in range(n_ang):
        for b in range(n_ang):
            out[a * v + eye, b * v + eye] = w[a] * w[b]
    return out


def default_rank_tolerance(s: np.ndarray, shape) -> float:
    return float(s.max(initial=0.0)) * max(shape) * np.finfo(float).eps


def wwt_rank(weights: WeightField, tolerance: float | None = None,
             cap: int = DEFAULT_DENSIFY_CAP) -> int:
    m = wwt_dense(weights, cap)
    s = np.linalg.svd(m, compute_uv=False)
    tol = default_rank_tolerance(s, m.shape) if tolerance is None else tolerance
    return int(np.count_nonzero(s > tol))
