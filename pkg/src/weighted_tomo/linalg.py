"""Dense pseudoinverse analysis of the decomposed weighted system.

Dense matrices are plain 2D ``numpy`` arrays.  Everything here is meant for
desk-scale problems; see ``DEFAULT_DENSIFY_CAP``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ImageGrid, Sinogram
from .metrics import l2_distance
from .projector import BlockSystem
from .weights import (DEFAULT_DENSIFY_CAP, DensifyError, WeightField,
                      default_rank_tolerance, densify_W, wtw_inverse_diagonal,
                      wwt_rank)

METHODS = ("direct-weighted", "split-wrong", "product-formula")


def _finite(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a 2D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or infinite entries")
    return m


def pinv(m, tolerance: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse by SVD with thresholded singular values.

    Singular values at or below ``tolerance`` (default
    ``sigma_max * max(m.shape) * eps``) are treated as zero.
    """
    m = _finite(m)
    if m.size == 0:
        return np.zeros(m.shape[::-1])
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    tol = default_rank_tolerance(s, m.shape) if tolerance is None else tolerance
    keep = s > tol
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def numerical_rank(m, tolerance: float | None = None) -> int:
    m = _finite(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    tol = default_rank_tolerance(s, m.shape) if tolerance is None else tolerance
    return int(np.count_nonzero(s > tol))


def condition_number(m) -> float:
    """Ratio of largest to smallest of the ``min(m.shape)`` singular values."""
    s = np.linalg.svd(_finite(m), compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def left_pinv(m) -> np.ndarray:
    """``(M^T M)^{-1} M^T``, the pseudoinverse of a full-column-rank tall matrix."""
    m = _finite(m)
    return np.linalg.solve(m.T @ m, m.T)


def right_pinv(m) -> np.ndarray:
    """``M^T (M M^T)^{-1}``, the pseudoinverse of a full-row-rank broad matrix."""
    m = _finite(m)
    return np.linalg.solve(m @ m.T, m).T


def closed_form_pinv(m) -> np.ndarray:
    """Pick the full-rank closed form by shape: inverse, right-sided or left-sided.

    No rank check is made; applied to a rank-deficient matrix the inverted
    Gram matrix is singular and the result is meaningless.
    """
    m = _finite(m)
    rows, cols = m.shape
    if rows == cols:
        return np.linalg.inv(m)
    return right_pinv(m) if rows < cols else left_pinv(m)


def _check_cap(rows: int, cols: int, cap: int, what: str):
    if rows > cap or cols > cap:
        raise DensifyError(f"{what} would be {rows}x{cols}, above the cap of {cap}")


def densify_B(system: BlockSystem, cap: int = DEFAULT_DENSIFY_CAP) -> np.ndarray:
    g = system.geometry
    v = g.num_voxels
    _check_cap(g.total_rows, v * g.num_angles, cap, "B")
    out = np.zeros((g.total_rows, v * g.num_angles))
    offs = g.row_offsets
    for b in system.blocks:
        j = b.angle_index
        out[offs[j]:offs[j + 1], j * v:(j + 1) * v] = b.matrix.toarray()
    return out


def densify_weighted(system: BlockSystem, weights: WeightField,
                     cap: int = DEFAULT_DENSIFY_CAP) -> np.ndarray:
    """``B W`` as an explicit dense product."""
    return densify_B(system, cap) @ densify_W(weights, cap)


@dataclass
class PinvReport:
    method: str
    image: ImageGrid
    l2_distance_to_ground_truth: float | None
    ranks: dict = field(default_factory=dict)
    condition_number: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "l2_distance_to_ground_truth": self.l2_distance_to_ground_truth,
            "ranks": dict(self.ranks),
            "condition_number": self.condition_number,
            "value_range": [float(self.image.values.min()), float(self.image.values.max())],
        }


def _report(method, system, x, ground_truth, ranks, cond) -> PinvReport:
    image = ImageGrid(system.geometry, x)
    dist = None if ground_truth is None else l2_distance(image, ground_truth)
    return PinvReport(method, image, dist, ranks, cond)


def reconstruct_direct_pinv(system: BlockSystem, weights: WeightField, sinogram: Sinogram,
                            ground_truth: ImageGrid | None = None,
                            cap: int = DEFAULT_DENSIFY_CAP) -> PinvReport:
    """``x = (BW)^+ p`` with the pseudoinverse of the assembled weighted matrix."""
    a = densify_weighted(system, weights, cap)
    x = pinv(a) @ sinogram.values
    ranks = {"weighted": numerical_rank(a), "num_voxels": system.geometry.num_voxels}
    return _report("direct-weighted", system, x, ground_truth, ranks, condition_number(a))


def reconstruct_split_pinv(system: BlockSystem, weights: WeightField, sinogram: Sinogram,
                           ground_truth: ImageGrid | None = None,
                           cap: int = DEFAULT_DENSIFY_CAP) -> PinvReport:
    """``x = W^+ B^+ p`` with the left-sided form for W and right-sided for B."""
    b = densify_B(system, cap)
    w = densify_W(weights, cap)
    rank_b, rank_w = numerical_rank(b), numerical_rank(w)
    if rank_b < b.shape[0]:
        raise np.linalg.LinAlgError(f"B B^T is singular: rank(B) = {rank_b} < {b.shape[0]}")
    if rank_w < w.shape[1]:
        raise np.linalg.LinAlgError(f"W^T W is singular: rank(W) = {rank_w} < {w.shape[1]}")
    b_pinv = right_pinv(b)
    w_pinv = left_pinv(w)
    x = w_pinv @ (b_pinv @ sinogram.values)
    ranks = {"W+": numerical_rank(w_pinv), "B+": numerical_rank(b_pinv),
             "num_voxels": system.geometry.num_voxels, "num_rows": system.geometry.total_rows}
    cond = max(condition_number(b @ b.T), condition_number(w.T @ w))
    return _report("split-wrong", system, x, ground_truth, ranks, cond)


def product_formula_pinv(system: BlockSystem, weights: WeightField, outer: str = "closed-form",
                         cap: int = DEFAULT_DENSIFY_CAP):
    """``(B^+ B W)^+ (B W W^+)^+`` with ``B^+ = B^T (B B^T)^{-1}`` and
    ``W^+ = (W^T W)^{-1} W^T``.

    ``outer="closed-form"`` takes the two outer pseudoinverses with the
    full-rank closed forms matching their shapes; ``outer="svd"`` uses the
    thresholded SVD instead, for which the identity is exact.

    Returns ``(matrix, diagnostics)``.
    """
    if outer not in ("closed-form", "svd"):
        raise ValueError(f"unknown outer pseudoinverse {outer!r}")
    b = densify_B(system, cap)
    w = densify_W(weights, cap)
    bw = b @ w
    left = b.T @ np.linalg.solve(b @ b.T, bw)
    right = (bw * wtw_inverse_diagonal(weights)) @ w.T
    outer_pinv = closed_form_pinv if outer == "closed-form" else pinv
    m = outer_pinv(left) @ outer_pinv(right)
    core = right @ right.T
    diagnostics = {
        "ranks": {
            "BWW+": numerical_rank(right),
            "B+BW": numerical_rank(left),
            "num_rows": right.shape[0],
            "num_voxels": system.geometry.num_voxels,
        },
        "condition_number": condition_number(core),
    }
    return m, diagnostics


def reconstruct_product_formula_pinv(system: BlockSystem, weights: WeightField,
                                     sinogram: Sinogram, ground_truth: ImageGrid | None = None,
                                     outer: str = "closed-form",
                                     cap: int = DEFAULT_DENSIFY_CAP) -> PinvReport:
    m, diag = product_formula_pinv(system, weights, outer, cap)
    ranks = dict(diag["ranks"], WWt=wwt_rank(weights, cap=cap))
    x = m @ sinogram.values
    return _report("product-formula", system, x, ground_truth, ranks, diag["condition_number"])
