"""Image-quality metrics: RMSE, L2 distance and windowed SSIM."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    ga, gb = getattr(a, "geometry", None), getattr(b, "geometry", None)
    a = np.asarray(getattr(a, "values", a), dtype=float)
    b = np.asarray(getattr(b, "values", b), dtype=float)
    if a.size != b.size or (ga is not None and gb is not None and ga.shape != gb.shape):
        raise ValueError(f"size mismatch: {a.size} vs {b.size}")
    return a, b, ga or gb


def rmse(a, b) -> float:
    a, b, _ = _pair(a, b)
    return float(np.sqrt(np.mean((a.ravel() - b.ravel()) ** 2)))


def l2_distance(a, b) -> float:
    a, b, _ = _pair(a, b)
    return float(np.linalg.norm(a.ravel() - b.ravel()))


def ssim(a, b, dynamic_range: float = 1.0, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over all ``window x window`` patches (stride 1, uniform weights).

    Accepts :class:`ImageGrid` values or 2D arrays.  Patch statistics are
    population means, variances and covariance.
    """
    if dynamic_range <= 0:
        raise ValueError("dynamic_range must be positive")
    a, b, geometry = _pair(a, b)
    if geometry is not None:
        a, b = a.reshape(geometry.shape), b.reshape(geometry.shape)
    if a.ndim != 2 or a.shape != b.shape:
        raise ValueError(f"ssim needs two 2D images of equal shape, got {a.shape}, {b.shape}")
    if min(a.shape) < window:
        raise ValueError(f"image {a.shape} smaller than the {window}x{window} window")
    c1 = (SSIM_K1 * dynamic_range) ** 2
    c2 = (SSIM_K2 * dynamic_range) ** 2
    pa = sliding_window_view(a, (window, window))
    pb = sliding_window_view(b, (window, window))
    mu_a = pa.mean(axis=(-2, -1))
    mu_b = pb.mean(axis=(-2, -1))
    var_a = pa.var(axis=(-2, -1))
    var_b = pb.var(axis=(-2, -1))
    cov = (pa * pb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
