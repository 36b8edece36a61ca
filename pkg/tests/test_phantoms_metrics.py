import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weighted_tomo import metrics, phantoms
from weighted_tomo.geometry import Geometry, ImageGrid


def loop_ssim(a, b, window=8, L=1.0):
    """SSIM by explicit loops over every window position."""
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    vals = []
    for i in range(a.shape[0] - window + 1):
        for j in range(a.shape[1] - window + 1):
            x = a[i:i + window, j:j + window].ravel()
            y = b[i:i + window, j:j + window].ravel()
            mx, my = sum(x) / x.size, sum(y) / y.size
            vx = sum((x - mx) ** 2) / x.size
            vy = sum((y - my) ** 2) / y.size
            cxy = sum((x - mx) * (y - my)) / x.size
            vals.append((2 * mx * my + c1) * (2 * cxy + c2)
                        / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return sum(vals) / len(vals)


def test_triangle_phantom():
    img = phantoms.make_triangle4().as_array()
    assert img.sum() == 3
    assert img[1, 1] == img[1, 2] == img[2, 1] == 1.0
    with pytest.raises(ValueError):
        phantoms.make_triangle4(phantoms.grid_geometry(5))


@pytest.mark.parametrize("n", [16, 64, 100])
def test_two_wedge_phantom(n):
    img = phantoms.make_two_wedge(n).as_array()
    assert set(np.unique(img)) <= {0.0, 1.0}
    assert 0.2 <= img.mean() <= 0.8
    # background border and empty gap along the anti-diagonal
    assert img[0].sum() == img[:, 0].sum() == 0
    c = n // 2
    assert img[c - 1, n - c] == 0 and img[c, n - c - 1] == 0
    # symmetric under reflection through the anti-diagonal
    assert np.array_equal(img, img[::-1, ::-1].T)
    assert np.array_equal(img, phantoms.make_two_wedge(n).as_array())


def test_two_wedge_has_two_components():
    from scipy import ndimage
    _, count = ndimage.label(phantoms.make_two_wedge(64).as_array())
    assert count == 2


def test_two_wedge_rejects_small_or_mismatched():
    with pytest.raises(ValueError):
        phantoms.make_two_wedge(8)
    with pytest.raises(ValueError):
        phantoms.make_two_wedge(32, geometry=phantoms.grid_geometry(16))


def test_uniform_phantom():
    g = phantoms.grid_geometry(3)
    assert np.all(phantoms.make_uniform(g, 0.4).values == 0.4)
    with pytest.raises(ValueError):
        phantoms.make_uniform(g, 1.5)


def test_rmse_and_l2_examples():
    a, b = np.zeros(4), np.array([1.0, -1.0, 1.0, -1.0])
    assert metrics.rmse(a, b) == 1.0
    assert metrics.l2_distance(a, b) == 2.0
    with pytest.raises(ValueError):
        metrics.rmse(np.zeros(3), np.zeros(4))


def test_metrics_accept_image_grids():
    g = Geometry(2, 2, (0.0,), (1,))
    a = ImageGrid(g, np.array([0.0, 1.0, 2.0, 3.0]))
    assert metrics.l2_distance(a, ImageGrid.zeros(g)) == pytest.approx(np.sqrt(14))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rmse_properties(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random(20), rng.random(20)
    assert metrics.rmse(a, b) == pytest.approx(metrics.rmse(b, a))
    assert metrics.rmse(a, a) == 0
    assert metrics.rmse(a, b) == pytest.approx(metrics.l2_distance(a, b) / np.sqrt(20))


def test_ssim_matches_loop_oracle(rng):
    a = rng.random((12, 10))
    b = np.clip(a + 0.2 * rng.standard_normal(a.shape), 0, 1)
    assert metrics.ssim(a, b) == pytest.approx(loop_ssim(a, b), rel=1e-12)
    assert metrics.ssim(a, b, dynamic_range=2.0) == pytest.approx(loop_ssim(a, b, L=2.0),
                                                                  rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ssim_properties(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((9, 11)), rng.random((9, 11))
    assert metrics.ssim(a, a) == pytest.approx(1.0)
    s = metrics.ssim(a, b)
    assert s == pytest.approx(metrics.ssim(b, a))
    assert -1.0 <= s <= 1.0


def test_ssim_constant_images():
    a = np.full((8, 8), 0.5)
    assert metrics.ssim(a, a) == pytest.approx(1.0)
    # only the luminance term differs
    mu = (2 * 0.5 * 0.25 + 1e-4) / (0.25 + 0.0625 + 1e-4)
    assert metrics.ssim(a, np.full((8, 8), 0.25)) == pytest.approx(mu)


def test_ssim_rejects_bad_input():
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((7, 7)), np.zeros((7, 7)))
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((8, 8)), np.zeros((8, 9)))
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((8, 8)), np.zeros((8, 8)), dynamic_range=0)
