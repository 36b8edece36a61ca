import numpy as np
import pytest
from hypothesis import given, strategies as st

from weighted_tomo.geometry import (Geometry, ImageGrid, Sinogram, flatten_index, toy_geometry,
                                    unflatten_index)

G44 = Geometry(4, 4, (0.0,), (4,))


@pytest.mark.parametrize("ix, iy, expected", [(0, 0, 0), (3, 3, 15), (1, 2, 9)])
def test_flatten_index(ix, iy, expected):
    assert flatten_index(ix, iy, G44) == expected


@pytest.mark.parametrize("ix, iy", [(-1, 0), (4, 0), (0, 4), (0, -1)])
def test_flatten_index_out_of_range(ix, iy):
    with pytest.raises(IndexError):
        flatten_index(ix, iy, G44)


@given(st.integers(1, 12), st.integers(1, 12), st.data())
def test_flatten_round_trip(nx, ny, data):
    g = Geometry(nx, ny, (0.0,), (1,))
    ix = data.draw(st.integers(0, nx - 1))
    iy = data.draw(st.integers(0, ny - 1))
    i = flatten_index(ix, iy, g)
    assert 0 <= i < g.num_voxels
    assert unflatten_index(i, g) == (ix, iy)


def test_flatten_is_bijective():
    g = Geometry(5, 3, (0.0,), (1,))
    seen = {flatten_index(ix, iy, g) for ix in range(5) for iy in range(3)}
    assert seen == set(range(15))


def test_sinogram_ordering_round_trip():
    g = Geometry(4, 4, (0.0, 0.5, 1.0), (3, 5, 4))
    values = np.zeros(g.total_rows)
    for j in range(3):
        for n in range(g.detector_bins_per_angle[j]):
            values[sum(g.detector_bins_per_angle[:j]) + n] = 100 * j + n
    sino = Sinogram(g, values)
    for j in range(3):
        for n in range(g.detector_bins_per_angle[j]):
            assert sino[j, n] == 100 * j + n
        assert np.array_equal(sino.view(j), 100 * j + np.arange(g.detector_bins_per_angle[j]))


@pytest.mark.parametrize("kwargs", [
    dict(num_voxels_x=0, num_voxels_y=4, angles=(0.0,), detector_bins_per_angle=(4,)),
    dict(num_voxels_x=4, num_voxels_y=4, angles=(), detector_bins_per_angle=()),
    dict(num_voxels_x=4, num_voxels_y=4, angles=(np.pi,), detector_bins_per_angle=(4,)),
    dict(num_voxels_x=4, num_voxels_y=4, angles=(-0.1,), detector_bins_per_angle=(4,)),
    dict(num_voxels_x=4, num_voxels_y=4, angles=(0.0, 1.0), detector_bins_per_angle=(4,)),
    dict(num_voxels_x=4, num_voxels_y=4, angles=(0.0,), detector_bins_per_angle=(0,)),
])
def test_geometry_invariants(kwargs):
    with pytest.raises(ValueError):
        Geometry(**kwargs)


def test_toy_geometry_counts():
    g = toy_geometry()
    assert g.num_voxels == 16
    assert g.num_angles == 4
    assert g.total_rows == 22


def test_voxel_centers_are_centered():
    g = Geometry(4, 2, (0.0,), (1,), voxel_size=2.0)
    x, y = g.voxel_centers()
    assert np.allclose(x[:4], [-3, -1, 1, 3])
    assert np.allclose(y[::4], [-1, 1])


def test_parallel_beam_drops_missing_bins():
    g = Geometry.parallel_beam(4, 4, (0.0, np.pi / 4), 10)
    # axis view: only |t| < 2 hits; diagonal: |t| < 2*sqrt(2)
    assert g.detector_bins_per_angle == (4, 6)
    assert np.allclose(g.detector_offsets(0), [-1.5, -0.5, 0.5, 1.5])


def test_image_grid_validation():
    with pytest.raises(ValueError):
        ImageGrid(G44, np.zeros(15))
    with pytest.raises(ValueError):
        ImageGrid(G44, np.full(16, np.nan))
    img = ImageGrid(G44, np.arange(16.0))
    assert img.as_array()[2, 1] == 9.0
    with pytest.raises(ValueError):
        img.values[0] = 1.0
