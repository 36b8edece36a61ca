import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weighted_tomo import linalg
from weighted_tomo.geometry import Geometry, Sinogram
from weighted_tomo.projector import BlockSystem
from weighted_tomo.solvers import solve_split_pinv
from weighted_tomo.weights import DensifyError, constant_weights, densify_W, ramp_weights


def penrose_residuals(m, mp):
    return (np.linalg.norm(m @ mp @ m - m), np.linalg.norm(mp @ m @ mp - mp),
            np.linalg.norm((m @ mp).T - m @ mp), np.linalg.norm((mp @ m).T - mp @ m))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 2**32 - 1), st.booleans())
def test_penrose_conditions(rows, cols, seed, deficient):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((rows, cols))
    if deficient and min(rows, cols) > 1:
        k = min(rows, cols) - 1
        m = rng.standard_normal((rows, k)) @ rng.standard_normal((k, cols))
    mp = linalg.pinv(m)
    scale = np.linalg.norm(m)
    assert mp.shape == (cols, rows)
    for r in penrose_residuals(m, mp):
        assert r <= 1e-8 * max(scale, 1.0)


def test_pinv_examples():
    assert np.allclose(linalg.pinv(np.eye(3)), np.eye(3))
    assert np.allclose(linalg.pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    assert np.allclose(linalg.pinv(np.array([[1.0, 1.0]])), [[0.5], [0.5]])
    assert linalg.pinv(np.zeros((0, 3))).shape == (3, 0)


def test_pinv_rejects_non_finite():
    with pytest.raises(ValueError):
        linalg.pinv(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        linalg.pinv(np.ones(3))


def test_rank_and_condition():
    assert linalg.numerical_rank(np.diag([3.0, 1.0, 0.0])) == 2
    assert linalg.numerical_rank(np.diag([1.0, 1e-20])) == 1
    assert linalg.condition_number(np.diag([4.0, 0.5])) == pytest.approx(8.0)
    assert linalg.condition_number(np.diag([1.0, 0.0])) == np.inf


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_closed_forms_match_svd(a, extra, seed):
    rng = np.random.default_rng(seed)
    tall = rng.standard_normal((a + extra, a))
    broad = tall.T.copy()
    for m, f in ((tall, linalg.left_pinv), (broad, linalg.right_pinv)):
        ref = linalg.pinv(m)
        assert np.linalg.norm(f(m) - ref) <= 1e-10 * max(np.linalg.norm(ref), 1.0)
        assert np.allclose(linalg.closed_form_pinv(m), f(m))


def test_toy_dense_shapes(toy):
    g, system, weights, gt, p = toy
    assert linalg.densify_B(system).shape == (22, 64)
    assert densify_W(weights).shape == (64, 16)
    assert linalg.densify_weighted(system, weights).shape == (22, 16)


def test_densify_b_cap(toy):
    with pytest.raises(DensifyError):
        linalg.densify_B(toy[1], cap=40)


def test_direct_pinv_recovers(toy):
    g, system, weights, gt, p = toy
    r = linalg.reconstruct_direct_pinv(system, weights, p, gt)
    assert r.l2_distance_to_ground_truth <= 1e-10
    assert r.ranks["weighted"] == 16


def test_split_equals_direct_for_single_square_view():
    # one view, one ray, one voxel: B and W are square and invertible
    g = Geometry(1, 1, (0.0,), (1,))
    system = BlockSystem.build(g)
    w = constant_weights(g, 3.0)
    p = Sinogram(g, np.array([1.5]))
    a = linalg.reconstruct_direct_pinv(system, w, p).image.values
    b = linalg.reconstruct_split_pinv(system, w, p).image.values
    assert np.allclose(a, b)
    assert a[0] == pytest.approx(0.5)


def test_split_differs_on_toy(toy):
    g, system, weights, gt, p = toy
    b = linalg.densify_B(system)
    assert np.linalg.norm(linalg.right_pinv(b) @ b - np.eye(64)) > 0.1
    r = linalg.reconstruct_split_pinv(system, weights, p, gt)
    assert r.l2_distance_to_ground_truth > 0.1


def test_pinv_of_product_is_not_product_of_pinvs(toy):
    g, system, weights, gt, p = toy
    b, w = linalg.densify_B(system), densify_W(weights)
    a_pinv = linalg.pinv(b @ w)
    rel = np.linalg.norm(a_pinv - linalg.pinv(w) @ linalg.pinv(b)) / np.linalg.norm(a_pinv)
    assert rel > 1e-3


def test_product_formula_identity_with_svd_outer(toy):
    g, system, weights, gt, p = toy
    m, diag = linalg.product_formula_pinv(system, weights, outer="svd")
    a_pinv = linalg.pinv(linalg.densify_weighted(system, weights))
    assert np.linalg.norm(m - a_pinv) <= 1e-8 * np.linalg.norm(a_pinv)
    assert diag["ranks"]["BWW+"] == 16 and diag["ranks"]["B+BW"] == 16


def test_product_formula_closed_form_recovers_range_data(toy):
    # the closed-form outer inverses are a generalized inverse only on range(BW)
    g, system, weights, gt, p = toy
    r = linalg.reconstruct_product_formula_pinv(system, weights, p, gt, outer="closed-form")
    assert r.l2_distance_to_ground_truth <= 1e-8
    assert r.ranks["WWt"] == 16


def test_product_formula_rejects_unknown_outer(toy):
    with pytest.raises(ValueError):
        linalg.product_formula_pinv(toy[1], toy[2], outer="qr")


@pytest.mark.xfail(strict=True, reason="the product formula is an exact identity for "
                                       "full-rank factors; it cannot be 5x worse than split")
def test_product_formula_much_worse_than_split(toy):
    g, system, weights, gt, p = toy
    split = linalg.reconstruct_split_pinv(system, weights, p, gt)
    prod = linalg.reconstruct_product_formula_pinv(system, weights, p, gt)
    assert prod.l2_distance_to_ground_truth >= 5 * split.l2_distance_to_ground_truth


def test_matrix_free_split_matches_dense(toy):
    g, system, weights, gt, p = toy
    dense = linalg.reconstruct_split_pinv(system, weights, p).image.values
    free = solve_split_pinv(system, weights, p, cg_rtol=1e-12).values
    assert np.allclose(free, dense, rtol=1e-8, atol=1e-10)


def test_matrix_free_split_matches_dense_random_weights(rng):
    g = Geometry.parallel_beam(5, 5, np.linspace(0, np.pi, 4, endpoint=False), 8)
    system = BlockSystem.build(g)
    w = ramp_weights(g, 0.1, 2.0)
    p = Sinogram(g, rng.random(g.total_rows))
    dense = linalg.reconstruct_split_pinv(system, w, p).image.values
    free = solve_split_pinv(system, w, p, cg_rtol=1e-12).values
    assert np.allclose(free, dense, rtol=1e-8, atol=1e-10)


def test_report_to_dict(toy):
    g, system, weights, gt, p = toy
    d = linalg.reconstruct_direct_pinv(system, weights, p, gt).to_dict()
    assert d["method"] == "direct-weighted"
    assert set(d) >= {"l2_distance_to_ground_truth", "ranks", "condition_number", "value_range"}
