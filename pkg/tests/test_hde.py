import math

import numpy as np
import pytest
import reference as ref
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperdiff import balanced_tree, random_tree, shortest_paths
from hyperdiff.diffusion import multiscale_densities, spectral_decompose
from hyperdiff.hde import (
    HalfSpacePoint,
    auto_max_scale,
    default_max_scale,
    embed,
    half_space_distance,
    hdd_matrix,
    hdd_pair,
    scale_distances,
    variant_distance,
)
from hyperdiff.kernel import DiffusionOperator, graph_laplacian, heat_kernel_operator

# 3-node path, exp(-L), K=3, alpha=1/2; scipy expm + fractional_matrix_power + loop sum
PATH3_HDD_01 = 4.5104364167788
PATH3_HDD_02 = 6.98645915833986


def _tree_embedding(g, max_scale, alpha=0.5):
    s = spectral_decompose(heat_kernel_operator(graph_laplacian(g)))
    return embed(multiscale_densities(s, max_scale), alpha)


def _path3(max_scale=3):
    s = spectral_decompose(heat_kernel_operator(ref.path_laplacian(3)))
    return embed(multiscale_densities(s, max_scale), 0.5)


def test_heights():
    e = _tree_embedding(balanced_tree(2, 2), 4, alpha=0.5)
    assert e.heights[0] == 0.25
    assert e.heights[4] == 1.0
    for k in range(5):
        assert e.point(3, k).height == 2.0 ** (k * 0.5 - 2)
    assert e.dimension == (e.n + 1) * 5
    assert e.flatten().shape == (e.n, e.dimension)


def test_identity_operator_embedding():
    ms = multiscale_densities(spectral_decompose(DiffusionOperator(np.eye(3), np.ones(3))), 1)
    e = embed(ms, 0.3)
    for i in range(3):
        for k in range(2):
            np.testing.assert_allclose(e.point(i, k).horizontal, np.eye(3)[i], atol=1e-7)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_alpha_domain(alpha):
    ms = multiscale_densities(spectral_decompose(DiffusionOperator(np.eye(2), np.ones(2))), 0)
    with pytest.raises(ValueError):
        embed(ms, alpha)


def test_half_space_distance_examples():
    a = HalfSpacePoint(np.array([0.2, 0.3]), 0.7)
    assert half_space_distance(a, a) == 0.0
    lo = HalfSpacePoint(np.zeros(2), 1.0)
    hi = HalfSpacePoint(np.zeros(2), math.e)
    assert half_space_distance(lo, hi) == pytest.approx(1.0, abs=1e-14)
    assert half_space_distance(hi, lo) == half_space_distance(lo, hi)
    u = HalfSpacePoint(np.array([0.0, 0.0]), 0.5)
    v = HalfSpacePoint(np.array([0.3, 0.4]), 0.5)
    assert half_space_distance(u, v) == pytest.approx(2 * math.asinh(0.5 / (2 * 0.5)), rel=1e-14)
    with pytest.raises(ValueError):
        HalfSpacePoint(np.zeros(2), 0.0)


def test_hdd_pair_against_reference():
    e = _path3()
    assert hdd_pair(e, 1, 1) == 0.0
    assert hdd_pair(e, 0, 1) == pytest.approx(PATH3_HDD_01, abs=1e-10)
    assert hdd_pair(e, 0, 2) == pytest.approx(PATH3_HDD_02, abs=1e-10)
    assert hdd_pair(e, 0, 2) > hdd_pair(e, 0, 1)
    d = hdd_matrix(e)
    assert d[0, 2] == pytest.approx(PATH3_HDD_02, abs=1e-10)
    with pytest.raises(IndexError):
        hdd_pair(e, 0, 3)


def test_equal_densities_give_zero():
    ms = multiscale_densities(spectral_decompose(DiffusionOperator(np.full((2, 2), 0.5), np.ones(2))), 0)
    assert hdd_pair(embed(ms, 0.5), 0, 1) == pytest.approx(0.0, abs=1e-7)


def test_hdd_matrix_trivial_cases():
    ms = multiscale_densities(spectral_decompose(DiffusionOperator(np.eye(1), np.ones(1))), 2)
    np.testing.assert_array_equal(hdd_matrix(embed(ms)), [[0.0]])
    d = hdd_matrix(_tree_embedding(random_tree(30, 5), 3))
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)


def test_tree_level_symmetry():
    g = balanced_tree(2, 4)
    d = hdd_matrix(_tree_embedding(g, 3))
    dt = shortest_paths(g)
    for level in range(5):
        nodes = np.flatnonzero(dt[0] == level)
        assert np.ptp(d[0, nodes]) < 1e-8
    # leaf pairs at equal tree distance are related by an automorphism
    leaves = np.flatnonzero(dt[0] == 4)
    by_dist = {}
    for i in leaves:
        for j in leaves:
            by_dist.setdefault(dt[i, j], []).append(d[i, j])
    for vals in by_dist.values():
        assert np.ptp(vals) < 1e-8


@settings(max_examples=10, deadline=None)
@given(st.integers(5, 64), st.integers(0, 2**32 - 1), st.integers(0, 6))
def test_factor_sum_identity_and_metric(n, seed, max_scale):
    e = _tree_embedding(random_tree(n, seed), max_scale)
    d = hdd_matrix(e)
    rng = np.random.default_rng(seed)
    for i, j in rng.integers(0, n, size=(10, 2)):
        factors = [half_space_distance(e.point(i, k), e.point(j, k)) for k in range(max_scale + 1)]
        assert abs(hdd_pair(e, i, j) - sum(factors)) < 1e-12
        assert abs(d[i, j] - hdd_pair(e, i, j)) < 1e-12
    assert np.all(d >= 0)
    assert np.array_equal(d, d.T)
    off = ~np.eye(n, dtype=bool)
    assert np.all(d[off] > 0)
    # triangle inequality on every triple
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-9)


def test_scale_ratio_bounds_on_corpus():
    alpha = 0.5
    for seed in range(6):
        e = _tree_embedding(random_tree(40 + 25 * seed, seed), 8, alpha)
        factor = scale_distances(e)
        hell = np.stack([np.linalg.norm(p[:, None] - p[None], axis=2) for p in e.psi])
        iu = np.triu_indices(e.n, 1)
        for k1 in range(e.max_scale + 1):
            c = hell[k1][iu].min()
            for k2 in range(k1 + 1, e.max_scale + 1):
                ratio = factor[k2][iu] / factor[k1][iu]
                bound = 2.0 ** (-(k2 - k1) * alpha)
                mono = hell[k1][iu] <= hell[k2][iu]
                assert np.all(ratio[mono] >= bound - 1e-9)
                assert np.all(ratio <= 2 * math.sqrt(2) / c * bound)


def test_variants():
    e = _tree_embedding(balanced_tree(2, 3), 0)
    np.testing.assert_allclose(variant_distance(e, "single_scale", 0), hdd_matrix(e), atol=1e-15)
    e = _tree_embedding(balanced_tree(2, 3), 3)
    factor = scale_distances(e)
    np.testing.assert_allclose(variant_distance(e, "l2_product"), (factor**2).sum(0), rtol=1e-13)
    np.testing.assert_allclose(variant_distance(e, "single_scale", 2), factor[2], rtol=1e-13)
    flat = e.flatten()
    euc = np.linalg.norm(flat[:, None] - flat[None], axis=2)
    np.testing.assert_allclose(variant_distance(e, "euclidean"), euc, atol=1e-12)
    for kind in ("hdd", "l2_product", "euclidean"):
        assert np.all(np.diag(variant_distance(e, kind)) == 0)
    assert np.all(np.diag(variant_distance(e, "single_scale", 1)) == 0)
    with pytest.raises(ValueError):
        variant_distance(e, "single_scale", 4)
    with pytest.raises(ValueError):
        variant_distance(e, "bogus")


def test_workers_do_not_change_hdd():
    e = _tree_embedding(random_tree(80, 1), 6)
    assert np.array_equal(hdd_matrix(e, workers=1), hdd_matrix(e, workers=4))


def test_default_and_auto_scale():
    assert default_max_scale(600) == 3
    assert default_max_scale(601) == 10
    s = spectral_decompose(heat_kernel_operator(graph_laplacian(balanced_tree(2, 3))))
    assert auto_max_scale(s, 0.5) == 19
    assert auto_max_scale(s, 0.5, tol=10.0) == 0
    ks = [auto_max_scale(s, 0.9, tol=t) for t in (1e-1, 1e-2, 1e-3)]
    assert ks == sorted(ks)
