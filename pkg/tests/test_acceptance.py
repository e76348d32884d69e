"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import math
import time
import tracemalloc

import numpy as np
import pytest
from acceptance_log import report
from scipy.stats import spearmanr

from hyperdiff import balanced_tree, random_tree, shortest_paths, write_edge_list
from hyperdiff.diffusion import multiscale_densities, spectral_decompose
from hyperdiff.evaluation import average_distortion, gromov_delta, mean_average_precision
from hyperdiff.hde import embed, hdd_matrix, hdd_pair, half_space_distance, scale_distances, variant_distance
from hyperdiff.kernel import graph_laplacian, heat_kernel_operator
from hyperdiff.pipeline import PipelineConfig, run_pipeline

pytestmark = pytest.mark.acceptance

ALPHA = 0.5


def _embedding(g, max_scale, alpha=ALPHA):
    s = spectral_decompose(heat_kernel_operator(graph_laplacian(g)))
    return embed(multiscale_densities(s, max_scale), alpha)


def _corpus():
    rng = np.random.default_rng(1234)
    trees = []
    for _ in range(20):
        n = int(rng.integers(30, 201))
        trees.append(random_tree(n, rng))
    return trees


@pytest.fixture(scope="module")
def balanced_runs():
    start = time.perf_counter()
    runs = {}
    for depth in (4, 5):
        g = balanced_tree(2, depth)
        e = _embedding(g, 3)
        runs[depth] = (g, e, hdd_matrix(e), shortest_paths(g))
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def corpus_runs():
    start = time.perf_counter()
    runs = []
    for g in _corpus():
        e = _embedding(g, 10)
        runs.append((g, e, hdd_matrix(e), shortest_paths(g)))
    return runs, time.perf_counter() - start


def test_criterion_1_balanced_tree_map(balanced_runs):
    runs, elapsed = balanced_runs
    maps = {depth: mean_average_precision(g, d) for depth, (g, _, d, _) in runs.items()}
    ok = all(m == 1.0 for m in maps.values()) and elapsed < 5
    report(1, "balanced-tree MAP == 1.0", ok, f"MAP depth4={maps[4]!r} depth5={maps[5]!r}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_balanced_tree_distortion(balanced_runs):
    runs, _ = balanced_runs
    dist = {depth: average_distortion(d, dt) for depth, (_, _, d, dt) in runs.items()}
    ok = all(v <= 0.25 for v in dist.values())
    report(2, "balanced-tree distortion <= 0.25", ok, f"depth4={dist[4]:.4f} depth5={dist[5]:.4f}")
    assert ok


def test_criterion_3_euclidean_variant_fails(balanced_runs):
    runs, _ = balanced_runs
    details, ok = [], True
    for depth, (g, e, d, _) in runs.items():
        m_hdd = mean_average_precision(g, d)
        m_euc = mean_average_precision(g, variant_distance(e, "euclidean"))
        ok &= m_hdd == 1.0 and m_euc <= 0.6
        details.append(f"depth{depth}: euclidean={m_euc:.4f} hdd={m_hdd:.4f}")
    report(3, "euclidean-variant MAP <= 0.6 with HDD 1.0", ok, "; ".join(details))
    assert ok


def test_criterion_4_ablation_ordering():
    start = time.perf_counter()
    g = balanced_tree(2, 5)
    e = _embedding(g, 3)
    m_hdd = mean_average_precision(g, hdd_matrix(e))
    others = {"l2_product": mean_average_precision(g, variant_distance(e, "l2_product"))}
    for k in range(e.max_scale + 1):
        others[f"single_scale({k})"] = mean_average_precision(g, variant_distance(e, "single_scale", k))
    elapsed = time.perf_counter() - start
    ok = all(m_hdd >= m for m in others.values()) and elapsed < 10
    detail = ", ".join(f"{k}={v:.4f}" for k, v in others.items())
    report(4, "MAP(HDD) >= every ablation", ok, f"hdd={m_hdd:.4f}, {detail}, {elapsed:.2f}s")
    assert ok


def test_criterion_5_snowflake_equivalence(corpus_runs):
    runs, elapsed = corpus_runs
    worst_rho, worst_spread = 1.0, 0.0
    for _, _, d, dt in runs:
        iu = np.triu_indices(d.shape[0], 1)
        target = dt[iu] ** (2 * ALPHA)
        rho = spearmanr(d[iu], target).statistic
        ratio = d[iu] / target
        worst_rho = min(worst_rho, rho)
        worst_spread = max(worst_spread, ratio.max() / ratio.min())
    ok = worst_rho >= 0.95 and worst_spread <= 10 and elapsed < 60
    report(5, "HDD ~ d_T^(2 alpha) on 20 random trees", ok,
           f"min Spearman={worst_rho:.4f}, max ratio spread={worst_spread:.3f}, {elapsed:.2f}s")
    assert ok


def test_criterion_6_growth_lower_bound(corpus_runs):
    runs, _ = corpus_runs
    worst, checked = math.inf, 0
    for _, e, _, _ in runs:
        factor = scale_distances(e)
        hell = np.stack([np.linalg.norm(p[:, None] - p[None], axis=2) for p in e.psi])
        iu = np.triu_indices(e.n, 1)
        for k1 in range(e.max_scale + 1):
            for k2 in range(k1 + 1, e.max_scale + 1):
                mono = hell[k1][iu] <= hell[k2][iu]
                ratio = factor[k2][iu][mono] / factor[k1][iu][mono]
                slack = ratio - 2.0 ** (-(k2 - k1) * ALPHA)
                if slack.size:
                    worst = min(worst, slack.min())
                    checked += slack.size
    ok = worst >= -1e-9
    report(6, "factor ratio >= 2^-(k2-k1)alpha", ok, f"min slack={worst:.3g} over {checked} (pair, k1, k2)")
    assert ok


def test_criterion_7_invariant_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = {"row": 0.0, "semigroup": 0.0, "hellinger": 0.0, "factor_sum": 0.0, "triangle": 0.0, "delta": 0.0}
    for _ in range(8):
        g = random_tree(int(rng.integers(10, 65)), rng)
        s = spectral_decompose(heat_kernel_operator(graph_laplacian(g)))
        ms = multiscale_densities(s, 10)
        phi = ms.phi
        worst["row"] = max(worst["row"], np.abs(phi.sum(axis=2) - 1).max())
        for k in range(1, ms.max_scale + 1):
            worst["semigroup"] = max(worst["semigroup"], np.abs(phi[k] @ phi[k] - phi[k - 1]).max())
        e = embed(ms, ALPHA)
        hell = np.stack([np.linalg.norm(p[:, None] - p[None], axis=2) for p in e.psi])
        worst["hellinger"] = max(worst["hellinger"], hell.max() - math.sqrt(2))
        d = hdd_matrix(e)
        for i, j in rng.integers(0, e.n, size=(30, 2)):
            total = sum(half_space_distance(e.point(i, k), e.point(j, k)) for k in range(e.max_scale + 1))
            worst["factor_sum"] = max(worst["factor_sum"], abs(hdd_pair(e, i, j) - total))
        worst["triangle"] = max(worst["triangle"], (d[:, None, :] - d[:, :, None] - d[None, :, :]).max())
        worst["delta"] = max(worst["delta"], gromov_delta(shortest_paths(g)))
    elapsed = time.perf_counter() - start
    ok = (
        worst["row"] < 1e-8
        and worst["semigroup"] < 1e-6
        and worst["hellinger"] <= 0
        and worst["factor_sum"] < 1e-12
        and worst["triangle"] < 1e-9
        and worst["delta"] == 0
        and elapsed < 30
    )
    report(7, "numerical invariants", ok, ", ".join(f"{k}={v:.3g}" for k, v in worst.items()) + f", {elapsed:.2f}s")
    assert ok


def test_criterion_8_external_datasets():
    report(8, "external benchmark datasets", None, "excluded from CI; see README for reference targets")
    pytest.skip("external datasets are not part of the test suite")


def test_criterion_9_performance(tmp_path):
    n, k = 500, 10
    path = tmp_path / "g500.edges"
    write_edge_list(random_tree(n, np.random.default_rng(1234)), path)
    cfg = PipelineConfig(graph=str(path), max_scale=k, workers=4)
    start = time.perf_counter()
    result = run_pipeline(cfg)
    elapsed = time.perf_counter() - start
    tracemalloc.start()
    try:
        run_pipeline(cfg)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    budget = 8 * (k + 1) * n**2 * 1.5
    ok = elapsed < 10 and peak < budget and result.distances.shape == (n, n)
    report(9, "n=500, K=10 pipeline", ok, f"{elapsed:.2f}s, peak {peak / 1e6:.1f} MB of {budget / 1e6:.1f} MB")
    assert ok
