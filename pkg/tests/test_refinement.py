from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_graph
from lsbm.errors import EmptyCluster
from lsbm.model import LabelGraph, ModelParams, Partition, ScaledModelSpec, build_scaled_model
from lsbm.oracle import naive_likelihood, single_item_deviations
from lsbm.refinement import (
    EstimatedParams,
    estimate_params,
    improve_once,
    refine,
    score_table,
    spectral_partition,
)
from lsbm.sampler import sample
from lsbm.spectral import SpectralConfig


class TestEstimate:
    def test_empty_graph_floor(self):
        n, L = 10, 2
        est = estimate_params(LabelGraph.empty(n, L), Partition([0] * 5 + [1] * 5))
        assert np.all(est.p_hat[..., 1:] == 1 / n**2)
        assert np.allclose(est.p_hat[..., 0], 1 - L / n**2, rtol=0, atol=1e-15)

    def test_hand_counts(self):
        # clusters {0,1,2} and {3,4,5}
        g = LabelGraph.from_triples(6, 2, [(0, 1, 1), (0, 2, 1), (1, 2, 2), (0, 3, 2), (2, 5, 2), (3, 4, 1)])
        est = estimate_params(g, Partition([0, 0, 0, 1, 1, 1]), floor=0.0 + 1e-12)
        p = est.p_hat
        assert p[0, 0, 1] == pytest.approx(2 / 3)
        assert p[0, 0, 2] == pytest.approx(1 / 3)
        assert p[0, 1, 2] == pytest.approx(2 / 9)
        assert p[0, 1, 1] == pytest.approx(1e-12)
        assert p[1, 1, 1] == pytest.approx(1 / 3)
        assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-12)

    @given(st.integers(0, 2**32 - 1))
    def test_symmetric_and_normalized(self, seed):
        r = np.random.default_rng(seed)
        n = int(r.integers(6, 40))
        g = random_graph(r, n, 2, 0.3)
        K = int(r.integers(1, 4))
        sigma = np.concatenate([np.arange(K), r.integers(0, K, n - K)])
        est = estimate_params(g, Partition(sigma, K))
        assert np.array_equal(est.p_hat, est.p_hat.transpose(1, 0, 2))
        assert np.allclose(est.p_hat.sum(axis=-1), 1.0, atol=1e-12)
        assert np.all(est.p_hat > 0)

    def test_empty_cluster(self):
        with pytest.raises(EmptyCluster):
            estimate_params(LabelGraph.empty(4, 1), Partition([0, 0, 2, 2], 3))

    def test_dense_row_renormalized(self):
        u, v = np.triu_indices(4, k=1)
        g = LabelGraph(4, 1, u, v, np.ones(u.size, dtype=int))
        est = estimate_params(g, Partition([0, 0, 0, 0]))
        assert est.p_hat[0, 0, 0] > 0
        assert est.p_hat.sum() == pytest.approx(1.0)


def planted_params(n, a=0.5, b=0.05):
    p = np.zeros((2, 2, 2))
    p[..., 1] = [[a, b], [b, a]]
    p[..., 0] = 1 - p[..., 1]
    return ModelParams(n, [0.5, 0.5], p)


class TestImprove:
    def test_dominating_term(self):
        params = planted_params(8)
        g = LabelGraph.from_triples(8, 1, [(0, 1, 1), (0, 2, 1), (0, 3, 1)])
        start = Partition([1, 0, 0, 0, 1, 1, 1, 1])
        out = improve_once(g, start, EstimatedParams.from_model(params))
        assert out.assignment[0] == 0

    def test_ties_uniform(self):
        g = LabelGraph.empty(4, 1)
        est = EstimatedParams(np.full((2, 2, 2), 0.5))
        picks = [improve_once(g, Partition([0, 0, 1, 1]), est, seed=s).assignment[0] for s in range(1000)]
        assert np.mean(picks) == pytest.approx(0.5, abs=0.05)

    def test_fixed_point_against_single_item_oracle(self):
        params = planted_params(8, 0.6, 0.05)
        est = EstimatedParams.from_model(params)
        checked = 0
        for seed in range(20):
            truth, g = sample(params, seed)
            if truth.degenerate:
                continue
            dev = single_item_deviations(g, params, truth)
            out = improve_once(g, truth, est, seed=seed)
            for v in range(g.n):
                own = dev[v, truth.assignment[v]]
                other = np.delete(dev[v], truth.assignment[v]).max()
                if own > other + 1e-9:
                    checked += 1
                    assert out.assignment[v] == truth.assignment[v]
        assert checked > 50

    @given(st.integers(0, 2**32 - 1))
    def test_permutation_equivariant(self, seed):
        r = np.random.default_rng(seed)
        n, K = 30, 3
        g = random_graph(r, n, 2, 0.2)
        sigma = Partition(np.concatenate([np.arange(K), r.integers(0, K, n - K)]), K)
        est = estimate_params(g, sigma)
        pi = r.permutation(K)
        out = improve_once(g, sigma, est, seed=1)
        moved = improve_once(g, sigma.relabeled(pi), est.relabeled(np.argsort(pi)), seed=1)
        assert np.array_equal(moved.assignment, pi[out.assignment])

    @given(st.integers(0, 2**32 - 1))
    def test_fast_scores_match_naive(self, seed):
        r = np.random.default_rng(seed)
        n = int(r.integers(2, 50))
        L = int(r.integers(1, 4))
        K = int(r.integers(1, min(n, 4) + 1))
        g = random_graph(r, n, L, float(r.uniform(0, 0.4)))
        sigma = Partition(np.concatenate([np.arange(K), r.integers(0, K, n - K)]), K)
        est = estimate_params(g, sigma)
        assert np.allclose(score_table(g, sigma, est), naive_likelihood(g, sigma, est), rtol=0, atol=1e-9)


class TestRefine:
    def test_zero_sweeps_for_two_items(self):
        g = LabelGraph.from_triples(2, 1, [(0, 1, 1)])
        res = refine(g, Partition([0, 1]), EstimatedParams(np.full((2, 2, 2), 0.5)))
        assert res.sweeps == 0
        assert res.partition == Partition([0, 1])

    def test_perfect_start_unchanged(self):
        params = build_scaled_model(ScaledModelSpec.binary(2000, 20, 1))
        truth, g = sample(params, 3)
        res = refine(g, truth, EstimatedParams.from_model(params), truth=truth)
        assert res.sweeps == math.floor(math.log(2000))
        assert res.partition == truth
        assert res.error_trace == [0] * (res.sweeps + 1)

    def test_pipeline_and_reestimation(self):
        params = build_scaled_model(ScaledModelSpec.planted(3000, 2, 10, 2))
        truth, g = sample(params, 9)
        a = spectral_partition(g, 9, SpectralConfig.desk(), truth=truth)
        b = spectral_partition(g, 9, SpectralConfig.desk(), truth=truth, reestimate=True)
        assert a.refine.error_trace[-1] <= a.refine.error_trace[0]
        assert b.refine.error_trace[-1] <= 0.02 * g.n
        assert a.k_hat == 2
