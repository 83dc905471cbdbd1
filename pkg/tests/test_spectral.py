from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp
from hypothesis import given, strategies as st

from conftest import random_graph
from lsbm.errors import NoClusters, ThresholdUndefined
from lsbm.evaluation import misclassified
from lsbm.model import LabelGraph, Partition, ScaledModelSpec, build_scaled_model
from lsbm.sampler import sample
from lsbm.spectral import (
    SpectralConfig,
    aggregate,
    estimate_density,
    power_svd,
    reference_cluster,
    spectral_stage,
    trim,
    trim_count,
)


def complete_graph(n, L=1):
    u, v = np.triu_indices(n, k=1)
    return LabelGraph(n, L, u, v, np.ones(u.size, dtype=int))


class TestDensity:
    def test_empty(self):
        assert estimate_density(LabelGraph.empty(10, 1)) == 0.0

    def test_hand_count(self):
        g = LabelGraph.from_triples(4, 1, [(0, 1, 1), (1, 2, 1), (2, 3, 1)])
        assert estimate_density(g) == 0.5

    def test_complete(self):
        assert estimate_density(complete_graph(7)) == 1.0


class TestAggregate:
    def test_zero_weights(self):
        g = complete_graph(5)
        assert aggregate(g, [0.0]).nnz == 0

    def test_single_label_is_adjacency(self):
        g = LabelGraph.from_triples(4, 1, [(0, 1, 1), (2, 3, 1)])
        assert np.array_equal(aggregate(g, [1.0]).toarray(), g.indicator(1).toarray())

    def test_hand_built(self):
        g = LabelGraph.from_triples(5, 2, [(0, 1, 1), (0, 4, 2), (2, 3, 2), (1, 3, 1)])
        want = np.zeros((5, 5))
        for u, v, w in [(0, 1, 0.25), (0, 4, 0.75), (2, 3, 0.75), (1, 3, 0.25)]:
            want[u, v] = want[v, u] = w
        A = aggregate(g, [0.25, 0.75])
        assert np.array_equal(A.toarray(), want)
        assert np.all(A.diagonal() == 0)


def regular_graph(n, offsets, half=True):
    # circulant graph: v ~ v +- offsets, plus the antipodal pair when half is set
    pairs = set()
    for v in range(n):
        for d in offsets:
            pairs.add(tuple(sorted((v, (v + d) % n))))
        if half:
            pairs.add(tuple(sorted((v, (v + n // 2) % n))))
    return LabelGraph.from_triples(n, 1, [(a, b, 1) for a, b in sorted(pairs)])


class TestTrim:
    def test_nothing_removed_when_dense(self):
        g = complete_graph(30)
        gamma, A = trim(aggregate(g, [1.0]), g, estimate_density(g))
        assert gamma.size == 30 and A.shape == (30, 30)

    def test_count(self):
        assert trim_count(1000, 5 / 1000) == 6

    def test_ties_remove_largest_indices(self):
        g = regular_graph(1000, (1, 2))
        assert np.all(g.degrees() == 5)
        p = estimate_density(g)
        assert trim_count(1000, p) == 6
        gamma, A = trim(aggregate(g, [1.0]), g, p)
        assert gamma.tolist() == list(range(994))
        assert A.shape == (994, 994)

    def test_highest_degree_removed(self):
        g = LabelGraph.from_triples(20, 1, [(0, k, 1) for k in range(1, 20)])
        gamma, _ = trim(aggregate(g, [1.0]), g, 0.01)
        assert 0 not in gamma

    @given(st.integers(0, 2**32 - 1))
    def test_submatrix_consistent(self, seed):
        r = np.random.default_rng(seed)
        g = random_graph(r, int(r.integers(10, 60)), 2, float(r.uniform(0.01, 0.2)))
        p = estimate_density(g)
        A = aggregate(g, r.uniform(size=2))
        gamma, Ag = trim(A, g, p)
        assert g.n - gamma.size == min(trim_count(g.n, p), g.n)
        assert np.all(np.diff(gamma) > 0)
        assert np.array_equal(Ag.toarray(), A.toarray()[np.ix_(gamma, gamma)])


class TestPowerSVD:
    def test_zero_matrix(self):
        res = power_svd(sp.csr_matrix((50, 50)), 0.1, SpectralConfig(), np.random.default_rng(0))
        assert res.k_tilde == 0 and res.V.shape == (0, 50)

    def test_threshold_undefined(self):
        with pytest.raises(ThresholdUndefined):
            power_svd(sp.csr_matrix((50, 50)), 0.01, SpectralConfig(), np.random.default_rng(0))

    def test_rank_one(self):
        rng = np.random.default_rng(1)
        u = rng.standard_normal(200)
        u /= np.linalg.norm(u)
        c = 50.0
        res = power_svd(c * np.outer(u, u), 0.1, SpectralConfig(), rng)
        assert res.k_tilde == 1
        assert c / 2 <= res.singular_values[0] <= c * (1 + 1e-12)

    def test_planted_two_blocks(self):
        n = 400
        z = np.repeat([0, 1], n // 2)
        E = np.where(z[:, None] == z[None, :], 0.2, 0.02)
        np.fill_diagonal(E, 0.0)
        p_tilde = E.sum() / (n * (n - 1))
        res = power_svd(E, p_tilde, SpectralConfig.desk(), np.random.default_rng(2))
        assert res.k_tilde == 2
        w, vecs = la.eigh(E)
        top = vecs[:, np.argsort(-np.abs(w))[:2]]
        angles = la.subspace_angles(res.U, top)
        assert angles.max() < 1e-6

    @given(st.integers(0, 2**32 - 1))
    def test_orthonormal_columns(self, seed):
        r = np.random.default_rng(seed)
        g = random_graph(r, 120, 1, 0.15)
        A = aggregate(g, [1.0])
        res = power_svd(A, estimate_density(g), SpectralConfig.desk(), r)
        assert np.allclose(res.U.T @ res.U, np.eye(res.k_tilde), atol=1e-8)

    def test_rank_cap(self):
        res = power_svd(np.eye(30) * 100.0, 0.5, SpectralConfig(max_rank_cap=3), np.random.default_rng(0))
        assert res.k_tilde == 3 and res.rank_cap_reached


class TestReferenceCluster:
    n, p = 1000, 0.05  # radius^2 = n p^2 / ln(n p) ~ 0.64, desk size bound 40

    def clouds(self, rng, sizes=(300, 300), centers=((0, 0), (10, 0))):
        pts = [np.asarray(c) + 0.01 * rng.standard_normal((s, 2)) for s, c in zip(sizes, centers)]
        return np.vstack(pts)

    def test_identical_rows(self):
        rows = np.ones((200, 3))
        out = reference_cluster(rows, self.p, SpectralConfig.desk(), np.random.default_rng(0), n=self.n)
        assert out.k_hat == 1 and np.all(out.labels == 0)

    def test_two_clouds(self, rng):
        rows = self.clouds(rng)
        out = reference_cluster(rows, self.p, SpectralConfig.desk(), np.random.default_rng(3), n=self.n)
        truth = Partition(np.repeat([0, 1], 300))
        assert out.k_hat == 2
        assert misclassified(Partition(out.labels), truth)[0] == 0

    def test_leftover_goes_to_nearest_reference(self, rng):
        rows = np.vstack([self.clouds(rng), [[7.0, 0.0]]])
        out = reference_cluster(rows, self.p, SpectralConfig.desk(), np.random.default_rng(3), n=self.n)
        assert out.k_hat == 2
        assert out.labels[-1] == out.labels[300]

    def test_no_cluster(self, rng):
        with pytest.raises(NoClusters):
            reference_cluster(rng.standard_normal((30, 2)), self.p, SpectralConfig.desk(), rng, n=self.n)


class TestStage:
    params = build_scaled_model(ScaledModelSpec.planted(4000, 3, 8, 1))

    def test_desk_recovers_rank(self):
        truth, g = sample(self.params, 11)
        out = spectral_stage(g, SpectralConfig.desk(), 11)
        assert out.k_hat == 3
        est = Partition(out.full_assignment(), out.k_hat)
        assert misclassified(est, truth)[0] <= 0.1 * g.n
        assert sorted(np.concatenate(out.clusters()).tolist()) == out.gamma.tolist()

    def test_asymptotic_constants_fail_at_desk_scale(self):
        _, g = sample(self.params, 11)
        with pytest.raises(NoClusters):
            spectral_stage(g, SpectralConfig(), 11)

    def test_deterministic(self):
        _, g = sample(self.params, 5)
        a = spectral_stage(g, SpectralConfig.desk(), 5)
        b = spectral_stage(g, SpectralConfig.desk(), 5)
        assert np.array_equal(a.full_assignment(), b.full_assignment())
        assert np.array_equal(a.chi_trace, b.chi_trace)

    def test_sparse_graph_rejected(self):
        g = LabelGraph.from_triples(100, 1, [(0, 1, 1)])
        with pytest.raises(ThresholdUndefined):
            spectral_stage(g, SpectralConfig.desk(), 0)

    def test_config_roundtrip(self):
        cfg = SpectralConfig.desk()
        assert SpectralConfig.from_dict(cfg.to_dict()) == cfg
        assert SpectralConfig.from_dict({"preset": "desk", "reference_factor": 4.0}).reference_factor == 4.0
        with pytest.raises(ValueError):
            SpectralConfig(threshold_multiplier=0)
