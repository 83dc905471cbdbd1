from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_model
from lsbm.errors import DegenerateModel, ModelError, OutOfRange
from lsbm.model import (
    LabelGraph,
    ModelParams,
    Partition,
    ScaledModelSpec,
    build_scaled_model,
    scaling_value,
    validate,
)


def two_cluster(xi, zeta, n=100):
    p = np.zeros((2, 2, 2))
    p[0, 0, 1] = p[1, 1, 1] = xi
    p[0, 1, 1] = p[1, 0, 1] = zeta
    p[..., 0] = 1 - p[..., 1]
    return ModelParams(n, [0.5, 0.5], p)


class TestModelParams:
    def test_sorts_alpha_and_keeps_user_order(self):
        p = np.zeros((2, 2, 2))
        p[..., 1] = [[0.1, 0.02], [0.02, 0.05]]
        p[..., 0] = 1 - p[..., 1]
        m = ModelParams(10, [0.7, 0.3], p)
        assert m.alpha.tolist() == [0.3, 0.7]
        assert m.perm.tolist() == [1, 0]
        assert m.p[0, 0, 1] == 0.05
        assert m.user_alpha.tolist() == [0.7, 0.3]
        assert np.array_equal(m.user_p, p)

    def test_alpha_must_sum_to_one(self):
        p = np.array([[[0.9, 0.1]]])
        with pytest.raises(ModelError):
            ModelParams(5, [0.9], p)

    def test_row_not_a_distribution(self):
        p = np.array([[[0.8, 0.1]]])
        with pytest.raises(DegenerateModel):
            ModelParams(5, [1.0], p)

    def test_asymmetric_rejected(self):
        p = np.zeros((2, 2, 2))
        p[..., 1] = [[0.1, 0.02], [0.03, 0.1]]
        p[..., 0] = 1 - p[..., 1]
        with pytest.raises(ModelError):
            ModelParams(5, [0.5, 0.5], p)

    def test_label_zero_must_dominate(self):
        p = np.array([[[0.4, 0.6]]])
        with pytest.raises(ModelError):
            ModelParams(5, [1.0], p)

    def test_arrays_read_only(self):
        m = two_cluster(0.1, 0.01)
        with pytest.raises(ValueError):
            m.p[0, 0, 0] = 0.5


class TestLabelGraph:
    def test_normalizes_and_sorts(self):
        g = LabelGraph(5, 2, [3, 0, 4], [1, 2, 2], [1, 2, 1])
        assert g.u.tolist() == [0, 1, 2]
        assert g.v.tolist() == [2, 3, 4]
        assert g.labels.tolist() == [2, 1, 1]

    @pytest.mark.parametrize(
        "u,v,labels",
        [([0], [0], [1]), ([0, 1], [1, 0], [1, 2]), ([0], [5], [1]), ([0], [1], [3]), ([0], [1], [0])],
    )
    def test_rejects_invalid(self, u, v, labels):
        with pytest.raises(ModelError):
            LabelGraph(5, 2, u, v, labels)

    def test_neighbors_and_degrees(self):
        g = LabelGraph.from_triples(4, 2, [(0, 1, 1), (0, 3, 2), (2, 3, 1)])
        nb, lab = g.neighbors(0)
        assert nb.tolist() == [1, 3]
        assert lab.tolist() == [1, 2]
        assert g.degrees().tolist() == [2, 1, 1, 2]
        assert g.indicator(2).toarray()[3, 0] == 1.0
        assert np.array_equal(g.dense_labels(), g.dense_labels().T)


class TestPartition:
    def test_degenerate_flag(self):
        assert Partition([0, 0, 2], 3).degenerate
        assert not Partition([0, 1, 1]).degenerate

    def test_negative_rejected(self):
        with pytest.raises(ModelError):
            Partition([0, -1])


class TestValidate:
    def test_single_cluster(self):
        rep = validate(ModelParams(10, [1.0], [[[0.9, 0.1]]]))
        assert rep.eta == 1.0
        assert rep.epsilon == 0.0

    def test_identical_rows(self):
        assert validate(two_cluster(0.05, 0.05)).epsilon == 0.0

    def test_two_cluster_epsilon_formula(self):
        xi, zeta = 0.08, 0.02
        rep = validate(two_cluster(xi, zeta))
        assert rep.epsilon == pytest.approx(2 * (xi - zeta) ** 2 / xi**2, rel=1e-12)
        assert rep.eta == pytest.approx(xi / zeta, rel=1e-12)
        assert rep.p_bar == xi

    def test_zero_label_entry(self):
        rep = validate(two_cluster(0.05, 0.0))
        assert rep.eta == math.inf
        assert rep.kappa == -math.inf

    def test_kappa_value(self):
        n = 1000
        rep = validate(two_cluster(0.1, 0.01, n=n))
        assert rep.kappa == pytest.approx(math.log(n * 0.01) / math.log(n * 0.1))

    @given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(1, 3))
    def test_permutation_equivariant(self, seed, K, L):
        r = np.random.default_rng(seed)
        m = random_model(r, K, L)
        order = r.permutation(K)
        a, b = validate(m), validate(m.relabeled(order))
        assert a.eta == pytest.approx(b.eta, rel=1e-12)
        assert a.epsilon == pytest.approx(b.epsilon, rel=1e-12)
        assert a.kappa == pytest.approx(b.kappa, rel=1e-12)
        assert a.p_bar == b.p_bar


class TestScaledModels:
    def test_binary_entries(self):
        m = build_scaled_model(ScaledModelSpec.binary(10000, 9, 1))
        assert m.user_p[0, 0, 1] == pytest.approx(9 * math.log(10000) / 10000, rel=1e-15)
        assert m.user_p[0, 1, 1] == pytest.approx(math.log(10000) / 10000, rel=1e-15)

    def test_equal_rates(self):
        m = build_scaled_model(ScaledModelSpec.planted(500, 3, 2, 2))
        assert np.all(m.user_p[..., 1] == m.user_p[0, 0, 1])

    def test_hidden_community(self):
        n, a, b = 2000, 5.0, 1.0
        m = build_scaled_model(ScaledModelSpec.hidden(n, 0.3, a, b))
        f = math.log(n) / n
        assert m.user_p[0, 0, 1] == pytest.approx(a * f)
        assert m.user_p[0, 1, 1] == m.user_p[1, 1, 1] == pytest.approx(b * f)

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            build_scaled_model(ScaledModelSpec.binary(10, 9, 1))

    def test_sampled_and_signed_rows(self):
        m = build_scaled_model(ScaledModelSpec.sampled(5000, 2.0, 0.6, 0.2))
        assert m.L == 2
        assert m.user_p[0, 0, 1] + m.user_p[0, 0, 2] == pytest.approx(2 * math.log(5000) / 5000)
        s = build_scaled_model(ScaledModelSpec.signed(5000, 3, 1, 1, 3))
        assert s.user_p[0, 0, 1] > s.user_p[0, 1, 1]

    def test_scaling_expressions(self):
        assert scaling_value("log", 100) == math.log(100)
        assert scaling_value("sqrt", 100) == 10.0
        assert scaling_value("const", 100) == 1.0
        assert scaling_value("log(n)**2", 100) == pytest.approx(math.log(100) ** 2)
        with pytest.raises(ModelError):
            scaling_value("__import__('os')", 100)

    def test_dict_roundtrip(self):
        spec = ScaledModelSpec.signed(800, 3, 1, 1, 3)
        assert ScaledModelSpec.from_dict(spec.to_dict()) == spec
        spec = ScaledModelSpec.planted(800, 3, 4, 1)
        assert ScaledModelSpec.from_dict(spec.to_dict()) == spec
