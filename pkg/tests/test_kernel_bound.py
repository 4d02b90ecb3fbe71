"""
Tests for the surrogate kernel, margin bounds and near-miss pairs.
"""

import math

import numpy as np
import pytest

from services.errors import InputError
from services.indep_engine import markov_equivalent
from services.kernel_bound import (
    FeatureVec,
    TokenSeq,
    delta_similarity,
    feature_delta,
    interventional_rho,
    margin_bound,
    max_achievable_margin,
    near_miss_factory,
    positional_features,
    prefix_delta_bound,
    required_b,
    sequence_report,
    similarity_report,
    surrogate_kernel,
    sweep,
)


def seq(text):
    return TokenSeq.from_text(text)


class TestSurrogateKernel:
    """Positional agreement kernel."""

    def test_identical(self):
        a = seq("A correlates with B.")
        assert surrogate_kernel(a, a) == 1.0
        assert delta_similarity(a, a) == 0.0

    def test_one_token_differs(self):
        assert delta_similarity(seq("a b c d"), seq("a b c e")) == pytest.approx(0.25)

    def test_padding(self):
        assert delta_similarity(seq("a b"), seq("a b c")) == pytest.approx(1 / 3)

    def test_case_folded(self):
        assert delta_similarity(seq("Yes"), seq("yes")) == 0.0

    def test_empty_sequence_rejected(self):
        with pytest.raises(InputError):
            seq("   ")

    def test_prefix_bound(self):
        a, b = seq("a b c d e"), seq("a b c x y")
        assert prefix_delta_bound(a, b) == pytest.approx(2 * 2 / 5)
        assert delta_similarity(a, b) <= prefix_delta_bound(a, b)

    def test_yes_no_rho(self):
        assert interventional_rho(seq("yes"), seq("no")) == 1.0


class TestMarginBound:
    """Margin and weight-norm bounds."""

    def test_margin_bound_value(self):
        assert margin_bound(1.0, 1.0, 0.5) == pytest.approx(1.0)
        assert margin_bound(2.0, 1.0, 0.0) == 0.0

    def test_required_b_edges(self):
        assert required_b(1.0, 1.0, 0.0) == math.inf
        assert required_b(0.0, 1.0, 0.0) == 0.0
        assert required_b(1.0, 1.0, 0.5) == pytest.approx(1.0)

    def test_negative_arguments(self):
        with pytest.raises(InputError):
            margin_bound(-1.0, 1.0, 0.1)

    def test_feature_norm_checked(self):
        with pytest.raises(InputError):
            FeatureVec(np.array([1.0, 1.0]), norm_bound=1.0)

    def test_bound_attained_for_unit_norm_features(self):
        phi_a, phi_b = positional_features([seq("a b c d"), seq("a x c y")])
        report = similarity_report(phi_a, phi_b, b_norm=3.0)
        assert phi_a.norm == pytest.approx(1.0)
        assert report.achieved_margin == pytest.approx(report.margin_bound)

    def test_strictly_below_for_shorter_equal_norms(self):
        phi_a, phi_b = positional_features([seq("a b c d"), seq("a x c y")])
        half_a = FeatureVec(phi_a.coordinates * 0.5, norm_bound=1.0)
        half_b = FeatureVec(phi_b.coordinates * 0.5, norm_bound=1.0)
        report = similarity_report(half_a, half_b)
        assert report.achieved_margin < report.margin_bound

    def test_bound_holds_for_random_unit_norm_pairs(self):
        """10,000 unit-norm pairs: the achievable margin never exceeds B * kappa * sqrt(2 delta), and meets it."""
        rng = np.random.default_rng(31)
        for _ in range(10000):
            dim = int(rng.integers(2, 12))
            a = rng.normal(size=dim)
            b = a + rng.normal(scale=float(rng.uniform(0.01, 2.0)), size=dim)
            phi_a = FeatureVec(a / np.linalg.norm(a))
            phi_b = FeatureVec(b / np.linalg.norm(b))
            b_norm = float(rng.uniform(0.1, 10.0))
            report = similarity_report(phi_a, phi_b, b_norm=b_norm)
            assert report.achieved_margin <= report.margin_bound + 1e-9
            assert report.achieved_margin == pytest.approx(report.margin_bound, abs=1e-9)

    def test_bound_holds_for_random_positional_pairs(self):
        rng = np.random.default_rng(32)
        vocab = ['a', 'b', 'c', 'yes', 'no']
        for _ in range(2000):
            left = seq(' '.join(rng.choice(vocab, size=int(rng.integers(1, 30)))))
            right = seq(' '.join(rng.choice(vocab, size=int(rng.integers(1, 30)))))
            report = sequence_report(left, right, b_norm=2.0)
            assert report.achieved_margin <= report.margin_bound + 1e-9
            assert report.delta == pytest.approx(delta_similarity(left, right))

    def test_bound_slack_for_equal_norms_below_kappa(self):
        rng = np.random.default_rng(33)
        for _ in range(1000):
            a, b = rng.normal(size=6), rng.normal(size=6)
            scale = float(rng.uniform(0.1, 0.9))
            phi_a = FeatureVec(scale * a / np.linalg.norm(a))
            phi_b = FeatureVec(scale * b / np.linalg.norm(b))
            report = similarity_report(phi_a, phi_b)
            assert report.achieved_margin < report.margin_bound

    def test_features_reproduce_kernel(self):
        a, b = seq("a b c"), seq("a q c r")
        phi_a, phi_b = positional_features([a, b])
        assert float(np.dot(phi_a.coordinates, phi_b.coordinates)) == pytest.approx(surrogate_kernel(a, b))
        assert feature_delta(phi_a, phi_b) == pytest.approx(delta_similarity(a, b))

    def test_sequence_report(self):
        report = sequence_report(seq("a b c d"), seq("a b c e"), b_norm=1.0, gamma=1.0)
        assert report.delta == pytest.approx(0.25)
        assert report.kernel_cosine == pytest.approx(0.75)
        assert report.required_b == pytest.approx(1 / math.sqrt(0.5))
        assert max_achievable_margin(*positional_features([seq("a"), seq("b")]), 1.0) == pytest.approx(math.sqrt(2))


class TestNearMiss:
    """Chain/fork pairs embedded in d variables."""

    def test_seven_variables(self):
        pair = near_miss_factory(7)
        assert pair.seq_plus.length == pair.seq_minus.length == 224
        assert pair.delta == pytest.approx(1 / 224)
        assert pair.rho == 1.0

    def test_graphs_share_premise_but_differ_interventionally(self):
        pair = near_miss_factory(5)
        assert markov_equivalent(pair.g_plus, pair.g_minus)
        assert pair.g_plus.reach_matrix[0, 2]
        assert not pair.g_minus.reach_matrix[0, 2]

    def test_length_grows_quadratically(self):
        for d in (3, 7, 12, 24):
            assert near_miss_factory(d).seq_plus.length == 5.5 * d * d - 11.5 * d + 35

    def test_too_small(self):
        with pytest.raises(InputError):
            near_miss_factory(2)

    def test_sweep(self):
        rows = sweep(range(7, 25))
        assert [row.d for row in rows] == list(range(7, 25))
        assert rows[0].to_dict()['L'] == 224
        assert rows[-1].length == 2927
        assert rows[-1].delta / rows[0].delta == pytest.approx(224 / 2927)
        assert rows[0].required_b == pytest.approx(math.sqrt(112))
        assert all(row.rho == 1.0 for row in rows)
        ratios = [row.required_b / row.d for row in rows]
        assert all(later >= earlier for earlier, later in zip(ratios, ratios[1:]))
        deltas = [row.delta for row in rows]
        assert all(later < earlier for earlier, later in zip(deltas, deltas[1:]))
