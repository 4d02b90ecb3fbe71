"""
Tests for the hypothesis-discrimination loop.
"""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from services.acbo_loop import (
    AcboConfig,
    HypothesisMode,
    Posterior,
    StopRule,
    bayes_update,
    entropy,
    generate_hypotheses,
    information_gain,
    information_gain_table,
    predictive_response_prob,
    prediction_tensor,
    run,
    select_intervention,
    theoretical_rounds,
)
from services.convergence import expected_log_ratio_drift
from services.dag_core import Dag, VarPair
from services.errors import (
    AcboConfigError,
    ContradictionError,
    DegenerateHypothesisSpaceError,
    InputError,
    StalledDiscriminationError,
)
from services.indep_engine import satisfies
from services.oracle_service import OracleConfig
from services.premise_text import render_premise
from services.simulated_provider import SimulatedOracle

ABC = ['A', 'B', 'C']


@pytest.fixture
def chain():
    return Dag.from_named_edges(ABC, [('A', 'B'), ('B', 'C')])


@pytest.fixture
def fork():
    return Dag.from_named_edges(ABC, [('B', 'A'), ('B', 'C')])


def h_binary(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


class TestPosteriorMath:
    """Entropy, predictive probability, update and information gain."""

    def test_uniform_entropy(self):
        assert entropy(Posterior.uniform(4)) == pytest.approx(2.0)

    def test_point_mass_entropy(self):
        assert entropy(Posterior(np.array([0.0, 1.0, 0.0]))) == pytest.approx(0.0)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(InputError):
            Posterior(np.array([0.5, 0.6]))

    def test_negative_weight_rejected(self):
        with pytest.raises(InputError):
            Posterior(np.array([1.5, -0.5]))

    def test_predictive_probability(self):
        pi = Posterior(np.array([0.25, 0.75]))
        assert predictive_response_prob(pi, [1, 0], 0.1) == pytest.approx(0.25 * 0.9 + 0.75 * 0.1)

    def test_update(self):
        post = bayes_update(Posterior.uniform(2), [1, 0], 1, 0.1)
        assert post.to_list() == pytest.approx([0.9, 0.1])

    def test_update_noiseless_contradiction(self):
        pi = Posterior(np.array([1.0, 0.0]))
        with pytest.raises(ContradictionError):
            bayes_update(pi, [1, 0], 0, 0.0)

    def test_ig_noiseless_split(self):
        assert information_gain(Posterior.uniform(2), [0, 1], 0.0) == pytest.approx(1.0)

    def test_ig_noisy_split(self):
        assert information_gain(Posterior.uniform(2), [0, 1], 0.1) == pytest.approx(1.0 - h_binary(0.1))

    def test_ig_constant_predictions(self):
        assert information_gain(Posterior.uniform(3), [1, 1, 1], 0.1) == 0.0

    def test_ig_ignores_dead_hypotheses(self):
        pi = Posterior(np.array([0.5, 0.5, 0.0]))
        assert information_gain(pi, [1, 1, 0], 0.2) == 0.0

    def test_ig_table_matches_scalar(self, chain, fork):
        hypotheses = [chain, fork, Dag.empty(ABC), Dag.from_named_edges(ABC, [('A', 'C'), ('B', 'C')])]
        pi = Posterior(np.array([0.1, 0.2, 0.3, 0.4]))
        preds = prediction_tensor(hypotheses)
        table = information_gain_table(pi, preds, 0.15)
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert table[i, j] == pytest.approx(information_gain(pi, preds[:, i, j], 0.15), abs=1e-12)
        assert np.all(np.diag(table) == 0)

    def test_log_ratio_identity(self):
        """After updates, log(pi_a / pi_b) = (agreements_a - agreements_b) * log((1 - eta) / eta)."""
        eta = 0.2
        rng = np.random.default_rng(4)
        pi = Posterior.uniform(3)
        agreements = np.zeros(3)
        for _ in range(12):
            preds = rng.integers(2, size=3)
            answer = int(rng.integers(2))
            pi = bayes_update(pi, preds, answer, eta)
            agreements += preds == answer
        step = math.log((1 - eta) / eta)
        for a in range(3):
            for b in range(3):
                expected = (agreements[a] - agreements[b]) * step
                assert math.log(pi.weights[a] / pi.weights[b]) == pytest.approx(expected)

    @pytest.mark.parametrize('eta', [0.3, 0.45])
    def test_ratio_identity_every_round(self, eta):
        """Each update scales pi_a / pi_b by ((1 - eta) / eta) ** (agree_a - agree_b), over 10,000 rounds."""
        rng = np.random.default_rng(8)
        step = (1 - eta) / eta
        pi = Posterior.uniform(4)
        for _ in range(10000):
            preds = rng.integers(2, size=4)
            answer = int(rng.integers(2))
            after = bayes_update(pi, preds, answer, eta)
            agree = (preds == answer).astype(int)
            for a in range(4):
                for b in range(4):
                    scaled = (after.weights[a] / after.weights[b]) / (pi.weights[a] / pi.weights[b])
                    assert scaled == pytest.approx(step ** (agree[a] - agree[b]), rel=1e-12)
            pi = after

    def test_log_ratio_drift(self):
        """Mean per-round increment of the truth-vs-other log ratio matches the closed form."""
        eta = 0.2
        rounds = 40000
        right = bayes_update(Posterior.uniform(2), [1, 0], 1, eta)
        wrong = bayes_update(Posterior.uniform(2), [1, 0], 0, eta)
        gain = math.log(right.weights[0] / right.weights[1])
        loss = math.log(wrong.weights[0] / wrong.weights[1])
        errors = np.random.default_rng(7).random(rounds) < eta
        observed = float(np.mean(np.where(errors, loss, gain)))
        expected = expected_log_ratio_drift(eta)
        assert abs(observed - expected) / expected < 0.02


class TestSelection:
    """Epsilon-greedy query selection."""

    def test_lexicographic_tie_break(self):
        empty = Dag.empty(ABC)
        full = Dag.from_named_edges(ABC, [('A', 'B'), ('A', 'C'), ('B', 'C')])
        pair, ig, was_random = select_intervention(Posterior.uniform(2), [empty, full], 0.1, 0.0, rng_seed=0)
        assert pair == VarPair(0, 1)
        assert ig == pytest.approx(1.0 - h_binary(0.1))
        assert not was_random

    def test_stalled_when_indistinguishable(self):
        a = Dag.from_named_edges(ABC, [('A', 'B'), ('B', 'C')])
        b = Dag.from_named_edges(ABC, [('A', 'B'), ('B', 'C'), ('A', 'C')])
        with pytest.raises(StalledDiscriminationError):
            select_intervention(Posterior.uniform(2), [a, b], 0.1, 0.0)

    def test_full_exploration_is_uniform(self, chain, fork):
        rng = np.random.default_rng(12)
        counts = {}
        for _ in range(6000):
            pair, _, was_random = select_intervention(Posterior.uniform(2), [chain, fork], 0.1, 1.0, rng_seed=rng)
            assert was_random
            counts[pair] = counts.get(pair, 0) + 1
        assert len(counts) == 6
        assert chisquare(list(counts.values())).pvalue > 0.001

    def test_invalid_eps(self, chain, fork):
        with pytest.raises(InputError):
            select_intervention(Posterior.uniform(2), [chain, fork], 0.1, 1.5)


class TestAcboConfig:
    """Hyperparameter validation."""

    @pytest.mark.parametrize('kwargs', [
        {'budget_t': 0},
        {'explore_eps': 1.0},
        {'eta': 0.5},
        {'stop_delta': 0.0},
        {'votes_m': 4},
        {'candidates_n': 1},
        {'stop_rule': 'never'},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(AcboConfigError):
            AcboConfig(**kwargs)

    def test_dict_round_trip(self):
        cfg = AcboConfig(budget_t=7, stop_rule='entropy-threshold')
        assert AcboConfig.from_dict(cfg.to_dict()) == cfg
        assert cfg.stop_rule is StopRule.ENTROPY_THRESHOLD


class TestRun:
    """Full discrimination runs."""

    def test_chain_vs_fork_in_one_round(self, chain, fork):
        premise = render_premise(chain)[1]
        cfg = AcboConfig(eta=0.0, votes_m=1, explore_eps=0.0)
        oracle = SimulatedOracle(chain, OracleConfig(eta=0.0, votes_m=1))
        result = run(premise, [chain, fork], oracle, cfg, rng_seed=0)
        assert result.rounds_used == 1
        assert result.converged
        assert result.map_graph == chain
        assert result.trajectory[0].chosen_pair == VarPair(0, 1)
        assert result.trajectory[0].response.answer == 1

    def test_noisy_run_finds_truth(self, chain, fork):
        premise = render_premise(chain)[1]
        reverse = Dag.from_named_edges(ABC, [('C', 'B'), ('B', 'A')])
        cfg = AcboConfig(eta=0.05, votes_m=3, explore_eps=0.1, budget_t=30)
        oracle = SimulatedOracle(fork, OracleConfig(eta=0.05, votes_m=3))
        result = run(premise, [chain, fork, reverse], oracle, cfg, rng_seed=3)
        assert result.map_graph == fork
        assert result.map_mass > 0.99

    def test_deterministic(self, chain, fork):
        premise = render_premise(chain)[1]
        cfg = AcboConfig(eta=0.3, votes_m=1, explore_eps=0.3, budget_t=10)
        oracle = SimulatedOracle(chain, OracleConfig(eta=0.3, votes_m=1))
        first = run(premise, [chain, fork], oracle, cfg, rng_seed=21)
        second = run(premise, [chain, fork], oracle, cfg, rng_seed=21)
        assert [log.to_dict() for log in first.trajectory] == [log.to_dict() for log in second.trajectory]

    def test_budget_exhausted(self, chain, fork):
        premise = render_premise(chain)[1]
        cfg = AcboConfig(eta=0.4, votes_m=1, explore_eps=0.0, budget_t=1)
        oracle = SimulatedOracle(chain, OracleConfig(eta=0.4, votes_m=1))
        result = run(premise, [chain, fork], oracle, cfg, rng_seed=0)
        assert result.rounds_used == 1
        assert not result.converged
        assert result.map_mass == pytest.approx(0.6)

    def test_entropy_stop_rule(self, chain, fork):
        premise = render_premise(chain)[1]
        cfg = AcboConfig(eta=0.0, votes_m=1, explore_eps=0.0, stop_rule='entropy-threshold')
        oracle = SimulatedOracle(fork, OracleConfig(eta=0.0, votes_m=1))
        result = run(premise, [chain, fork], oracle, cfg)
        assert result.converged
        assert result.stop_rule is StopRule.ENTROPY_THRESHOLD
        assert result.map_graph == fork

    def test_stalled_carries_trajectory(self):
        a = Dag.from_named_edges(ABC, [('A', 'B'), ('B', 'C')])
        b = Dag.from_named_edges(ABC, [('A', 'B'), ('B', 'C'), ('A', 'C')])
        premise = render_premise(a)[1]
        oracle = SimulatedOracle(a, OracleConfig(eta=0.1, votes_m=1))
        with pytest.raises(StalledDiscriminationError) as exc:
            run(premise, [a, b], oracle, AcboConfig(explore_eps=0.0, votes_m=1))
        assert exc.value.trajectory == []

    def test_needs_two_hypotheses(self, chain):
        premise = render_premise(chain)[1]
        oracle = SimulatedOracle(chain, OracleConfig())
        with pytest.raises(DegenerateHypothesisSpaceError):
            run(premise, [chain], oracle, AcboConfig())

    def test_summary(self, chain, fork):
        premise = render_premise(chain)[1]
        cfg = AcboConfig(eta=0.0, votes_m=1, explore_eps=0.0)
        result = run(premise, [chain, fork], SimulatedOracle(chain, OracleConfig(eta=0.0, votes_m=1)), cfg)
        summary = result.summary('d3-000000', 5)
        assert summary['map_graph'] == chain.to_dict()
        assert summary['stop_rule'] == 'map-threshold'
        assert summary['seed'] == 5


class TestHypothesisGeneration:
    """Phase 1 candidate sets."""

    def test_exact_mode_returns_consistent_graphs(self, chain):
        premise = render_premise(chain)[1]
        hypotheses = generate_hypotheses(premise, 8, HypothesisMode.EXACT)
        assert len(hypotheses) == 3
        assert all(satisfies(g, premise) for g in hypotheses.graphs)
        assert not hypotheses.truth_forced

    def test_truth_forced(self):
        truth = Dag.from_named_edges(['A', 'B', 'C', 'D'], [('A', 'B'), ('B', 'C'), ('C', 'D')])
        premise = render_premise(truth)[1]
        hypotheses = generate_hypotheses(premise, 3, 'exact', include_truth=truth, rng_seed=2)
        assert len(hypotheses) == 3
        assert hypotheses.truth_forced
        assert hypotheses.graphs[hypotheses.truth_index] == truth
        assert len(set(hypotheses.graphs)) == 3

    def test_sampled_mode(self, chain):
        premise = render_premise(chain)[1]
        hypotheses = generate_hypotheses(premise, 3, 'sampled', rng_seed=1)
        assert 2 <= len(hypotheses) <= 3
        assert all(satisfies(g, premise) for g in hypotheses.graphs)

    def test_degenerate_space(self):
        collider = Dag.from_named_edges(ABC, [('A', 'C'), ('B', 'C')])
        premise = render_premise(collider)[1]
        with pytest.raises(DegenerateHypothesisSpaceError) as exc:
            generate_hypotheses(premise, 4)
        assert exc.value.graphs == [collider]


class TestTheoreticalRounds:
    """Sufficient round count and success floor."""

    def test_sixteen_hypotheses(self):
        rounds, floor = theoretical_rounds(16, 0.1)
        assert rounds == 2
        assert floor == pytest.approx(0.84)

    def test_two_hypotheses(self):
        assert theoretical_rounds(2, 0.1) == (1, pytest.approx(0.8))

    def test_invalid_eta(self):
        with pytest.raises(InputError):
            theoretical_rounds(4, 0.0)
