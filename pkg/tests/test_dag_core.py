"""
Tests for DAG primitives, enumeration and relation templates.
"""

import math

import numpy as np
import pytest

from services.dag_core import (
    Dag,
    Intervention,
    RelationTemplate,
    VarPair,
    all_pairs,
    ancestors,
    descendants,
    discrimination_set,
    enumerate_dags,
    mutilate,
    r_hat,
    random_dag,
    relation_holds,
    topological_order,
    variable_names,
)
from services.errors import CapacityError, InputError, StructuralIntegrityError
from services.indep_engine import mec_descriptor


@pytest.fixture
def chain():
    """A -> B -> C"""
    return Dag.from_named_edges(['A', 'B', 'C'], [('A', 'B'), ('B', 'C')])


@pytest.fixture
def fork():
    """A <- B -> C"""
    return Dag.from_named_edges(['A', 'B', 'C'], [('B', 'A'), ('B', 'C')])


@pytest.fixture
def collider():
    """A -> C <- B"""
    return Dag.from_named_edges(['A', 'B', 'C'], [('A', 'C'), ('B', 'C')])


class TestEnumeration:
    """Labeled DAG counts follow OEIS A003024."""

    @pytest.mark.parametrize('d,expected', [(1, 1), (2, 3), (3, 25), (4, 543)])
    def test_counts_small(self, d, expected):
        dags = list(enumerate_dags(d))
        assert len(dags) == expected
        assert len(set(dags)) == expected

    def test_count_five(self):
        assert sum(1 for _ in enumerate_dags(5)) == 29281

    def test_cap_enforced(self):
        with pytest.raises(CapacityError):
            list(enumerate_dags(6))

    def test_custom_names(self):
        dags = list(enumerate_dags(2, names=['X', 'Y']))
        assert all(g.names == ('X', 'Y') for g in dags)
        assert len(dags) == 3

    def test_zero_variables_rejected(self):
        with pytest.raises(InputError):
            list(enumerate_dags(0))


class TestDagStructure:
    """Construction, validation and reachability."""

    def test_cycle_rejected(self):
        with pytest.raises(StructuralIntegrityError):
            Dag.from_edges(['A', 'B'], [(0, 1), (1, 0)])

    def test_self_edge_rejected(self):
        with pytest.raises(StructuralIntegrityError):
            Dag.from_edges(['A'], [(0, 0)])

    def test_duplicate_names_rejected(self):
        with pytest.raises(InputError):
            Dag.empty(['A', 'A'])

    def test_unknown_named_edge(self):
        with pytest.raises(InputError):
            Dag.from_named_edges(['A', 'B'], [('A', 'Z')])

    def test_descendants_and_ancestors(self, chain):
        assert descendants(chain, 0) == {1, 2}
        assert ancestors(chain, 2) == {0, 1}
        assert descendants(chain, 2) == set()

    def test_topological_order_lowest_index_first(self):
        assert topological_order(Dag.empty(['A', 'B', 'C'])) == [0, 1, 2]
        g = Dag.from_edges(['A', 'B', 'C'], [(2, 0)])
        assert topological_order(g) == [1, 2, 0]

    def test_reach_matrix_read_only(self, chain):
        assert chain.reach_matrix.tolist() == [
            [False, True, True],
            [False, False, True],
            [False, False, False],
        ]
        with pytest.raises(ValueError):
            chain.reach_matrix[0, 0] = True

    def test_adjacency_round_trip(self, fork):
        assert Dag.from_adjacency(fork.names, fork.adjacency()) == fork

    def test_dict_round_trip(self, fork):
        assert Dag.from_dict(fork.to_dict()) == fork
        assert Dag.from_json(fork.to_json()) == fork

    def test_dict_with_wrong_d(self):
        with pytest.raises(InputError):
            Dag.from_dict({'d': 3, 'names': ['A', 'B'], 'edges': []})

    def test_describe(self, chain):
        assert chain.describe() == 'A->B, B->C'
        assert Dag.empty(['A']).describe() == '(no edges)'

    def test_variable_names_wrap(self):
        names = variable_names(28)
        assert names[:3] == ['A', 'B', 'C']
        assert names[25] == 'Z'
        assert names[26] == 'A1'
        assert len(set(names)) == 28


class TestInterventions:
    """Mutilation and predicted responses."""

    def test_mutilate_removes_incoming_edges(self, chain):
        cut = mutilate(chain, Intervention(1))
        assert not cut.has_edge(0, 1)
        assert cut.has_edge(1, 2)

    def test_r_hat(self, chain):
        assert r_hat(chain, VarPair(0, 2)) == 1
        assert r_hat(chain, VarPair(2, 0)) == 0
        assert r_hat(chain, VarPair(1, 2)) == 1

    def test_r_hat_unchanged_by_mutilation(self, fork):
        for pair in all_pairs(3):
            assert r_hat(fork, pair) == r_hat(mutilate(fork, Intervention(pair.source)), pair)

    def test_pair_needs_distinct_variables(self):
        with pytest.raises(InputError):
            VarPair(1, 1)

    def test_all_pairs_order(self):
        assert all_pairs(3) == [VarPair(0, 1), VarPair(0, 2), VarPair(1, 0),
                                VarPair(1, 2), VarPair(2, 0), VarPair(2, 1)]

    def test_mutilate_idempotent(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            g = random_dag(int(rng.integers(2, 9)), float(rng.uniform(0.2, 0.8)), rng)
            for v in range(g.num_vars):
                once = mutilate(g, Intervention(v))
                assert mutilate(once, Intervention(v)) == once
                assert not once.parents[v]

    def test_discrimination_set_symmetric_and_empty_only_for_equal_responses(self):
        dags = list(enumerate_dags(3))
        for g in dags:
            for h in dags:
                forward = discrimination_set(g, h)
                assert forward == discrimination_set(h, g)
                assert (not forward) == np.array_equal(g.reach_matrix, h.reach_matrix)

    @pytest.mark.parametrize('d', [3, 4])
    def test_markov_equivalent_members_are_discriminable(self, d):
        classes = {}
        for g in enumerate_dags(d):
            classes.setdefault(mec_descriptor(g), []).append(g)
        assert any(len(members) > 1 for members in classes.values())
        for members in classes.values():
            for k, g in enumerate(members):
                for h in members[k + 1:]:
                    assert discrimination_set(g, h), f"{g.describe()} vs {h.describe()}"

    def test_discrimination_set_chain_vs_fork(self, chain, fork):
        assert discrimination_set(chain, fork) == {VarPair(0, 1), VarPair(0, 2), VarPair(1, 0)}
        assert discrimination_set(chain, chain) == set()


class TestRelationTemplates:
    """The six hypothesis relations."""

    def test_parent_and_child(self, chain):
        assert relation_holds(chain, RelationTemplate.PARENT, 0, 1)
        assert not relation_holds(chain, RelationTemplate.PARENT, 0, 2)
        assert relation_holds(chain, RelationTemplate.CHILD, 1, 0)

    def test_ancestor_excludes_direct_edge(self, chain):
        assert relation_holds(chain, RelationTemplate.ANCESTOR, 0, 2)
        assert not relation_holds(chain, RelationTemplate.ANCESTOR, 0, 1)

    def test_descendant_excludes_direct_edge(self, chain):
        assert relation_holds(chain, RelationTemplate.DESCENDANT, 2, 0)
        assert not relation_holds(chain, RelationTemplate.DESCENDANT, 1, 0)

    def test_collider(self, collider, fork):
        assert relation_holds(collider, 'collider', 0, 1)
        assert not relation_holds(fork, 'collider', 0, 2)

    def test_confounder(self, collider, fork):
        assert relation_holds(fork, 'confounder', 0, 2)
        assert not relation_holds(collider, 'confounder', 0, 1)

    def test_unknown_template(self, chain):
        with pytest.raises(InputError):
            relation_holds(chain, 'sibling', 0, 1)

    def test_same_variable_rejected(self, chain):
        with pytest.raises(InputError):
            relation_holds(chain, 'parent', 1, 1)


class TestRandomDag:
    """Seeded random DAG sampling."""

    def test_deterministic(self):
        assert random_dag(8, 0.5, 42) == random_dag(8, 0.5, 42)

    def test_complete_and_empty(self):
        assert random_dag(6, 1.0, 0).num_edges == 15
        assert random_dag(6, 0.0, 0).num_edges == 0

    def test_accepts_generator(self):
        rng = np.random.default_rng(3)
        g = random_dag(5, 0.5, rng)
        assert g.num_vars == 5

    def test_invalid_probability(self):
        with pytest.raises(InputError):
            random_dag(4, 1.5, 0)

    def test_edge_count_is_binomial(self):
        """Mean edge count over 10,000 draws at d=10, p=0.3 lies within 3 sigma of 45 * 0.3."""
        rng = np.random.default_rng(21)
        samples = 10000
        counts = np.array([random_dag(10, 0.3, rng).num_edges for _ in range(samples)])
        sigma = math.sqrt(45 * 0.3 * 0.7 / samples)
        assert abs(counts.mean() - 45 * 0.3) <= 3 * sigma
        assert counts.var() == pytest.approx(45 * 0.3 * 0.7, rel=0.1)
