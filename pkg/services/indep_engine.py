"""
Conditional-independence engine.

Decides d-separation, enumerates the CI statements a DAG implies, compares
Markov equivalence classes and finds the DAGs consistent with a premise.
A hypothesis is entailed by a premise when it holds in every consistent DAG.
"""

import itertools
import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from cachetools import LRUCache, cached

from .dag_core import (
    ENUMERATION_CAP,
    Dag,
    RelationTemplate,
    SeedLike,
    bits,
    enumerate_dags,
    relation_holds,
    variable_names,
)
from .errors import CapacityError, InputError, UnsatisfiablePremiseError

logger = logging.getLogger(__name__)
_CACHE_LOCK = threading.RLock()

# Sampled consistency search
SAMPLED_RESTARTS = 200       # restarts per requested DAG
SAMPLED_PATIENCE = 50        # consecutive restarts without a new DAG before giving up
REPAIR_STEPS_PER_VAR = 4


class SearchMode(str, Enum):
    EXACT = 'exact'
    SAMPLED = 'sampled'


@dataclass(frozen=True)
class CiStatement:
    """
    x _||_ y | cond (independent=True) or its negation.

    The pair is stored in canonical order x < y.
    """
    x: int
    y: int
    cond: frozenset = field(default_factory=frozenset)
    independent: bool = True

    def __post_init__(self):
        cond = frozenset(int(c) for c in self.cond)
        if self.x == self.y:
            raise InputError(f"CI statement needs two distinct variables, got {self.x}")
        if self.x in cond or self.y in cond:
            raise InputError("A CI statement cannot condition on one of its own variables")
        x, y = sorted((int(self.x), int(self.y)))
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'cond', cond)

    @property
    def key(self) -> tuple:
        return self.x, self.y, tuple(sorted(self.cond))

    @property
    def is_marginal(self) -> bool:
        return not self.cond


@dataclass(frozen=True)
class PremiseSet:
    """The premise P: a set of CI statements over named variables."""
    num_vars: int
    statements: tuple
    names: tuple = ()

    def __post_init__(self):
        if not self.names:
            object.__setattr__(self, 'names', tuple(variable_names(self.num_vars)))
        if len(self.names) != self.num_vars:
            raise InputError(f"Premise over {self.num_vars} variables lists {len(self.names)} names")
        object.__setattr__(self, 'statements', tuple(self.statements))
        seen = set()
        for s in self.statements:
            if s.y >= self.num_vars or any(c >= self.num_vars for c in s.cond):
                raise InputError(f"Statement {s.key} references a variable outside d={self.num_vars}")
            if s.key in seen:
                raise InputError(f"Duplicate statement for {s.key}")
            seen.add(s.key)

    def __len__(self) -> int:
        return len(self.statements)

    def with_statement(self, statement: CiStatement) -> 'PremiseSet':
        return PremiseSet(self.num_vars, self.statements + (statement,), self.names)


@dataclass(frozen=True)
class Hypothesis:
    template: RelationTemplate
    a: int
    b: int

    def __post_init__(self):
        object.__setattr__(self, 'template', RelationTemplate.coerce(self.template))
        if self.a == self.b:
            raise InputError("A hypothesis relates two distinct variables")

    def holds_in(self, g: Dag) -> bool:
        return relation_holds(g, self.template, self.a, self.b)


@dataclass(frozen=True)
class MecDescriptor:
    """Skeleton plus v-structures: the identity of a Markov equivalence class."""
    skeleton: frozenset
    v_structures: frozenset


def _mask(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


def _check_query(g: Dag, x: int, y: int, cond) -> int:
    d = g.num_vars
    for v in (x, y, *cond):
        if not 0 <= v < d:
            raise InputError(f"Variable index {v} out of range for d={d}")
    if x == y:
        raise InputError("d-separation needs two distinct variables")
    cond_mask = _mask(cond)
    if cond_mask >> x & 1 or cond_mask >> y & 1:
        raise InputError("The conditioning set cannot contain x or y")
    return cond_mask


def _moral_neighbors(g: Dag, keep: int) -> list[int]:
    """Undirected neighbor masks of the moral graph of the ancestral set keep."""
    nbr = [0] * g.num_vars
    for v in bits(keep):
        pa = g.parents[v]
        nbr[v] |= pa
        for p in bits(pa):
            nbr[p] |= (1 << v) | (pa & ~(1 << p))
    return nbr


def _connected(nbr: list[int], x: int, y: int, blocked: int) -> bool:
    seen = frontier = 1 << x
    while frontier:
        reach = 0
        for v in bits(frontier):
            reach |= nbr[v]
        frontier = reach & ~seen & ~blocked
        if frontier >> y & 1:
            return True
        seen |= frontier
    return False


def d_separated(g: Dag, x: int, y: int, cond: Iterable[int] = ()) -> bool:
    """
    True iff cond d-separates x and y in g.

    Uses the moralized ancestral graph: x and y are d-separated by Z exactly
    when Z separates them in the moral graph of An({x, y} u Z).
    """
    cond = tuple(cond)
    cond_mask = _check_query(g, x, y, cond)
    if not cond_mask:
        return not g.ancestral_closure(1 << x) & g.ancestral_closure(1 << y)
    keep = g.ancestral_closure((1 << x) | (1 << y) | cond_mask)
    return not _connected(_moral_neighbors(g, keep), x, y, cond_mask)


def d_separated_by_paths(g: Dag, x: int, y: int, cond: Iterable[int] = ()) -> bool:
    """
    Reference implementation: enumerate every simple path and test blocking.

    Exponential in d; used to cross-check d_separated.
    """
    cond = tuple(cond)
    cond_mask = _check_query(g, x, y, cond)
    undirected = [g.children[v] | g.parents[v] for v in range(g.num_vars)]

    def is_open(path: list[int]) -> bool:
        for k in range(1, len(path) - 1):
            prev, node, nxt = path[k - 1], path[k], path[k + 1]
            collider = g.has_edge(prev, node) and g.has_edge(nxt, node)
            if collider:
                if not (cond_mask >> node & 1 or g.descendant_masks[node] & cond_mask):
                    return False
            elif cond_mask >> node & 1:
                return False
        return True

    stack = [(x, [x], 1 << x)]
    while stack:
        node, path, visited = stack.pop()
        for nxt in bits(undirected[node] & ~visited):
            extended = path + [nxt]
            if nxt == y:
                if is_open(extended):
                    return False
            else:
                stack.append((nxt, extended, visited | (1 << nxt)))
    return True


def statement_holds(g: Dag, s: CiStatement) -> bool:
    return d_separated(g, s.x, s.y, s.cond) == s.independent


def satisfies(g: Dag, p: PremiseSet) -> bool:
    """True iff every statement of p matches g."""
    return all(statement_holds(g, s) for s in p.statements)


def all_ci_statements(g: Dag, max_cond: int) -> list[CiStatement]:
    """
    Every CI statement of g with conditioning sets up to max_cond.

    Ordered pair-major, then by subset size, then lexicographically.
    """
    d = g.num_vars
    if max_cond < 0 or max_cond > max(d - 2, 0):
        raise InputError(f"max_cond must lie in [0, {max(d - 2, 0)}], got {max_cond}")
    statements = []
    for x, y in itertools.combinations(range(d), 2):
        others = [v for v in range(d) if v not in (x, y)]
        for size in range(max_cond + 1):
            for cond in itertools.combinations(others, size):
                statements.append(CiStatement(x, y, frozenset(cond), d_separated(g, x, y, cond)))
    return statements


def ci_signature(g: Dag) -> tuple[bool, ...]:
    """Independence bits of the full CI statement set of g."""
    return tuple(s.independent for s in all_ci_statements(g, max(g.num_vars - 2, 0)))


def mec_descriptor(g: Dag) -> MecDescriptor:
    d = g.num_vars
    skeleton = frozenset(tuple(sorted(edge)) for edge in g.edges())
    adjacent = [g.children[v] | g.parents[v] for v in range(d)]
    v_structures = set()
    for c in range(d):
        for a, b in itertools.combinations(list(bits(g.parents[c])), 2):
            if not adjacent[a] >> b & 1:
                v_structures.add((a, c, b))
    return MecDescriptor(skeleton, frozenset(v_structures))


def markov_equivalent(g1: Dag, g2: Dag) -> bool:
    if g1.names != g2.names:
        raise InputError("Markov equivalence needs both graphs over the same variables")
    return mec_descriptor(g1) == mec_descriptor(g2)


@cached(LRUCache(maxsize=8), lock=_CACHE_LOCK)
def _ancestor_table(d: int) -> np.ndarray:
    """Inclusive ancestor masks of every enumerated DAG, one row per DAG."""
    dags = list(enumerate_dags(d))
    table = np.zeros((len(dags), d), dtype=np.int64)
    for k, g in enumerate(dags):
        table[k] = [m | (1 << v) for v, m in enumerate(g.ancestor_masks)]
    return table


@cached(LRUCache(maxsize=128), lock=_CACHE_LOCK)
def _exact_consistent(p: PremiseSet) -> tuple[Dag, ...]:
    d = p.num_vars
    dags = list(enumerate_dags(d))
    table = _ancestor_table(d)
    alive = np.ones(len(dags), dtype=bool)
    conditional = []
    for s in p.statements:
        if s.is_marginal:
            dependent = (table[:, s.x] & table[:, s.y]) != 0
            alive &= dependent != s.independent
        else:
            conditional.append(s)
    survivors = []
    for k in np.flatnonzero(alive):
        g = dags[k]
        if all(statement_holds(g, s) for s in conditional):
            survivors.append(g if g.names == p.names else Dag(p.names, g.children))
    return tuple(survivors)


def _violations(g: Dag, p: PremiseSet, limit: Optional[int] = None) -> list[CiStatement]:
    found = []
    for s in p.statements:
        if not statement_holds(g, s):
            found.append(s)
            if limit is not None and len(found) >= limit:
                break
    return found


def _repair(p: PremiseSet, rows: list[int], order: np.ndarray,
            rng: np.random.Generator) -> Optional[Dag]:
    """
    Greedy edge toggling along a fixed topological order.

    Every toggled edge points forward in `order`, so the graph stays acyclic.
    A move is accepted as soon as it lowers the number of violated statements.
    """
    position = np.empty(p.num_vars, dtype=int)
    position[order] = np.arange(p.num_vars)
    g = Dag(p.names, tuple(rows))
    violated = _violations(g, p)
    for _ in range(REPAIR_STEPS_PER_VAR * p.num_vars):
        if not violated:
            return g
        target = violated[rng.integers(len(violated))]
        focus = {target.x, target.y, *target.cond}
        moves = [
            (u, v) for u in range(p.num_vars) for v in range(p.num_vars)
            if position[u] < position[v] and (u in focus or v in focus)
        ]
        rng.shuffle(moves)
        for u, v in moves:
            trial = list(g.children)
            trial[u] ^= 1 << v
            candidate = Dag(p.names, tuple(trial))
            remaining = _violations(candidate, p, limit=len(violated))
            if len(remaining) < len(violated):
                g, violated = candidate, _violations(candidate, p)
                break
        else:
            return None
    return g if not violated else None


def _sampled_consistent(p: PremiseSet, budget: int, rng_seed: SeedLike,
                        witnesses: Sequence[Dag]) -> list[Dag]:
    rng = np.random.default_rng(rng_seed)
    found: dict[Dag, None] = {}
    for w in witnesses:
        if satisfies(w, p):
            found.setdefault(w)
    separated = {(s.x, s.y) for s in p.statements if s.independent}
    attempts = idle = 0
    while len(found) < budget and attempts < budget * SAMPLED_RESTARTS and idle < SAMPLED_PATIENCE:
        attempts += 1
        order = rng.permutation(p.num_vars)
        rows = [0] * p.num_vars
        for a in range(p.num_vars):
            for b in range(a + 1, p.num_vars):
                u, v = int(order[a]), int(order[b])
                if (min(u, v), max(u, v)) not in separated:
                    rows[u] |= 1 << v
        g = _repair(p, rows, order, rng)
        if g is None or g in found:
            idle += 1
            continue
        idle = 0
        found[g] = None
    logger.debug(f"Sampled search found {len(found)} consistent DAGs in {attempts} restarts")
    return list(found)[:budget]


def consistent_dags(p: PremiseSet, mode: Union[str, SearchMode] = SearchMode.EXACT,
                    budget: int = 8, rng_seed: SeedLike = 0,
                    witnesses: Sequence[Dag] = ()) -> list[Dag]:
    """
    DAGs that reproduce every statement of p.

    Args:
        p: Premise
        mode: 'exact' enumerates all DAGs (d <= cap); 'sampled' runs a
              randomized search and may miss members
        budget: Maximum number of DAGs returned in sampled mode
        rng_seed: Seed for sampled mode
        witnesses: Known consistent graphs seeded into the sampled result

    Returns:
        List of consistent DAGs, empty when the premise is unsatisfiable
        (or when sampled search finds nothing)
    """
    mode = SearchMode(mode)
    if mode is SearchMode.EXACT:
        if p.num_vars > ENUMERATION_CAP:
            raise CapacityError(
                f"Exact consistency search is capped at d={ENUMERATION_CAP}; use sampled mode for d={p.num_vars}"
            )
        return list(_exact_consistent(p))
    return _sampled_consistent(p, budget, rng_seed, witnesses)


def entails(p: PremiseSet, h: Hypothesis, mode: Union[str, SearchMode] = SearchMode.EXACT,
            budget: int = 8, rng_seed: SeedLike = 0, witnesses: Sequence[Dag] = ()) -> int:
    """
    1 iff h holds in every DAG consistent with p.

    Raises:
        UnsatisfiablePremiseError: If no consistent DAG exists (label undefined)
    """
    dags = consistent_dags(p, mode, budget, rng_seed, witnesses)
    if not dags:
        raise UnsatisfiablePremiseError("No DAG is consistent with the premise; entailment is undefined")
    return int(all(h.holds_in(g) for g in dags))


def minimal_separator(g: Dag, x: int, y: int, max_size: int) -> Optional[tuple[int, ...]]:
    """
    Smallest set (size <= max_size) that d-separates x and y, or None.

    Minimal separators lie inside An({x, y}); for such sets the moral graph
    of the ancestral set does not change, so it is built once. Every common
    moral neighbour of x and y must belong to any separator.
    """
    if g.has_edge(x, y) or g.has_edge(y, x):
        return None
    if d_separated(g, x, y):
        return ()
    keep = g.ancestral_closure((1 << x) | (1 << y))
    nbr = _moral_neighbors(g, keep)
    if nbr[x] >> y & 1:
        return None
    required = nbr[x] & nbr[y]
    required_nodes = list(bits(required))
    if len(required_nodes) > max_size:
        return None
    optional = list(bits(keep & ~required & ~(1 << x) & ~(1 << y)))
    for extra in range(max_size - len(required_nodes) + 1):
        candidates = sorted(
            tuple(sorted(required_nodes + list(combo)))
            for combo in itertools.combinations(optional, extra)
        )
        for cond in candidates:
            if not _connected(nbr, x, y, _mask(cond)):
                return cond
    return None
