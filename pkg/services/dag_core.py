"""
Causal DAGs and their interventional semantics.

A Dag is an immutable labeled directed acyclic graph. Each row of the
adjacency is stored as an integer bitmask (bit j of children[i] set means
V_i -> V_j), so reachability is computed a whole row at a time.

Interventions are graph mutilations: do(V_i = v) removes every edge into V_i.
The value v is never stored, because under faithfulness whether V_j responds
to do(V_i) only depends on whether a directed path V_i ~> V_j exists.
"""

import itertools
import json
import logging
import threading
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterator, Optional, Sequence, Union

import numpy as np
from cachetools import LRUCache, cached

from .errors import CapacityError, InputError, StructuralIntegrityError

logger = logging.getLogger(__name__)
_CACHE_LOCK = threading.RLock()

# Exhaustive enumeration limits (29,281 DAGs at d=5, 3,781,503 at d=6)
ENUMERATION_CAP = 5
EXTENDED_ENUMERATION_CAP = 6

SeedLike = Union[int, np.random.Generator, None]


def bits(mask: int) -> Iterator[int]:
    """Yield the indices of the set bits of mask, lowest first."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def submasks(mask: int) -> Iterator[int]:
    """Yield the non-empty submasks of mask in increasing order."""
    sub = 0
    while True:
        sub = (sub - mask) & mask
        if sub == 0:
            return
        yield sub


def variable_names(d: int) -> list[str]:
    """Default variable labels: A..Z, then A1..Z1, A2.. and so on."""
    letters = [chr(ord('A') + k) for k in range(26)]
    names = []
    for k in range(d):
        suffix = '' if k < 26 else str(k // 26)
        names.append(letters[k % 26] + suffix)
    return names


class RelationTemplate(str, Enum):
    """The six causal relation templates of the benchmark."""
    PARENT = 'parent'
    CHILD = 'child'
    ANCESTOR = 'ancestor'
    DESCENDANT = 'descendant'
    COLLIDER = 'collider'
    CONFOUNDER = 'confounder'

    @classmethod
    def coerce(cls, value: Union[str, 'RelationTemplate']) -> 'RelationTemplate':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InputError(f"Unknown relation template: {value!r}")


@dataclass(frozen=True, order=True)
class VarPair:
    """Ordered variable pair (V_i, V_j): intervene on source, observe sink."""
    source: int
    sink: int

    def __post_init__(self):
        if self.source == self.sink:
            raise InputError(f"VarPair needs two distinct variables, got ({self.source}, {self.sink})")

    def to_list(self) -> list[int]:
        return [self.source, self.sink]


@dataclass(frozen=True)
class Intervention:
    """do(V_target = v); the value is not modelled."""
    target: int


@dataclass(frozen=True)
class Dag:
    """
    Directed acyclic graph over d named variables.

    Attributes:
        names: Variable labels, unique, in index order
        children: children[i] is the bitmask of j such that V_i -> V_j
    """
    names: tuple[str, ...]
    children: tuple[int, ...]

    def __post_init__(self):
        d = len(self.names)
        if d < 1:
            raise InputError("A DAG needs at least one variable")
        if len(set(self.names)) != d:
            raise InputError(f"Variable names must be unique: {list(self.names)}")
        if len(self.children) != d:
            raise InputError(f"Expected {d} adjacency rows, got {len(self.children)}")
        full = (1 << d) - 1
        for i, row in enumerate(self.children):
            if row < 0 or row & ~full:
                raise InputError(f"Adjacency row {i} references unknown variables")
            if row >> i & 1:
                raise StructuralIntegrityError(f"Self-edge on {self.names[i]}")
        topological_order(self)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_edges(cls, names: Sequence[str], edges) -> 'Dag':
        """Build a DAG from (src, dst) index pairs."""
        rows = [0] * len(names)
        for src, dst in edges:
            if not (0 <= src < len(names) and 0 <= dst < len(names)):
                raise InputError(f"Edge ({src}, {dst}) out of range for d={len(names)}")
            rows[src] |= 1 << dst
        return cls(tuple(names), tuple(rows))

    @classmethod
    def from_named_edges(cls, names: Sequence[str], edges) -> 'Dag':
        """Build a DAG from (src_name, dst_name) pairs."""
        index = {name: k for k, name in enumerate(names)}
        try:
            return cls.from_edges(names, [(index[a], index[b]) for a, b in edges])
        except KeyError as e:
            raise InputError(f"Unknown variable in edge list: {e}")

    @classmethod
    def from_parent_masks(cls, names: Sequence[str], parents: Sequence[int]) -> 'Dag':
        rows = [0] * len(names)
        for child, mask in enumerate(parents):
            for parent in bits(mask):
                rows[parent] |= 1 << child
        return cls(tuple(names), tuple(rows))

    @classmethod
    def from_adjacency(cls, names: Sequence[str], matrix) -> 'Dag':
        matrix = np.asarray(matrix, dtype=bool)
        return cls.from_edges(names, [(int(i), int(j)) for i, j in zip(*np.nonzero(matrix))])

    @classmethod
    def empty(cls, names: Sequence[str]) -> 'Dag':
        return cls(tuple(names), (0,) * len(names))

    # -- structure ----------------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @cached_property
    def parents(self) -> tuple[int, ...]:
        rows = [0] * self.num_vars
        for src, row in enumerate(self.children):
            for dst in bits(row):
                rows[dst] |= 1 << src
        return tuple(rows)

    @cached_property
    def descendant_masks(self) -> tuple[int, ...]:
        """descendant_masks[i]: every j != i reachable from i by a directed path."""
        masks = [0] * self.num_vars
        for v in reversed(topological_order(self)):
            acc = 0
            for c in bits(self.children[v]):
                acc |= (1 << c) | masks[c]
            masks[v] = acc
        return tuple(masks)

    @cached_property
    def ancestor_masks(self) -> tuple[int, ...]:
        masks = [0] * self.num_vars
        for v in topological_order(self):
            acc = 0
            for p in bits(self.parents[v]):
                acc |= (1 << p) | masks[p]
            masks[v] = acc
        return tuple(masks)

    def ancestral_closure(self, mask: int) -> int:
        """The given nodes together with all their ancestors."""
        closure = mask
        for v in bits(mask):
            closure |= self.ancestor_masks[v]
        return closure

    def has_edge(self, src: int, dst: int) -> bool:
        return bool(self.children[src] >> dst & 1)

    def edges(self) -> list[tuple[int, int]]:
        return [(src, dst) for src in range(self.num_vars) for dst in bits(self.children[src])]

    @property
    def num_edges(self) -> int:
        return sum(bin(row).count('1') for row in self.children)

    def adjacency(self) -> np.ndarray:
        matrix = np.zeros((self.num_vars, self.num_vars), dtype=bool)
        for src, dst in self.edges():
            matrix[src, dst] = True
        return matrix

    @cached_property
    def reach_matrix(self) -> np.ndarray:
        """r_hat for every ordered pair: entry (i, j) is 1 iff V_j responds to do(V_i)."""
        matrix = np.zeros((self.num_vars, self.num_vars), dtype=bool)
        for i, mask in enumerate(self.descendant_masks):
            matrix[i, list(bits(mask))] = True
        matrix.flags.writeable = False
        return matrix

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"Unknown variable {name!r}")

    def describe(self) -> str:
        arrows = [f"{self.names[s]}->{self.names[t]}" for s, t in self.edges()]
        return ', '.join(arrows) if arrows else '(no edges)'

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            'd': self.num_vars,
            'names': list(self.names),
            'edges': [[s, t] for s, t in sorted(self.edges())]
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'Dag':
        try:
            names = list(data['names'])
            if int(data['d']) != len(names):
                raise InputError(f"Graph declares d={data['d']} but lists {len(names)} names")
            return cls.from_edges(names, [tuple(edge) for edge in data['edges']])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"Malformed graph record: {e}")

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> 'Dag':
        return cls.from_dict(json.loads(text))


def _order_from_parents(parents: Sequence[int]) -> Optional[list[int]]:
    """Lowest-index-first Kahn order, or None when the graph has a cycle."""
    remaining = (1 << len(parents)) - 1
    order = []
    while remaining:
        for v in bits(remaining):
            if parents[v] & remaining == 0:
                break
        else:
            return None
        order.append(v)
        remaining &= ~(1 << v)
    return order


def topological_order(g: Dag) -> list[int]:
    """
    Topological order of g, breaking ties by lowest index.

    Raises:
        StructuralIntegrityError: If g contains a cycle
    """
    order = _order_from_parents(g.parents)
    if order is None:
        raise StructuralIntegrityError(f"Graph over {list(g.names)} contains a cycle")
    return order


def descendants(g: Dag, i: int) -> set[int]:
    _check_index(g, i)
    return set(bits(g.descendant_masks[i]))


def ancestors(g: Dag, i: int) -> set[int]:
    _check_index(g, i)
    return set(bits(g.ancestor_masks[i]))


def mutilate(g: Dag, iv: Intervention) -> Dag:
    """Remove every edge into iv.target."""
    _check_index(g, iv.target)
    keep = ~(1 << iv.target)
    return Dag(g.names, tuple(row & keep for row in g.children))


def r_hat(g: Dag, pair: VarPair) -> int:
    """
    Predicted response of V_sink to do(V_source).

    Mutilation only removes edges into the source, so the source's
    descendants are the same before and after; the lookup uses g directly.
    """
    _check_index(g, pair.source)
    _check_index(g, pair.sink)
    return g.descendant_masks[pair.source] >> pair.sink & 1


def all_pairs(d: int) -> list[VarPair]:
    """Every ordered pair of distinct variables in lexicographic order."""
    return [VarPair(i, j) for i in range(d) for j in range(d) if i != j]


def discrimination_set(g_plus: Dag, g_minus: Dag) -> set[VarPair]:
    """Ordered pairs on which the two graphs predict different responses."""
    if g_plus.names != g_minus.names:
        raise InputError("Discrimination set needs both graphs over the same variables")
    differ = g_plus.reach_matrix != g_minus.reach_matrix
    return {VarPair(int(i), int(j)) for i, j in zip(*np.nonzero(differ))}


@cached(LRUCache(maxsize=64), lock=_CACHE_LOCK)
def _parent_tables(vertices: int, d: int) -> tuple[tuple[int, ...], ...]:
    """
    Parent-mask tables of every DAG on the vertex set `vertices`.

    Each DAG has a unique non-empty set of sources S. The rest is a DAG H on
    V minus S, and every source of H must receive at least one edge from S,
    so each labeled DAG is produced exactly once.
    """
    if vertices == 0:
        return ((0,) * d,)
    tables = []
    for sources in submasks(vertices):
        rest = vertices & ~sources
        rest_nodes = list(bits(rest))
        from_sources = list(submasks(sources))
        any_from_sources = [0] + from_sources
        for base in _parent_tables(rest, d):
            options = [from_sources if base[v] == 0 else any_from_sources for v in rest_nodes]
            for choice in itertools.product(*options):
                parents = list(base)
                for v, extra in zip(rest_nodes, choice):
                    parents[v] |= extra
                tables.append(tuple(parents))
    return tuple(tables)


@cached(LRUCache(maxsize=8), lock=_CACHE_LOCK)
def _all_dags(d: int) -> tuple[Dag, ...]:
    names = tuple(variable_names(d))
    dags = tuple(Dag.from_parent_masks(names, table) for table in _parent_tables((1 << d) - 1, d))
    logger.info(f"Enumerated {len(dags)} DAGs on {d} variables")
    return dags


def enumerate_dags(d: int, names: Optional[Sequence[str]] = None,
                   allow_extended: bool = False) -> Iterator[Dag]:
    """
    Yield every labeled DAG on d nodes exactly once.

    Args:
        d: Number of variables
        names: Optional labels (defaults to A, B, C, ...)
        allow_extended: Permit d = 6 (3.8M graphs)

    Raises:
        CapacityError: If d exceeds the enumeration cap
    """
    cap = EXTENDED_ENUMERATION_CAP if allow_extended else ENUMERATION_CAP
    if d < 1:
        raise InputError(f"Cannot enumerate DAGs on {d} variables")
    if d > cap:
        raise CapacityError(
            f"Exhaustive enumeration is capped at d={cap} (requested d={d}); use sampled mode instead"
        )
    if names is None or tuple(names) == tuple(variable_names(d)):
        yield from _all_dags(d)
        return
    for dag in _all_dags(d):
        yield Dag(tuple(names), dag.children)


def random_dag(d: int, edge_prob: float, rng_seed: SeedLike = None,
               names: Optional[Sequence[str]] = None) -> Dag:
    """
    Sample a DAG: uniform random topological order, then each forward edge
    independently with probability edge_prob.
    """
    if not 0.0 <= edge_prob <= 1.0:
        raise InputError(f"edge_prob must lie in [0, 1], got {edge_prob}")
    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(d)
    draws = rng.random(d * (d - 1) // 2)
    rows = [0] * d
    k = 0
    for a in range(d):
        for b in range(a + 1, d):
            if draws[k] < edge_prob:
                rows[order[a]] |= 1 << int(order[b])
            k += 1
    return Dag(tuple(names or variable_names(d)), tuple(rows))


def relation_holds(g: Dag, template: Union[str, RelationTemplate], a: int, b: int) -> bool:
    """
    Evaluate one of the six relation templates on g.

    Ancestor and Descendant are the non-parent / non-child variants, so a
    direct edge never counts as an ancestor relation.
    """
    template = RelationTemplate.coerce(template)
    _check_index(g, a)
    _check_index(g, b)
    if a == b:
        raise InputError("Relation templates need two distinct variables")
    if template is RelationTemplate.PARENT:
        return g.has_edge(a, b)
    if template is RelationTemplate.CHILD:
        return g.has_edge(b, a)
    if template is RelationTemplate.ANCESTOR:
        return bool(g.descendant_masks[a] >> b & 1) and not g.has_edge(a, b)
    if template is RelationTemplate.DESCENDANT:
        return bool(g.descendant_masks[b] >> a & 1) and not g.has_edge(b, a)
    if template is RelationTemplate.COLLIDER:
        return bool(g.children[a] & g.children[b])
    return bool(g.parents[a] & g.parents[b])


def _check_index(g: Dag, i: int) -> None:
    if not 0 <= i < g.num_vars:
        raise InputError(f"Variable index {i} out of range for d={g.num_vars}")
