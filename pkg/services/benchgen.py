"""
Benchmark generation for premise/hypothesis entailment instances.

Each instance draws a random DAG, renders its premise, pairs it with a
hypothesis from one of the six relation templates and labels it by
entailment: exact enumeration up to the cap, sampled search (flagged
approximate) above it. Instances serialize to JSONL, one per line.
"""

import csv
import io
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .dag_core import ENUMERATION_CAP, Dag, RelationTemplate, random_dag
from .errors import InputError, ParseError
from .indep_engine import Hypothesis, PremiseSet, SearchMode, entails
from .premise_text import CiPolicy, hypothesis_text, parse_hypothesis, parse_premise, render_premise

logger = logging.getLogger(__name__)

DENSE_EDGE_PROB = 0.9
DEFAULT_LABEL_BUDGET = 8
DEFAULT_DEV_N = 1000
DEFAULT_TEST_N = 1000
TEMPLATES = list(RelationTemplate)
WORD_PATTERN = re.compile(r"\w+")
RECORD_FIELDS = ('id', 'd', 'premise', 'hypothesis', 'relation_type', 'label',
                 'label_mode', 'split', 'graph', 'seed')


class LabelMode(str, Enum):
    EXACT = 'exact'
    APPROXIMATE = 'approximate'
    EXTERNAL = 'external'


class Split(str, Enum):
    TRAIN = 'train'
    DEV = 'dev'
    TEST = 'test'


class Density(str, Enum):
    DENSE = 'dense'
    SPARSE = 'sparse'


@dataclass
class GenerationPolicy:
    """
    How instances are drawn.

    Attributes:
        density: dense (edge probability 0.9) or sparse (min(0.5, 3 / (d - 1)))
        edge_prob: Explicit edge probability, overrides density
        ci_policy: Which independence statements the premise lists
        max_cond: Largest separating set of the minimal policy
        label_budget: DAGs collected per label in sampled mode
    """
    density: Density = Density.DENSE
    edge_prob: Optional[float] = None
    ci_policy: CiPolicy = CiPolicy.MINIMAL
    max_cond: int = 3
    label_budget: int = DEFAULT_LABEL_BUDGET

    def __post_init__(self):
        self.density = Density(self.density)
        self.ci_policy = CiPolicy(self.ci_policy)
        if self.edge_prob is not None and not 0.0 <= self.edge_prob <= 1.0:
            raise InputError(f"edge_prob must lie in [0, 1], got {self.edge_prob}")

    def edge_prob_for(self, d: int) -> float:
        if self.edge_prob is not None:
            return self.edge_prob
        if self.density is Density.SPARSE:
            return min(0.5, 3.0 / max(d - 1, 1))
        return DENSE_EDGE_PROB

    @classmethod
    def from_dict(cls, data: dict) -> 'GenerationPolicy':
        return cls(
            density=data.get('density', Density.DENSE),
            edge_prob=data.get('edge_prob'),
            ci_policy=data.get('ci_policy', CiPolicy.MINIMAL),
            max_cond=int(data.get('max_cond', 3)),
            label_budget=int(data.get('label_budget', DEFAULT_LABEL_BUDGET))
        )

    def to_dict(self) -> dict:
        return {
            'density': self.density.value,
            'edge_prob': self.edge_prob,
            'ci_policy': self.ci_policy.value,
            'max_cond': self.max_cond,
            'label_budget': self.label_budget
        }


@dataclass
class BenchInstance:
    id: str
    depth_d: int
    premise_text: str
    premise: PremiseSet
    hypothesis: Hypothesis
    hypothesis_text: str
    label: int
    label_mode: LabelMode
    graph: Optional[Dag] = None
    split: Optional[Split] = None
    seed: Optional[int] = None

    @property
    def template(self) -> RelationTemplate:
        return self.hypothesis.template

    def to_record(self) -> dict:
        return {
            'id': self.id,
            'd': self.depth_d,
            'premise': self.premise_text,
            'hypothesis': self.hypothesis_text,
            'relation_type': self.hypothesis.template.value,
            'label': self.label,
            'label_mode': LabelMode(self.label_mode).value,
            'split': Split(self.split).value if self.split is not None else None,
            'graph': self.graph.to_dict() if self.graph is not None else None,
            'seed': self.seed
        }

    @classmethod
    def from_record(cls, record: dict) -> 'BenchInstance':
        """
        Rebuild an instance from its JSONL record.

        Raises:
            ParseError: If a field is missing or inconsistent
        """
        missing = [f for f in RECORD_FIELDS if f not in record]
        if missing:
            raise ParseError(f"Record is missing fields {missing}")
        premise = parse_premise(record['premise'])
        hypothesis = parse_hypothesis(record['hypothesis'], premise.names)
        if hypothesis.template.value != record['relation_type']:
            raise ParseError(
                f"relation_type {record['relation_type']!r} disagrees with the hypothesis sentence"
            )
        graph = Dag.from_dict(record['graph']) if record['graph'] is not None else None
        if int(record['d']) != premise.num_vars:
            raise ParseError(f"Record declares d={record['d']} but the premise has {premise.num_vars} variables")
        try:
            return cls(
                id=str(record['id']),
                depth_d=int(record['d']),
                premise_text=record['premise'],
                premise=premise,
                hypothesis=hypothesis,
                hypothesis_text=record['hypothesis'],
                label=int(record['label']),
                label_mode=LabelMode(record['label_mode']),
                graph=graph,
                split=Split(record['split']) if record['split'] is not None else None,
                seed=record['seed']
            )
        except ValueError as e:
            raise ParseError(f"Invalid field value: {e}")


@dataclass
class ManifestRow:
    d: int
    n_samples: int
    n_train: int
    n_dev: int
    n_test: int
    mean_tokens_premise: float
    pct_positive: float
    vocab_size: int

    def to_dict(self) -> dict:
        return {
            'd': self.d,
            'n_samples': self.n_samples,
            'n_train': self.n_train,
            'n_dev': self.n_dev,
            'n_test': self.n_test,
            'mean_tokens_premise': round(self.mean_tokens_premise, 2),
            'pct_positive': round(self.pct_positive, 2),
            'vocab_size': self.vocab_size
        }


@dataclass
class DatasetManifest:
    rows: list[ManifestRow]

    def row(self, d: int) -> ManifestRow:
        for row in self.rows:
            if row.d == d:
                return row
        raise InputError(f"No manifest row for d={d}")

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=list(ManifestRow.__dataclass_fields__), lineterminator='\n')
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row.to_dict())
        return buffer.getvalue()


def derive_seed(master_seed: int, d: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, d, index]).generate_state(1)[0])


def draw_hypothesis(rng: np.random.Generator, d: int) -> Hypothesis:
    """Uniform template, uniform ordered pair of distinct variables."""
    template = TEMPLATES[int(rng.integers(len(TEMPLATES)))]
    a, b = (int(v) for v in rng.choice(d, size=2, replace=False))
    return Hypothesis(template, a, b)


def label_instance(premise: PremiseSet, hypothesis: Hypothesis, graph: Dag, seed: int,
                   policy: GenerationPolicy) -> tuple[int, LabelMode]:
    if premise.num_vars <= ENUMERATION_CAP:
        return entails(premise, hypothesis, SearchMode.EXACT), LabelMode.EXACT
    label = entails(premise, hypothesis, SearchMode.SAMPLED, budget=policy.label_budget,
                    rng_seed=seed, witnesses=(graph,))
    return label, LabelMode.APPROXIMATE


def generate_instance(d: int, index: int, seed: int, policy: GenerationPolicy) -> BenchInstance:
    rng = np.random.default_rng(seed)
    graph = random_dag(d, policy.edge_prob_for(d), rng)
    text, premise = render_premise(graph, policy.ci_policy, policy.max_cond)
    hypothesis = draw_hypothesis(rng, d)
    label, mode = label_instance(premise, hypothesis, graph, seed, policy)
    return BenchInstance(
        id=f"d{d}-{index:06d}",
        depth_d=d,
        premise_text=text,
        premise=premise,
        hypothesis=hypothesis,
        hypothesis_text=hypothesis_text(hypothesis, premise.names),
        label=label,
        label_mode=mode,
        graph=graph,
        seed=seed
    )


def generate(depth: int, count: int, seed: int = 0, policy: Optional[GenerationPolicy] = None,
             workers: int = 1) -> list[BenchInstance]:
    """
    Generate `count` instances over `depth` variables.

    Args:
        depth: Number of variables d (>= 2)
        count: Number of instances
        seed: Master seed; instance k uses a seed derived from (seed, d, k)
        policy: Generation policy (dense graphs, minimal premises by default)
        workers: Thread count; output order is by instance index regardless

    Returns:
        List of BenchInstance ordered by index
    """
    if depth < 2:
        raise InputError(f"depth must be at least 2, got {depth}")
    if count < 0:
        raise InputError(f"count must be non-negative, got {count}")
    policy = policy or GenerationPolicy()
    seeds = [derive_seed(seed, depth, k) for k in range(count)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            instances = list(pool.map(lambda k: generate_instance(depth, k, seeds[k], policy), range(count)))
    else:
        instances = [generate_instance(depth, k, seeds[k], policy) for k in range(count)]
    logger.info(f"Generated {count} instances at d={depth}")
    return instances


def split_assign(instances: Sequence[BenchInstance], dev_n: int = DEFAULT_DEV_N,
                 test_n: int = DEFAULT_TEST_N, seed: int = 0) -> list[BenchInstance]:
    """
    Seeded shuffle; the first test_n go to test, the next dev_n to dev, the rest to train.

    The returned list keeps the input order.
    """
    if len(instances) < dev_n + test_n:
        raise InputError(f"Need at least {dev_n + test_n} instances to split, got {len(instances)}")
    order = np.random.default_rng(seed).permutation(len(instances))
    splits = [Split.TRAIN] * len(instances)
    for rank, k in enumerate(order):
        if rank < test_n:
            splits[k] = Split.TEST
        elif rank < test_n + dev_n:
            splits[k] = Split.DEV
    return [replace(inst, split=s) for inst, s in zip(instances, splits)]


def vocabulary_words(text: str) -> list[str]:
    """Case-folded word tokens with punctuation dropped, so "A", "A," and "A." are one entry."""
    return WORD_PATTERN.findall(text.casefold())


def manifest(instances: Sequence[BenchInstance]) -> DatasetManifest:
    """Per-depth statistics: split counts, mean premise tokens, positive rate, vocabulary size."""
    if not instances:
        raise InputError("Cannot build a manifest from no instances")
    rows = []
    for d in sorted({inst.depth_d for inst in instances}):
        group = [inst for inst in instances if inst.depth_d == d]
        vocab = set()
        for inst in group:
            vocab.update(vocabulary_words(inst.premise_text))
            vocab.update(vocabulary_words(inst.hypothesis_text))
        rows.append(ManifestRow(
            d=d,
            n_samples=len(group),
            n_train=sum(inst.split is Split.TRAIN for inst in group),
            n_dev=sum(inst.split is Split.DEV for inst in group),
            n_test=sum(inst.split is Split.TEST for inst in group),
            mean_tokens_premise=float(np.mean([len(inst.premise_text.split()) for inst in group])),
            pct_positive=100.0 * float(np.mean([inst.label for inst in group])),
            vocab_size=len(vocab)
        ))
    return DatasetManifest(rows)


def to_jsonl(instances: Iterable[BenchInstance]) -> str:
    return ''.join(json.dumps(inst.to_record()) + '\n' for inst in instances)


def parse_jsonl(text: str) -> list[BenchInstance]:
    """
    Parse JSONL text into instances.

    Raises:
        ParseError: With the 1-based line number of the first bad line
    """
    instances = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ParseError("Line is not a JSON object")
            instances.append(BenchInstance.from_record(record))
        except json.JSONDecodeError as e:
            raise ParseError(f"Invalid JSON: {e.msg}", position=line_no)
        except ParseError as e:
            raise ParseError(str(e), position=line_no)
        except InputError as e:
            raise ParseError(str(e), position=line_no)
    return instances


def read_jsonl(path: Union[str, Path]) -> list[BenchInstance]:
    return parse_jsonl(Path(path).read_text(encoding='utf-8'))


def write_jsonl(path: Union[str, Path], instances: Iterable[BenchInstance]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_jsonl(instances), encoding='utf-8')
    return path


def dataset_filename(d: int) -> str:
    return f"extended_c2c_d{d}.jsonl"


def from_corr2cause(record: dict, index: int = 0) -> BenchInstance:
    """
    Ingest an original-format record (premise, hypothesis, label).

    Accepts either separate 'premise' / 'hypothesis' fields or a single
    'input' field of the form "Premise: ...\\nHypothesis: ...".
    """
    if 'input' in record and 'premise' not in record:
        body = record['input']
        head, sep, tail = body.partition('Hypothesis:')
        if not sep:
            raise ParseError("Input field has no 'Hypothesis:' part")
        premise_part = head.replace('Premise:', '', 1).strip()
        hypothesis_part = tail.strip()
    else:
        try:
            premise_part, hypothesis_part = record['premise'].strip(), record['hypothesis'].strip()
        except KeyError as e:
            raise ParseError(f"Record is missing field {e}")
    if 'label' not in record:
        raise ParseError("Record has no label")
    premise = parse_premise(premise_part)
    hypothesis = parse_hypothesis(hypothesis_part, premise.names)
    return BenchInstance(
        id=str(record.get('id', f"c2c-{index:06d}")),
        depth_d=premise.num_vars,
        premise_text=premise_part,
        premise=premise,
        hypothesis=hypothesis,
        hypothesis_text=hypothesis_part,
        label=int(record['label']),
        label_mode=LabelMode.EXTERNAL
    )
