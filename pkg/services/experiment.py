"""
End-to-end experiments: load or generate instances, run hypothesis
generation and the discrimination loop per instance, predict labels and
aggregate metrics.

Results are appended to results.jsonl one instance at a time, so an
interrupted run can resume by skipping the ids already recorded.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .acbo_loop import AcboConfig, HypothesisMode, Posterior, generate_hypotheses, run
from .benchgen import BenchInstance, GenerationPolicy, generate, read_jsonl
from .dag_core import Dag, relation_holds
from .errors import (
    ContradictionError,
    DegenerateHypothesisSpaceError,
    ExperimentConfigError,
    OracleConfigError,
    StalledDiscriminationError,
)
from .llm_provider import ChatCompletionClient, LlmEndpointConfig
from .metrics import MetricsReport, compute_metrics
from .oracle_service import OracleConfig, OracleMode, build_oracle
from .replay_provider import TranscriptWriter

logger = logging.getLogger(__name__)

RESULTS_FILE = 'results.jsonl'
TRAJECTORIES_FILE = 'trajectories.jsonl'
METRICS_FILE = 'metrics.json'
CONFIG_FILE = 'config.json'
TRANSCRIPT_FILE = 'transcript.jsonl'


class PredictionRule(str, Enum):
    MAP = 'map'
    POSTERIOR = 'posterior'


@dataclass
class GenerationSpec:
    depths: list[int]
    per_depth: int
    seed: int = 0
    policy: GenerationPolicy = field(default_factory=GenerationPolicy)

    @classmethod
    def from_dict(cls, data: dict) -> 'GenerationSpec':
        try:
            return cls(
                depths=[int(d) for d in data['depths']],
                per_depth=int(data['per_depth']),
                seed=int(data.get('seed', 0)),
                policy=GenerationPolicy.from_dict(data.get('policy', {}))
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ExperimentConfigError(f"Invalid generation spec: {e}")

    def to_dict(self) -> dict:
        return {
            'depths': list(self.depths),
            'per_depth': self.per_depth,
            'seed': self.seed,
            'policy': self.policy.to_dict()
        }


@dataclass
class ExperimentConfig:
    """
    Everything one run needs; loaded from a JSON file.

    Exactly one of `dataset` (JSONL path) and `generation` must be set.
    negatives_only keeps only label-0 instances, the rejection-only reading
    of the benchmark.
    """
    output_dir: str
    dataset: Optional[str] = None
    generation: Optional[GenerationSpec] = None
    acbo: AcboConfig = field(default_factory=AcboConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    endpoint: LlmEndpointConfig = field(default_factory=LlmEndpointConfig)
    hypothesis_mode: HypothesisMode = HypothesisMode.EXACT
    prediction_rule: PredictionRule = PredictionRule.MAP
    include_truth: bool = False
    trials: int = 1
    seed: int = 0
    workers: int = 1
    limit: Optional[int] = None
    transcript: Optional[str] = None
    negatives_only: bool = False

    def __post_init__(self):
        try:
            self.hypothesis_mode = HypothesisMode(self.hypothesis_mode)
            self.prediction_rule = PredictionRule(self.prediction_rule)
        except ValueError as e:
            raise ExperimentConfigError(str(e))
        if (self.dataset is None) == (self.generation is None):
            raise ExperimentConfigError("Set exactly one of 'dataset' and 'generation'")
        if self.trials < 1 or self.workers < 1:
            raise ExperimentConfigError("trials and workers must be positive")
        if self.acbo.votes_m != self.oracle.votes_m:
            raise ExperimentConfigError(
                f"Loop and oracle disagree on votes_m ({self.acbo.votes_m} vs {self.oracle.votes_m})"
            )

    def validate_paths(self) -> None:
        """Referenced inputs must exist when the run starts."""
        if self.dataset is not None and not Path(self.dataset).is_file():
            raise ExperimentConfigError(f"Dataset not found: {self.dataset}")
        if self.oracle.mode is OracleMode.REPLAY:
            if not self.transcript or not Path(self.transcript).is_file():
                raise ExperimentConfigError(f"Replay transcript not found: {self.transcript}")

    @classmethod
    def from_dict(cls, data: dict) -> 'ExperimentConfig':
        if 'output_dir' not in data:
            raise ExperimentConfigError("Config needs an 'output_dir'")
        generation = data.get('generation')
        return cls(
            output_dir=data['output_dir'],
            dataset=data.get('dataset'),
            generation=GenerationSpec.from_dict(generation) if generation is not None else None,
            acbo=AcboConfig.from_dict(data.get('acbo', {})),
            oracle=OracleConfig.from_dict(data.get('oracle', {})),
            endpoint=LlmEndpointConfig.from_dict(data.get('endpoint', {})),
            hypothesis_mode=data.get('hypothesis_mode', HypothesisMode.EXACT),
            prediction_rule=data.get('prediction_rule', PredictionRule.MAP),
            include_truth=bool(data.get('include_truth', False)),
            trials=int(data.get('trials', 1)),
            seed=int(data.get('seed', 0)),
            workers=int(data.get('workers', 1)),
            limit=data.get('limit'),
            transcript=data.get('transcript'),
            negatives_only=bool(data.get('negatives_only', False))
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'ExperimentConfig':
        try:
            data = json.loads(Path(path).read_text(encoding='utf-8'))
        except FileNotFoundError:
            raise ExperimentConfigError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ExperimentConfigError(f"Config file is not valid JSON: {e}")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            'output_dir': self.output_dir,
            'dataset': self.dataset,
            'generation': self.generation.to_dict() if self.generation is not None else None,
            'acbo': self.acbo.to_dict(),
            'oracle': self.oracle.to_dict(),
            'endpoint': self.endpoint.to_dict(),
            'hypothesis_mode': self.hypothesis_mode.value,
            'prediction_rule': self.prediction_rule.value,
            'include_truth': self.include_truth,
            'trials': self.trials,
            'seed': self.seed,
            'workers': self.workers,
            'limit': self.limit,
            'transcript': self.transcript,
            'negatives_only': self.negatives_only
        }


@dataclass
class InstanceResult:
    instance_id: str
    trial: int
    seed: int
    d: int
    template: str
    gold: int
    predicted: int
    status: str
    rounds_used: int
    converged: bool
    map_graph: Optional[dict]
    map_mass: Optional[float]
    stop_rule: str
    truth_forced: bool = False
    matches_truth_profile: Optional[bool] = None

    @property
    def key(self) -> tuple[str, int]:
        return self.instance_id, self.trial

    @classmethod
    def from_dict(cls, data: dict) -> 'InstanceResult':
        return cls(**{name: data.get(name) for name in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass
class ExperimentOutcome:
    results: list[InstanceResult]
    report: MetricsReport


def load_instances(config: ExperimentConfig) -> list[BenchInstance]:
    if config.dataset is not None:
        instances = read_jsonl(config.dataset)
    else:
        spec = config.generation
        instances = []
        for d in spec.depths:
            instances.extend(generate(d, spec.per_depth, spec.seed, spec.policy))
    if config.negatives_only:
        instances = [inst for inst in instances if inst.label == 0]
    if config.limit is not None:
        instances = instances[:int(config.limit)]
    logger.info(f"Loaded {len(instances)} instances")
    return instances


def run_seed(master_seed: int, index: int, trial: int) -> int:
    return int(np.random.SeedSequence([master_seed, index, trial]).generate_state(1)[0])


def predict_label(graphs: list[Dag], posterior: Posterior, inst: BenchInstance, rule: PredictionRule) -> int:
    h = inst.hypothesis
    if rule is PredictionRule.MAP:
        return int(relation_holds(graphs[posterior.map_index], h.template, h.a, h.b))
    holds = np.array([relation_holds(g, h.template, h.a, h.b) for g in graphs], dtype=float)
    return int(float(np.dot(posterior.weights, holds)) >= 0.5)


class ExperimentRunner:
    """Runs one configured experiment, writing results as it goes."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self._client = None
        self._transcript = None
        self._shared_oracle = None

    def _setup_oracle(self) -> None:
        mode = self.config.oracle.mode
        if mode is OracleMode.LLM or self.config.hypothesis_mode is HypothesisMode.ORACLE_LLM:
            self._client = ChatCompletionClient(self.config.endpoint)
        if mode is OracleMode.LLM:
            self._transcript = TranscriptWriter(self.output_dir / TRANSCRIPT_FILE)
            self._shared_oracle = build_oracle(self.config.oracle, client=self._client, transcript=self._transcript)
        elif mode is OracleMode.REPLAY:
            self._shared_oracle = build_oracle(self.config.oracle, replay_path=self.config.transcript)

    def _oracle_for(self, inst: BenchInstance, trial: int):
        if self._shared_oracle is not None:
            return self._shared_oracle.bind(inst.id, trial)
        if inst.graph is None:
            raise OracleConfigError(f"Instance {inst.id} has no generating graph for the simulated oracle")
        return build_oracle(self.config.oracle, truth=inst.graph)

    def run_instance(self, index: int, inst: BenchInstance, trial: int) -> tuple[InstanceResult, list[dict]]:
        cfg = self.config
        seed = run_seed(cfg.seed, index, trial)
        hyp_seed, loop_seed = np.random.SeedSequence(seed).spawn(2)
        truth = inst.graph if cfg.include_truth else None
        base = dict(instance_id=inst.id, trial=trial, seed=seed, d=inst.depth_d,
                    template=inst.template.value, gold=inst.label, stop_rule=cfg.acbo.stop_rule.value)
        try:
            hypotheses = generate_hypotheses(inst.premise, cfg.acbo.candidates_n, cfg.hypothesis_mode,
                                             include_truth=truth, rng_seed=np.random.default_rng(hyp_seed),
                                             client=self._client)
        except DegenerateHypothesisSpaceError as e:
            logger.info(f"{inst.id}: {e}")
            graphs = e.graphs
            posterior = Posterior.uniform(1) if graphs else None
            predicted = predict_label(graphs, posterior, inst, cfg.prediction_rule) if graphs else 0
            return InstanceResult(
                **base, predicted=predicted, status='degenerate', rounds_used=0, converged=bool(graphs),
                map_graph=graphs[0].to_dict() if graphs else None, map_mass=1.0 if graphs else None,
                truth_forced=truth is not None,
                matches_truth_profile=self._matches(graphs[0] if graphs else None, inst)
            ), []

        graphs = hypotheses.graphs
        status = 'budget'
        try:
            result = run(inst.premise, graphs, self._oracle_for(inst, trial), cfg.acbo, rng_seed=np.random.default_rng(loop_seed))
            posterior, trajectory, converged = result.posterior, result.trajectory, result.converged
            if converged:
                status = 'converged'
        except (StalledDiscriminationError, ContradictionError) as e:
            logger.info(f"{inst.id}: {e}")
            trajectory = e.trajectory
            posterior = trajectory[-1].posterior_after if trajectory else Posterior.uniform(len(graphs))
            converged = False
            status = 'stalled' if isinstance(e, StalledDiscriminationError) else 'contradiction'
        map_graph = graphs[posterior.map_index]
        record = InstanceResult(
            **base,
            predicted=predict_label(graphs, posterior, inst, cfg.prediction_rule),
            status=status,
            rounds_used=len(trajectory),
            converged=converged,
            map_graph=map_graph.to_dict(),
            map_mass=posterior.map_mass,
            truth_forced=hypotheses.truth_forced,
            matches_truth_profile=self._matches(map_graph, inst)
        )
        rows = [{'instance_id': inst.id, 'trial': trial, **log.to_dict()} for log in trajectory]
        return record, rows

    @staticmethod
    def _matches(graph: Optional[Dag], inst: BenchInstance) -> Optional[bool]:
        if graph is None or inst.graph is None:
            return None
        return bool(np.array_equal(graph.reach_matrix, inst.graph.reach_matrix))

    def _read_existing(self) -> dict[tuple[str, int], InstanceResult]:
        path = self.output_dir / RESULTS_FILE
        if not path.exists():
            return {}
        existing = {}
        for line in path.read_text(encoding='utf-8').splitlines():
            if line.strip():
                result = InstanceResult.from_dict(json.loads(line))
                existing[result.key] = result
        return existing

    def run(self, resume: bool = False) -> ExperimentOutcome:
        """
        Execute the experiment.

        Args:
            resume: Keep results.jsonl and skip (instance, trial) pairs already recorded

        Raises:
            OracleError: After flushing the results finished so far
        """
        cfg = self.config
        cfg.validate_paths()
        self.output_dir.mkdir(parents=True, exist_ok=True)
        results_path = self.output_dir / RESULTS_FILE
        trajectories_path = self.output_dir / TRAJECTORIES_FILE
        existing = self._read_existing() if resume else {}
        if not resume:
            results_path.write_text('', encoding='utf-8')
            trajectories_path.write_text('', encoding='utf-8')
        elif existing:
            logger.info(f"Resuming: {len(existing)} results already recorded")
        (self.output_dir / CONFIG_FILE).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + '\n',
                                                  encoding='utf-8')

        instances = load_instances(cfg)
        self._setup_oracle()
        tasks = [(k, inst, trial) for k, inst in enumerate(instances) for trial in range(cfg.trials)
                 if (inst.id, trial) not in existing]

        def work(task):
            return self.run_instance(*task)

        new_results = []
        with results_path.open('a', encoding='utf-8') as results_fh, \
                trajectories_path.open('a', encoding='utf-8') as traj_fh:
            if cfg.workers > 1:
                pool = ThreadPoolExecutor(max_workers=cfg.workers)
                outputs = pool.map(work, tasks)
            else:
                pool = None
                outputs = map(work, tasks)
            try:
                for record, rows in outputs:
                    results_fh.write(json.dumps(record.to_dict()) + '\n')
                    for row in rows:
                        traj_fh.write(json.dumps(row) + '\n')
                    results_fh.flush()
                    traj_fh.flush()
                    new_results.append(record)
            finally:
                if pool is not None:
                    pool.shutdown(wait=True, cancel_futures=True)

        order = {(inst.id, trial): (k, trial) for k, inst in enumerate(instances) for trial in range(cfg.trials)}
        merged = {**existing, **{r.key: r for r in new_results}}
        results = sorted((r for r in merged.values() if r.key in order), key=lambda r: order[r.key])
        report = report_from_results(results)
        write_report(self.output_dir / METRICS_FILE, report)
        logger.info(f"Accuracy {report.accuracy:.2f}, macro F1 {report.macro_f1:.2f} over {report.n_instances} runs")
        return ExperimentOutcome(results, report)


def report_from_results(results: list[InstanceResult]) -> MetricsReport:
    return compute_metrics(
        predictions=[r.predicted for r in results],
        gold=[r.gold for r in results],
        templates=[r.template for r in results],
        depths=[r.d for r in results],
        rounds=[r.rounds_used for r in results],
        converged=[r.converged for r in results]
    )


def read_results(path: Union[str, Path]) -> list[InstanceResult]:
    return [InstanceResult.from_dict(json.loads(line))
            for line in Path(path).read_text(encoding='utf-8').splitlines() if line.strip()]


def write_report(path: Union[str, Path], report: MetricsReport) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def run_experiment(config: ExperimentConfig, resume: bool = False) -> ExperimentOutcome:
    return ExperimentRunner(config).run(resume=resume)
