"""
Active causal discrimination loop.

Phase 1 proposes a set of candidate DAGs consistent with the premise.
Phase 2 repeats three steps until a stop rule fires or the budget runs out:

    A. pick the ordered pair (V_i, V_j) whose answer is most informative
       about the hypothesis index (epsilon-greedy over information gain)
    B. ask the oracle whether V_j changes under do(V_i)
    C. update the posterior with the noisy-answer likelihood

The likelihood uses eta_eff, the error of the majority vote, not the
per-vote error.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import entr
from scipy.stats import entropy as shannon_entropy

from .dag_core import Dag, Intervention, SeedLike, VarPair
from .errors import (
    AcboConfigError,
    ContradictionError,
    DegenerateHypothesisSpaceError,
    InputError,
    OracleError,
    StalledDiscriminationError,
)
from .indep_engine import PremiseSet, SearchMode, consistent_dags
from .oracle_service import InterventionalOracle, OracleQuery, OracleResponse, effective_error

logger = logging.getLogger(__name__)

# Hypotheses below this mass are skipped when scoring queries
ALIVE_THRESHOLD = 1e-9
# IG values within this distance of the best are treated as ties
IG_TIE_TOLERANCE = 1e-12
SUM_TOLERANCE = 1e-12


class StopRule(str, Enum):
    MAP_THRESHOLD = 'map-threshold'
    ENTROPY_THRESHOLD = 'entropy-threshold'


class HypothesisMode(str, Enum):
    EXACT = 'exact'
    SAMPLED = 'sampled'
    ORACLE_LLM = 'oracle-llm'


@dataclass
class AcboConfig:
    """
    Loop hyperparameters.

    Attributes:
        budget_t: Maximum number of rounds T
        explore_eps: Probability of a uniformly random query
        eta: Per-vote oracle error assumed by the update
        stop_delta: Threshold of the stop rule
        votes_m: Votes per query (odd)
        candidates_n: Number of candidate graphs N
        stop_rule: map-threshold or entropy-threshold
    """
    budget_t: int = 20
    explore_eps: float = 0.1
    eta: float = 0.1
    stop_delta: float = 0.01
    votes_m: int = 3
    candidates_n: int = 8
    stop_rule: StopRule = StopRule.MAP_THRESHOLD

    def __post_init__(self):
        try:
            self.stop_rule = StopRule(self.stop_rule)
        except ValueError:
            raise AcboConfigError(f"Unknown stop rule: {self.stop_rule!r}")
        if self.budget_t < 1:
            raise AcboConfigError(f"budget_t must be at least 1, got {self.budget_t}")
        if not 0.0 <= self.explore_eps < 1.0:
            raise AcboConfigError(f"explore_eps must lie in [0, 1), got {self.explore_eps}")
        if not 0.0 <= self.eta < 0.5:
            raise AcboConfigError(f"eta must lie in [0, 0.5), got {self.eta}")
        if not 0.0 < self.stop_delta < 1.0:
            raise AcboConfigError(f"stop_delta must lie in (0, 1), got {self.stop_delta}")
        if self.votes_m < 1 or self.votes_m % 2 == 0:
            raise AcboConfigError(f"votes_m must be a positive odd integer, got {self.votes_m}")
        if self.candidates_n < 2:
            raise AcboConfigError(f"candidates_n must be at least 2, got {self.candidates_n}")

    @property
    def eta_eff(self) -> float:
        return effective_error(self.eta, self.votes_m)

    @classmethod
    def from_dict(cls, data: dict) -> 'AcboConfig':
        defaults = cls()
        return cls(
            budget_t=int(data.get('budget_t', defaults.budget_t)),
            explore_eps=float(data.get('explore_eps', defaults.explore_eps)),
            eta=float(data.get('eta', defaults.eta)),
            stop_delta=float(data.get('stop_delta', defaults.stop_delta)),
            votes_m=int(data.get('votes_m', defaults.votes_m)),
            candidates_n=int(data.get('candidates_n', defaults.candidates_n)),
            stop_rule=data.get('stop_rule', defaults.stop_rule)
        )

    def to_dict(self) -> dict:
        return {
            'budget_t': self.budget_t,
            'explore_eps': self.explore_eps,
            'eta': self.eta,
            'stop_delta': self.stop_delta,
            'votes_m': self.votes_m,
            'candidates_n': self.candidates_n,
            'stop_rule': self.stop_rule.value
        }


@dataclass(frozen=True, eq=False)
class Posterior:
    """Belief vector over the candidate graphs."""
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise InputError("A posterior needs a non-empty weight vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InputError("Posterior weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > SUM_TOLERANCE:
            raise InputError(f"Posterior weights sum to {w.sum()!r}, not 1")
        w.flags.writeable = False
        object.__setattr__(self, 'weights', w)

    @classmethod
    def uniform(cls, n: int) -> 'Posterior':
        return cls(np.full(n, 1.0 / n))

    def __len__(self) -> int:
        return self.weights.size

    @property
    def map_index(self) -> int:
        return int(np.argmax(self.weights))

    @property
    def map_mass(self) -> float:
        return float(self.weights.max())

    def to_list(self) -> list[float]:
        return [float(x) for x in self.weights]


@dataclass
class RoundLog:
    round_index: int
    chosen_pair: VarPair
    ig_score: float
    was_random: bool
    response: OracleResponse
    posterior_after: Posterior

    def to_dict(self) -> dict:
        return {
            'round': self.round_index,
            'pair': self.chosen_pair.to_list(),
            'ig': self.ig_score,
            'random': self.was_random,
            'response': self.response.to_dict(),
            'posterior': self.posterior_after.to_list()
        }


@dataclass
class RunResult:
    map_graph: Dag
    map_index: int
    map_mass: float
    rounds_used: int
    trajectory: list[RoundLog]
    converged: bool
    stop_rule: StopRule
    posterior: Posterior
    stalled: bool = False

    def summary(self, instance_id: str, seed: int) -> dict:
        return {
            'instance_id': instance_id,
            'map_graph': self.map_graph.to_dict(),
            'map_mass': self.map_mass,
            'rounds_used': self.rounds_used,
            'converged': self.converged,
            'stop_rule': self.stop_rule.value,
            'seed': seed
        }


@dataclass
class HypothesisSet:
    """Candidate graphs plus where the forced-in truth sits, if any."""
    graphs: list[Dag]
    mode: HypothesisMode
    truth_index: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    @property
    def truth_forced(self) -> bool:
        return self.truth_index is not None

    def __len__(self) -> int:
        return len(self.graphs)


def generate_hypotheses(p: PremiseSet, n: int, mode: Union[str, HypothesisMode] = HypothesisMode.EXACT,
                        include_truth: Optional[Dag] = None, rng_seed: SeedLike = 0,
                        client=None) -> HypothesisSet:
    """
    Phase 1: candidate graphs for the premise.

    Args:
        p: Premise
        n: Number of candidates wanted
        mode: exact (enumerate and subsample), sampled (randomized search)
              or oracle-llm (model proposals padded by sampled search)
        include_truth: Graph forced into the set (identification checks only)
        rng_seed: Seed for subsampling and search
        client: ChatCompletionClient for oracle-llm mode

    Raises:
        DegenerateHypothesisSpaceError: If fewer than 2 distinct graphs are found
    """
    if n < 2:
        raise InputError(f"n must be at least 2, got {n}")
    mode = HypothesisMode(mode)
    rng = np.random.default_rng(rng_seed)
    truth = include_truth
    if truth is not None and truth.names != p.names:
        truth = Dag(p.names, truth.children)

    if mode is HypothesisMode.EXACT:
        pool = [g for g in consistent_dags(p, SearchMode.EXACT) if g != truth]
        keep = n - 1 if truth is not None else n
        if len(pool) > keep:
            picks = np.sort(rng.choice(len(pool), size=keep, replace=False))
            pool = [pool[k] for k in picks]
        graphs = pool
    else:
        graphs = []
        if mode is HypothesisMode.ORACLE_LLM:
            from .llm_provider import ChatCompletionClient, propose_hypotheses
            graphs = propose_hypotheses(client or ChatCompletionClient(), p, n)
            logger.info(f"Model proposed {len(graphs)} premise-consistent graphs")
        witnesses = tuple(graphs) + ((truth,) if truth is not None else ())
        if len(set(witnesses)) < n:
            graphs = consistent_dags(p, SearchMode.SAMPLED, budget=n, rng_seed=rng, witnesses=witnesses)
        graphs = [g for g in dict.fromkeys(graphs) if g != truth][:n - 1 if truth is not None else n]

    truth_index = None
    if truth is not None:
        truth_index = int(rng.integers(len(graphs) + 1))
        graphs.insert(truth_index, truth)
    if len(set(graphs)) < 2:
        raise DegenerateHypothesisSpaceError(
            f"Only {len(set(graphs))} distinct candidate graph(s) for the premise; nothing to discriminate",
            graphs=list(dict.fromkeys(graphs))
        )
    return HypothesisSet(graphs, mode, truth_index, {'truth_forced': truth_index is not None})


def entropy(pi: Posterior) -> float:
    """Shannon entropy of the posterior in bits."""
    return float(shannon_entropy(pi.weights, base=2))


def _as_weights(pi: Union[Posterior, Sequence[float]]) -> np.ndarray:
    return pi.weights if isinstance(pi, Posterior) else np.asarray(pi, dtype=float)


def _check_preds(w: np.ndarray, preds) -> np.ndarray:
    preds = np.asarray(preds, dtype=int)
    if preds.shape != w.shape:
        raise InputError(f"Expected {w.size} predictions, got {preds.size}")
    return preds


def predictive_response_prob(pi: Posterior, preds, eta_eff: float) -> float:
    """P(r = 1) under the posterior and the noisy-answer model."""
    w = _as_weights(pi)
    preds = _check_preds(w, preds)
    return float(np.dot(w, (1.0 - eta_eff) * preds + eta_eff * (1 - preds)))


def bayes_update(pi: Posterior, preds, r_obs: int, eta_eff: float) -> Posterior:
    """
    Multiply by the answer likelihood and renormalize.

    Raises:
        ContradictionError: If the answer has zero probability under every hypothesis
    """
    if not 0.0 <= eta_eff <= 0.5:
        raise InputError(f"eta_eff must lie in [0, 0.5], got {eta_eff}")
    w = _as_weights(pi)
    preds = _check_preds(w, preds)
    likelihood = np.where(preds == int(r_obs), 1.0 - eta_eff, eta_eff)
    post = w * likelihood
    total = post.sum()
    if total <= 0.0:
        raise ContradictionError(f"Answer {r_obs} contradicts every remaining hypothesis")
    return Posterior(post / total)


def information_gain(pi: Posterior, preds, eta_eff: float) -> float:
    """
    Mutual information (bits) between the hypothesis index and the noisy answer.

    Zero exactly when the predictions agree across every positive-mass hypothesis.
    """
    w = _as_weights(pi)
    preds = _check_preds(w, preds)
    live = preds[w > 0]
    if live.size == 0 or np.all(live == live[0]):
        return 0.0
    posterior = pi if isinstance(pi, Posterior) else Posterior(w)
    p_one = predictive_response_prob(posterior, preds, eta_eff)
    expected = 0.0
    for r, prob in ((1, p_one), (0, 1.0 - p_one)):
        if prob > 0:
            expected += prob * entropy(bayes_update(posterior, preds, r, eta_eff))
    return max(0.0, entropy(posterior) - expected)


def prediction_tensor(hypotheses: Sequence[Dag]) -> np.ndarray:
    """Stack of reach matrices, shape (n, d, d)."""
    if not hypotheses:
        raise InputError("No hypotheses given")
    d = hypotheses[0].num_vars
    if any(h.num_vars != d for h in hypotheses):
        raise InputError("Hypotheses must share the variable set")
    return np.stack([h.reach_matrix for h in hypotheses]).astype(int)


def information_gain_table(pi: Posterior, predictions: np.ndarray, eta_eff: float) -> np.ndarray:
    """
    IG of every ordered pair at once, shape (d, d) with zeros on the diagonal.

    Only hypotheses above ALIVE_THRESHOLD are scored; their masses are
    renormalized for the computation.
    """
    w = _as_weights(pi)
    n, d, _ = predictions.shape
    alive = w > ALIVE_THRESHOLD
    wa = w[alive] / w[alive].sum()
    preds = predictions[alive].reshape(alive.sum(), d * d)
    lik_one = eta_eff + (1.0 - 2.0 * eta_eff) * preds
    joint_one = wa[:, None] * lik_one
    joint_zero = wa[:, None] * (1.0 - lik_one)
    p_one = joint_one.sum(axis=0)
    p_zero = joint_zero.sum(axis=0)
    conditional = (entr(joint_one).sum(axis=0) + entr(joint_zero).sum(axis=0)
                   - entr(p_one) - entr(p_zero)) / math.log(2)
    gain = np.maximum(entr(wa).sum() / math.log(2) - conditional, 0.0)
    constant = np.all(preds == preds[:1], axis=0)
    gain[constant] = 0.0
    return gain.reshape(d, d)


def _select(pi: Posterior, predictions: np.ndarray, eta_eff: float, eps: float,
            rng: np.random.Generator) -> tuple[VarPair, float, bool]:
    d = predictions.shape[1]
    table = information_gain_table(pi, predictions, eta_eff)
    explore = rng.random() < eps
    if explore:
        k = int(rng.integers(d * (d - 1)))
        i, rest = divmod(k, d - 1)
        j = rest if rest < i else rest + 1
        return VarPair(i, j), float(table[i, j]), True
    best = float(table.max())
    if best <= 0.0:
        raise StalledDiscriminationError("No query separates the remaining hypotheses")
    ties = np.argwhere(table >= best - IG_TIE_TOLERANCE)
    i, j = (int(v) for v in ties[0])
    return VarPair(i, j), float(table[i, j]), False


def select_intervention(pi: Posterior, hypotheses: Sequence[Dag], eta_eff: float, eps: float,
                        rng_seed: SeedLike = None) -> tuple[VarPair, float, bool]:
    """
    Step A: epsilon-greedy choice of the next query.

    With probability eps a uniformly random ordered pair is returned;
    otherwise the pair with maximal IG, ties broken by lowest (source, sink).

    Returns:
        Tuple of (pair, ig_score, was_random)

    Raises:
        StalledDiscriminationError: If the greedy branch finds no pair with positive IG
    """
    if not 0.0 <= eps <= 1.0:
        raise InputError(f"eps must lie in [0, 1], got {eps}")
    predictions = prediction_tensor(hypotheses)
    if predictions.shape[0] != len(_as_weights(pi)):
        raise InputError("Posterior and hypothesis list differ in length")
    return _select(pi, predictions, eta_eff, eps, np.random.default_rng(rng_seed))


def _should_stop(pi: Posterior, cfg: AcboConfig) -> bool:
    if cfg.stop_rule is StopRule.MAP_THRESHOLD:
        return pi.map_mass > 1.0 - cfg.stop_delta
    return entropy(pi) < cfg.stop_delta


def _attach(error: Exception, trajectory: list[RoundLog]) -> Exception:
    error.trajectory = list(trajectory)
    return error


def run(p: PremiseSet, hypotheses: Sequence[Dag], oracle: InterventionalOracle, cfg: AcboConfig,
        rng_seed: SeedLike = 0, context_target: Optional[int] = None) -> RunResult:
    """
    Phase 2: discriminate among the hypotheses with oracle queries.

    Args:
        p: Premise the queries are phrased over
        hypotheses: Candidate graphs (at least 2)
        oracle: Interventional oracle
        cfg: Loop hyperparameters
        rng_seed: Seed for exploration and oracle randomness
        context_target: Optional variable of interest passed to the oracle prompt

    Returns:
        RunResult with the MAP graph and the full trajectory

    Raises:
        DegenerateHypothesisSpaceError: If fewer than 2 hypotheses are given
        StalledDiscriminationError, ContradictionError, OracleError: with the
            trajectory so far attached as `.trajectory`
    """
    hypotheses = list(hypotheses)
    if len(hypotheses) < 2:
        raise DegenerateHypothesisSpaceError(f"Need at least 2 hypotheses, got {len(hypotheses)}")
    predictions = prediction_tensor(hypotheses)
    eta_eff = cfg.eta_eff
    rng = np.random.default_rng(rng_seed)
    pi = Posterior.uniform(len(hypotheses))
    trajectory: list[RoundLog] = []
    logger.info(
        f"Discrimination run: {len(hypotheses)} hypotheses, T={cfg.budget_t}, stop rule {cfg.stop_rule.value}, "
        f"eta_eff={eta_eff:.4f}"
    )

    converged = _should_stop(pi, cfg)
    for t in range(1, cfg.budget_t + 1):
        if converged:
            break
        try:
            pair, ig, was_random = _select(pi, predictions, eta_eff, cfg.explore_eps, rng)
        except StalledDiscriminationError as e:
            raise StalledDiscriminationError(str(e), trajectory)
        query = OracleQuery(p, Intervention(pair.source), pair.sink, context_target)
        try:
            response = oracle.query(query, rng_seed=int(rng.integers(2 ** 32)))
        except OracleError as e:
            raise _attach(e, trajectory)
        try:
            pi = bayes_update(pi, predictions[:, pair.source, pair.sink], response.answer, eta_eff)
        except ContradictionError as e:
            raise ContradictionError(str(e), trajectory)
        trajectory.append(RoundLog(t, pair, ig, was_random, response, pi))
        logger.debug(
            f"Round {t}: do({p.names[pair.source]}) -> {p.names[pair.sink]}, IG={ig:.4f}, "
            f"random={was_random}, answer={response.answer}, max mass={pi.map_mass:.4f}"
        )
        converged = _should_stop(pi, cfg)

    k = pi.map_index
    return RunResult(
        map_graph=hypotheses[k],
        map_index=k,
        map_mass=pi.map_mass,
        rounds_used=len(trajectory),
        trajectory=trajectory,
        converged=converged,
        stop_rule=cfg.stop_rule,
        posterior=pi
    )


def theoretical_rounds(n: int, eta: float) -> tuple[int, float]:
    """
    Rounds sufficient to identify the truth among n hypotheses, and the success floor.

    Returns:
        Tuple of (ceil(log n / log((1 - eta) / eta)), 1 - n * eta ** rounds)
    """
    if n < 2:
        raise InputError(f"n must be at least 2, got {n}")
    if not 0.0 < eta < 0.5:
        raise InputError(f"eta must lie in (0, 0.5), got {eta}")
    rounds = max(1, math.ceil(math.log(n) / math.log((1.0 - eta) / eta)))
    return rounds, 1.0 - n * eta ** rounds
