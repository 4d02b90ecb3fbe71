"""
Abstract base class for interventional oracles.

An oracle answers "does V_j change under do(V_i)?" with a yes/no bit,
majority-voted over M calls. Providers (simulated, LLM-backed, replay)
implement the same interface so the discovery loop can switch between
them without change.
"""

import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

from scipy.stats import binom

from .dag_core import Intervention, SeedLike, VarPair
from .errors import InputError, OracleConfigError
from .indep_engine import PremiseSet
from .premise_text import premise_text

logger = logging.getLogger(__name__)

DEFAULT_VOTES = 3

INTERVENTION_QUESTION = (
    "Suppose we intervene and set {source} to a fixed value, severing all of its incoming influences. "
    "Question: Would the distribution of {sink} change as a result? Answer strictly 'yes' or 'no'."
)


class OracleMode(str, Enum):
    SIMULATED = 'simulated'
    LLM = 'llm'
    REPLAY = 'replay'


@dataclass
class OracleConfig:
    """
    Oracle settings.

    Attributes:
        eta: Per-vote error probability, must be below 0.5
        votes_m: Number of votes per query (odd)
        mode: Which provider answers the queries
    """
    eta: float = 0.1
    votes_m: int = DEFAULT_VOTES
    mode: OracleMode = OracleMode.SIMULATED

    def __post_init__(self):
        try:
            self.mode = OracleMode(self.mode)
        except ValueError:
            raise OracleConfigError(f"Unknown oracle mode: {self.mode!r}")
        if not 0.0 <= self.eta < 0.5:
            raise OracleConfigError(f"Oracle error eta must lie in [0, 0.5), got {self.eta}")
        if self.votes_m < 1 or self.votes_m % 2 == 0:
            raise OracleConfigError(f"votes_m must be a positive odd integer, got {self.votes_m}")

    @property
    def eta_eff(self) -> float:
        return effective_error(self.eta, self.votes_m)

    @classmethod
    def from_dict(cls, data: dict) -> 'OracleConfig':
        return cls(
            eta=float(data.get('eta', 0.1)),
            votes_m=int(data.get('votes_m', DEFAULT_VOTES)),
            mode=data.get('mode', OracleMode.SIMULATED)
        )

    def to_dict(self) -> dict:
        return {
            'eta': self.eta,
            'votes_m': self.votes_m,
            'mode': self.mode.value
        }


@dataclass(frozen=True)
class OracleQuery:
    """One interventional question about the premise's system."""
    premise: PremiseSet
    intervention: Intervention
    observed: int
    context_target: Optional[int] = None

    def __post_init__(self):
        d = self.premise.num_vars
        for v in (self.intervention.target, self.observed):
            if not 0 <= v < d:
                raise InputError(f"Query variable {v} out of range for d={d}")
        if self.observed == self.intervention.target:
            raise InputError("The observed variable must differ from the intervened one")

    @property
    def pair(self) -> VarPair:
        return VarPair(self.intervention.target, self.observed)


@dataclass(frozen=True)
class OracleResponse:
    """Majority answer plus the individual votes, in vote-index order."""
    answer: int
    votes: tuple[int, ...]
    latency_ms: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'votes', tuple(int(v) for v in self.votes))
        if not self.votes or len(self.votes) % 2 == 0:
            raise InputError(f"A response needs an odd number of votes, got {len(self.votes)}")
        if self.answer != majority(self.votes):
            raise InputError(f"Answer {self.answer} is not the majority of {self.votes}")

    @classmethod
    def from_votes(cls, votes: Sequence[int], latency_ms: Optional[float] = None) -> 'OracleResponse':
        return cls(answer=majority(votes), votes=tuple(votes), latency_ms=latency_ms)

    @classmethod
    def from_dict(cls, data: dict) -> 'OracleResponse':
        return cls(
            answer=int(data['answer']),
            votes=tuple(data['votes']),
            latency_ms=data.get('latency_ms')
        )

    def to_dict(self) -> dict:
        return {
            'answer': self.answer,
            'votes': list(self.votes),
            'latency_ms': self.latency_ms
        }


def majority(votes: Sequence[int]) -> int:
    return int(2 * sum(votes) > len(votes))


def effective_error(per_vote_error: float, m: int) -> float:
    """
    Probability that the majority of m independent votes is wrong.

    Args:
        per_vote_error: Error probability of a single vote
        m: Number of votes (odd)
    """
    if not 0.0 <= per_vote_error <= 1.0:
        raise InputError(f"per_vote_error must lie in [0, 1], got {per_vote_error}")
    if m < 1 or m % 2 == 0:
        raise InputError(f"m must be a positive odd integer, got {m}")
    return float(binom.sf(m // 2, m, per_vote_error))


def render_intervention_prompt(q: OracleQuery) -> str:
    """Premise paragraph followed by the intervention question."""
    names = q.premise.names
    parts = [premise_text(q.premise)]
    if q.context_target is not None:
        parts.append(f"The variable of interest is {names[q.context_target]}.")
    body = ' '.join(parts)
    question = INTERVENTION_QUESTION.format(source=names[q.intervention.target], sink=names[q.observed])
    return f"{body}\n\n{question}"


def parse_yes_no(reply: Optional[str]) -> Optional[int]:
    """
    Read the first token of a model reply as yes (1) or no (0).

    Case, surrounding whitespace and punctuation are ignored. Returns None
    when the reply does not start with either word.
    """
    if not reply:
        return None
    tokens = reply.split()
    if not tokens:
        return None
    word = re.sub(r'[^a-z]', '', tokens[0].casefold())
    if word == 'yes':
        return 1
    if word == 'no':
        return 0
    return None


class InterventionalOracle(ABC):
    """
    Abstract interface for interventional oracles.

    Implementations must be safe to share across independent runs.
    """

    @abstractmethod
    def query(self, q: OracleQuery, rng_seed: SeedLike = None) -> OracleResponse:
        """
        Answer whether q.observed changes under do(q.intervention.target).

        Args:
            q: The query
            rng_seed: Seed for any randomness the provider uses

        Returns:
            OracleResponse with the majority answer and its votes

        Raises:
            OracleError: If the provider cannot produce an answer
        """
        pass

    @property
    def model_name(self) -> str:
        return type(self).__name__

    def bind(self, instance_id: str, trial: int) -> 'InterventionalOracle':
        """
        Oracle view for one (instance, trial) run.

        Providers that keep per-run state (transcript tagging, replay
        queues) return a bound copy; stateless ones return self.
        """
        return self


def build_oracle(config: OracleConfig, truth=None, client=None, transcript=None,
                 replay_path: Union[str, None] = None) -> InterventionalOracle:
    """
    Construct the oracle the config asks for.

    Args:
        config: Oracle settings
        truth: Generating graph (simulated mode)
        client: ChatCompletionClient (llm mode)
        transcript: Optional TranscriptWriter recording llm-mode queries
        replay_path: Transcript JSONL to replay (replay mode)

    Raises:
        OracleConfigError: If the mode's requirement is missing
    """
    if config.mode is OracleMode.SIMULATED:
        from .simulated_provider import SimulatedOracle
        if truth is None:
            raise OracleConfigError("Simulated oracle needs the generating graph")
        return SimulatedOracle(truth, config)
    if config.mode is OracleMode.LLM:
        from .llm_provider import ChatCompletionClient, LlmOracle
        return LlmOracle(client or ChatCompletionClient(), config, transcript=transcript)
    from .replay_provider import ReplayOracle
    if not replay_path:
        raise OracleConfigError("Replay oracle needs a transcript path")
    return ReplayOracle.from_file(replay_path, config)
