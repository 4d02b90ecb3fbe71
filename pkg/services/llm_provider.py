"""
LLM-backed interventional oracle.

Talks to any chat-completion endpoint over HTTP: POST {model, messages,
temperature, max_tokens} with a bearer token read from ACBO_API_KEY.
Every vote is one model call; every answered query can be recorded to a
transcript for later replay.
"""

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from typing import Optional

import requests

from .dag_core import Dag, SeedLike
from .errors import CausalServiceError, InputError, OracleConfigError, OracleUnavailableError
from .indep_engine import PremiseSet, satisfies
from .oracle_service import (
    InterventionalOracle,
    OracleConfig,
    OracleQuery,
    OracleResponse,
    parse_yes_no,
    render_intervention_prompt,
)
from .premise_text import premise_text

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4o-mini"
API_KEY_ENV = 'ACBO_API_KEY'

# Transport defaults
REQUEST_TIMEOUT_S = 30.0
REQUEST_RETRIES = 3
RETRY_BACKOFF_S = 1.0


@dataclass
class LlmEndpointConfig:
    """Where and how to reach the chat-completion endpoint."""
    base_url: str = field(default_factory=lambda: os.getenv('ACBO_BASE_URL', DEFAULT_BASE_URL))
    model: str = field(default_factory=lambda: os.getenv('ACBO_MODEL', DEFAULT_MODEL))
    temperature: float = 0.0
    max_tokens: int = 8
    timeout_s: float = REQUEST_TIMEOUT_S
    retries: int = REQUEST_RETRIES
    backoff_s: float = RETRY_BACKOFF_S

    def __post_init__(self):
        if self.retries < 0:
            raise OracleConfigError(f"retries must be non-negative, got {self.retries}")
        if self.timeout_s <= 0:
            raise OracleConfigError(f"timeout_s must be positive, got {self.timeout_s}")

    @classmethod
    def from_dict(cls, data: dict) -> 'LlmEndpointConfig':
        defaults = cls()
        return cls(
            base_url=data.get('base_url', defaults.base_url),
            model=data.get('model', defaults.model),
            temperature=float(data.get('temperature', defaults.temperature)),
            max_tokens=int(data.get('max_tokens', defaults.max_tokens)),
            timeout_s=float(data.get('timeout_s', defaults.timeout_s)),
            retries=int(data.get('retries', defaults.retries)),
            backoff_s=float(data.get('backoff_s', defaults.backoff_s))
        )

    def to_dict(self) -> dict:
        return {
            'base_url': self.base_url,
            'model': self.model,
            'temperature': self.temperature,
            'max_tokens': self.max_tokens,
            'timeout_s': self.timeout_s,
            'retries': self.retries,
            'backoff_s': self.backoff_s
        }


class ChatCompletionClient:
    """Minimal chat-completion client over requests."""

    def __init__(self, endpoint: Optional[LlmEndpointConfig] = None, api_key: Optional[str] = None):
        """
        Initialize the client.

        Args:
            endpoint: Endpoint settings (defaults from ACBO_BASE_URL / ACBO_MODEL)
            api_key: Bearer token. If not provided, reads from ACBO_API_KEY.
        """
        self.endpoint = endpoint or LlmEndpointConfig()
        self._api_key = api_key or os.getenv(API_KEY_ENV)

    @property
    def api_key(self) -> str:
        """Get the API key, raising an error if not configured."""
        if not self._api_key:
            raise OracleConfigError(f"{API_KEY_ENV} is not configured")
        return self._api_key

    @property
    def model(self) -> str:
        return self.endpoint.model

    def _make_request(self, payload: dict) -> dict:
        """
        POST one chat-completion request.

        Raises:
            OracleConfigError: If the API key is not configured
            OracleUnavailableError: If every attempt fails
        """
        url = f"{self.endpoint.base_url.rstrip('/')}/chat/completions"
        headers = {'Authorization': f"Bearer {self.api_key}", 'Content-Type': 'application/json'}
        last_error = None
        for attempt in range(self.endpoint.retries + 1):
            try:
                response = requests.post(url, json=payload, headers=headers, timeout=self.endpoint.timeout_s)
                response.raise_for_status()
                return response.json()
            except requests.exceptions.HTTPError as e:
                last_error = f"HTTP error: {e}"
            except requests.exceptions.RequestException as e:
                last_error = f"Request failed: {e}"
            except ValueError as e:
                last_error = f"Invalid JSON body: {e}"
            logger.warning(f"Chat completion attempt {attempt + 1} failed: {last_error}")
            if attempt < self.endpoint.retries and self.endpoint.backoff_s > 0:
                time.sleep(self.endpoint.backoff_s * (attempt + 1))
        raise OracleUnavailableError(last_error or "Chat completion failed")

    def complete(self, prompt: str, max_tokens: Optional[int] = None) -> str:
        """Send a single-turn user prompt and return the reply text."""
        payload = {
            'model': self.endpoint.model,
            'messages': [{'role': 'user', 'content': prompt}],
            'temperature': self.endpoint.temperature,
            'max_tokens': max_tokens or self.endpoint.max_tokens
        }
        data = self._make_request(payload)
        try:
            return data['choices'][0]['message']['content'] or ''
        except (KeyError, IndexError, TypeError):
            raise OracleUnavailableError(f"Unexpected completion payload: {str(data)[:200]}")


class LlmOracle(InterventionalOracle):
    """
    Oracle that asks a chat model, M sequential calls per query.

    An unparseable reply is retried once, then counted as a 0 vote.
    """

    def __init__(self, client: ChatCompletionClient, config: OracleConfig, transcript=None):
        self._client = client
        self._config = config
        self._transcript = transcript
        self._run_key = (None, None)
        self._rounds = 0

    @property
    def model_name(self) -> str:
        return self._client.model

    def bind(self, instance_id: str, trial: int) -> 'LlmOracle':
        view = LlmOracle(self._client, self._config, transcript=self._transcript)
        view._run_key = (instance_id, trial)
        return view

    def _vote(self, prompt: str) -> int:
        for attempt in range(2):
            reply = self._client.complete(prompt)
            bit = parse_yes_no(reply)
            if bit is not None:
                return bit
            logger.warning(f"Unparseable oracle reply (attempt {attempt + 1}): {reply!r}")
        logger.warning("Counting unparseable reply as 'no'")
        return 0

    def query(self, q: OracleQuery, rng_seed: SeedLike = None) -> OracleResponse:
        prompt = render_intervention_prompt(q)
        self._rounds += 1
        started = time.perf_counter()
        votes = [self._vote(prompt) for _ in range(self._config.votes_m)]
        response = OracleResponse.from_votes(votes, latency_ms=(time.perf_counter() - started) * 1000.0)
        if self._transcript is not None:
            self._transcript.record(prompt, response, self.model_name, run_key=self._run_key,
                                    round_index=self._rounds)
        return response


HYPOTHESIS_PROMPT = (
    "{premise}\n\n"
    "List up to {n} different causal graphs over these variables that are consistent with every "
    "statement above. Reply with JSON only, in the form "
    '{{"graphs": [[["A", "B"], ["B", "C"]], ...]}} where each graph is a list of directed edges '
    "[cause, effect]."
)


def render_hypothesis_prompt(p: PremiseSet, n: int) -> str:
    return HYPOTHESIS_PROMPT.format(premise=premise_text(p), n=n)


def parse_hypothesis_reply(reply: str, p: PremiseSet) -> list[Dag]:
    """
    Extract the graphs from a hypothesis-generation reply.

    Graphs that are cyclic, name unknown variables or contradict the premise
    are dropped and logged.
    """
    match = re.search(r'\{.*\}', reply or '', flags=re.DOTALL)
    if match is None:
        logger.warning("Hypothesis reply contains no JSON object")
        return []
    try:
        graphs = json.loads(match.group(0)).get('graphs', [])
    except (json.JSONDecodeError, AttributeError) as e:
        logger.warning(f"Hypothesis reply is not valid JSON: {e}")
        return []
    found: dict[Dag, None] = {}
    for edges in graphs if isinstance(graphs, list) else []:
        try:
            g = Dag.from_named_edges(p.names, [tuple(edge) for edge in edges])
        except (CausalServiceError, TypeError, ValueError) as e:
            logger.info(f"Dropping proposed graph {edges!r}: {e}")
            continue
        if not satisfies(g, p):
            logger.info(f"Dropping proposed graph {g.describe()}: inconsistent with the premise")
            continue
        found.setdefault(g)
    return list(found)


def propose_hypotheses(client: ChatCompletionClient, p: PremiseSet, n: int) -> list[Dag]:
    """Ask the model for up to n premise-consistent graphs."""
    if n < 1:
        raise InputError(f"n must be positive, got {n}")
    reply = client.complete(render_hypothesis_prompt(p, n), max_tokens=64 * n * max(p.num_vars, 1))
    return parse_hypothesis_reply(reply, p)[:n]
