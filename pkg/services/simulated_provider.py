"""
Simulated interventional oracle.

Answers from the generating graph: each vote is the true response
r_hat(truth, (i, j)) flipped independently with probability eta.
"""

import logging

import numpy as np

from .dag_core import Dag, SeedLike, r_hat
from .errors import InputError
from .oracle_service import InterventionalOracle, OracleConfig, OracleQuery, OracleResponse

logger = logging.getLogger(__name__)


class SimulatedOracle(InterventionalOracle):
    """Noisy oracle backed by a known DAG; the context target is ignored."""

    def __init__(self, truth: Dag, config: OracleConfig):
        self._truth = truth
        self._config = config

    @property
    def truth(self) -> Dag:
        return self._truth

    def query(self, q: OracleQuery, rng_seed: SeedLike = None) -> OracleResponse:
        if q.premise.num_vars != self._truth.num_vars:
            raise InputError(
                f"Query over {q.premise.num_vars} variables sent to an oracle over {self._truth.num_vars}"
            )
        rng = np.random.default_rng(rng_seed)
        correct = r_hat(self._truth, q.pair)
        flips = rng.random(self._config.votes_m) < self._config.eta
        votes = tuple(int(correct ^ bool(f)) for f in flips)
        return OracleResponse.from_votes(votes)
