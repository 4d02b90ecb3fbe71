"""
Monte-Carlo convergence study of the discrimination loop.

Each trial draws n interventionally distinguishable DAGs (distinct reach
matrices), picks one uniformly as the truth and runs the loop against a
simulated oracle whose majority-vote error equals the update's eta_eff.
Success is recorded after the theoretical round count and after the
full budget.
"""

import logging
import math
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
from cachetools import LRUCache, cached

from .acbo_loop import AcboConfig, StopRule, run, theoretical_rounds
from .dag_core import Dag, enumerate_dags
from .errors import InputError
from .indep_engine import PremiseSet
from .oracle_service import OracleConfig
from .simulated_provider import SimulatedOracle

logger = logging.getLogger(__name__)
_CACHE_LOCK = threading.RLock()

FAMILY_DEPTHS = (4, 5)


@cached(LRUCache(maxsize=4), lock=_CACHE_LOCK)
def _distinguishable_dags(d: int) -> tuple[Dag, ...]:
    """One DAG per distinct reach matrix, in enumeration order."""
    seen = {}
    for g in enumerate_dags(d):
        seen.setdefault(g.reach_matrix.tobytes(), g)
    return tuple(seen.values())


def distinguishable_family(n: int, rng: np.random.Generator) -> list[Dag]:
    """n DAGs whose interventional predictions differ pairwise."""
    for d in FAMILY_DEPTHS:
        pool = _distinguishable_dags(d)
        if len(pool) >= n:
            return [pool[k] for k in rng.choice(len(pool), size=n, replace=False)]
    raise InputError(f"Cannot build {n} distinguishable hypotheses on up to {FAMILY_DEPTHS[-1]} variables")


@dataclass
class ConvergenceSettings:
    n: int = 16
    eta: float = 0.1
    trials: int = 2000
    budget_t: int = 20
    votes_m: int = 1
    explore_eps: float = 0.0
    stop_delta: float = 0.01
    stop_rule: StopRule = StopRule.MAP_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise InputError(f"n must be at least 2, got {self.n}")
        if self.trials < 1:
            raise InputError(f"trials must be positive, got {self.trials}")


@dataclass
class ConvergenceSummary:
    n: int
    eta: float
    eta_eff: float
    votes_m: int
    trials: int
    t_star: int
    floor: float
    success_at_t_star: float
    success_at_budget: float
    mean_rounds: float
    fraction_converged: float

    def to_dict(self) -> dict:
        return {
            'n': self.n,
            'eta': self.eta,
            'eta_eff': self.eta_eff,
            'votes_m': self.votes_m,
            'trials': self.trials,
            't_star': self.t_star,
            'floor': self.floor,
            'success_at_t_star': self.success_at_t_star,
            'success_at_budget': self.success_at_budget,
            'mean_rounds': self.mean_rounds,
            'fraction_converged': self.fraction_converged
        }


@dataclass
class TrajectoryPoint:
    trial: int
    round_index: int
    truth_mass: float

    def to_dict(self) -> dict:
        return {'trial': self.trial, 'round': self.round_index, 'truth_mass': self.truth_mass}


def round_bound(n: int, eta_eff: float) -> tuple[int, float]:
    """theoretical_rounds, extended to the noiseless case as ceil(log2 n) with floor 1."""
    if eta_eff == 0:
        return max(1, math.ceil(math.log2(n))), 1.0
    return theoretical_rounds(n, eta_eff)


def run_convergence(settings: ConvergenceSettings,
                    keep_trajectories: bool = True) -> tuple[ConvergenceSummary, list[TrajectoryPoint]]:
    """
    Run the Monte-Carlo trials.

    Returns:
        Tuple of (summary, posterior-mass-of-truth per trial and round)
    """
    cfg = AcboConfig(
        budget_t=settings.budget_t,
        explore_eps=settings.explore_eps,
        eta=settings.eta,
        stop_delta=settings.stop_delta,
        votes_m=settings.votes_m,
        candidates_n=settings.n,
        stop_rule=settings.stop_rule
    )
    oracle_cfg = OracleConfig(eta=settings.eta, votes_m=settings.votes_m)
    eta_eff = cfg.eta_eff
    t_star, floor = round_bound(settings.n, eta_eff)
    logger.info(
        f"Convergence study n={settings.n}, eta={settings.eta}, M={settings.votes_m}: "
        f"T*={t_star}, floor={floor:.4f}, {settings.trials} trials"
    )

    seeds = np.random.SeedSequence(settings.seed).spawn(settings.trials)
    hits_star = hits_budget = converged = 0
    rounds = []
    points = []
    for trial, seq in enumerate(seeds):
        rng = np.random.default_rng(seq)
        family = distinguishable_family(settings.n, rng)
        truth = int(rng.integers(settings.n))
        premise = PremiseSet(family[0].num_vars, ())
        result = run(premise, family, SimulatedOracle(family[truth], oracle_cfg), cfg, rng_seed=rng)
        masses = [1.0 / settings.n] + [float(log.posterior_after.weights[truth]) for log in result.trajectory]
        at_star = result.trajectory[min(t_star, result.rounds_used) - 1].posterior_after if result.trajectory else None
        hits_star += int(at_star is not None and at_star.map_index == truth)
        hits_budget += int(result.map_index == truth)
        converged += int(result.converged)
        rounds.append(result.rounds_used)
        if keep_trajectories:
            points.extend(TrajectoryPoint(trial, t, m) for t, m in enumerate(masses))

    summary = ConvergenceSummary(
        n=settings.n,
        eta=settings.eta,
        eta_eff=eta_eff,
        votes_m=settings.votes_m,
        trials=settings.trials,
        t_star=t_star,
        floor=floor,
        success_at_t_star=hits_star / settings.trials,
        success_at_budget=hits_budget / settings.trials,
        mean_rounds=float(np.mean(rounds)),
        fraction_converged=converged / settings.trials
    )
    logger.info(
        f"Success after T*: {summary.success_at_t_star:.4f}, after T={settings.budget_t}: "
        f"{summary.success_at_budget:.4f} (floor {floor:.4f})"
    )
    return summary, points


def expected_log_ratio_drift(eta: float) -> float:
    """Mean change of ln(pi_truth / pi_other) per correctly modelled discriminating query, in nats."""
    if not 0.0 < eta < 0.5:
        raise InputError(f"eta must lie in (0, 0.5), got {eta}")
    return (1.0 - 2.0 * eta) * math.log((1.0 - eta) / eta)
