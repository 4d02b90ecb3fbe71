"""
Causal discovery services package.

Graph primitives, the independence engine, premise text, the interventional
oracle providers, the discrimination loop and the benchmark/evaluation
tooling built on them.
"""

from .errors import (
    CausalServiceError,
    ConfigError,
    DataError,
    OracleError,
)
from .dag_core import Dag, Intervention, RelationTemplate, VarPair, enumerate_dags, random_dag, r_hat
from .indep_engine import CiStatement, Hypothesis, PremiseSet, SearchMode, consistent_dags, d_separated, entails
from .premise_text import CiPolicy, parse_premise, render_premise
from .oracle_service import InterventionalOracle, OracleConfig, OracleMode, OracleQuery, OracleResponse, build_oracle
from .acbo_loop import AcboConfig, HypothesisMode, Posterior, RunResult, generate_hypotheses, run
from .benchgen import BenchInstance, GenerationPolicy, generate
from .metrics import MetricsReport, compute_metrics

__all__ = [
    'CausalServiceError', 'ConfigError', 'DataError', 'OracleError',
    'Dag', 'Intervention', 'RelationTemplate', 'VarPair', 'enumerate_dags', 'random_dag', 'r_hat',
    'CiStatement', 'Hypothesis', 'PremiseSet', 'SearchMode', 'consistent_dags', 'd_separated', 'entails',
    'CiPolicy', 'parse_premise', 'render_premise',
    'InterventionalOracle', 'OracleConfig', 'OracleMode', 'OracleQuery', 'OracleResponse', 'build_oracle',
    'AcboConfig', 'HypothesisMode', 'Posterior', 'RunResult', 'generate_hypotheses', 'run',
    'BenchInstance', 'GenerationPolicy', 'generate',
    'MetricsReport', 'compute_metrics',
]
