"""
Exception hierarchy for the causal discovery services.

Every error raised by the engine derives from CausalServiceError so callers
can catch the whole family. The three intermediate classes map onto the CLI
exit codes (config 2, oracle 3, data 4).
"""

from typing import Optional


class CausalServiceError(Exception):
    """Base exception for causal discovery service errors."""
    exit_code = 1


class ConfigError(CausalServiceError):
    """Raised when a configuration value violates its documented bounds."""
    exit_code = 2


class OracleConfigError(ConfigError):
    """Raised when an oracle configuration is invalid (eta >= 0.5, even M, ...)."""
    pass


class AcboConfigError(ConfigError):
    """Raised when loop hyperparameters are out of range."""
    pass


class ExperimentConfigError(ConfigError):
    """Raised when an experiment config file is missing fields or paths."""
    pass


class OracleError(CausalServiceError):
    """Base class for failures of the interventional oracle."""
    exit_code = 3


class OracleUnavailableError(OracleError):
    """Raised when the LLM endpoint keeps failing after all retries."""
    pass


class TranscriptIncompleteError(OracleError):
    """Raised when a replay transcript has no record for a query."""
    pass


class DataError(CausalServiceError):
    """Base class for bad inputs and unusable data."""
    exit_code = 4


class InputError(DataError):
    """Raised when an argument is out of range or inconsistent."""
    pass


class StructuralIntegrityError(DataError):
    """Raised when a graph that must be acyclic contains a cycle."""
    pass


class CapacityError(DataError):
    """Raised when exhaustive enumeration is requested above the cap."""
    pass


class ParseError(DataError):
    """Raised when text or JSONL input cannot be parsed."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UnsatisfiablePremiseError(DataError):
    """Raised when no DAG is consistent with a premise."""
    pass


class DegenerateHypothesisSpaceError(DataError):
    """Raised when fewer than two distinct candidate graphs exist."""

    def __init__(self, message: str, graphs: Optional[list] = None):
        super().__init__(message)
        self.graphs = list(graphs or [])


class LoopError(DataError):
    """Loop failure that carries the trajectory recorded so far."""

    def __init__(self, message: str, trajectory: Optional[list] = None):
        super().__init__(message)
        self.trajectory = list(trajectory or [])


class StalledDiscriminationError(LoopError):
    """Raised when no query can separate the remaining hypotheses."""
    pass


class ContradictionError(LoopError):
    """Raised when a noiseless answer disagrees with every hypothesis."""
    pass
