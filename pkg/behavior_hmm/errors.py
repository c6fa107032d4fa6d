"""
Exception hierarchy for behavior-hmm.

Library code raises these; only the command-line front end turns them into
exit codes.
"""

from typing import List, Optional, Sequence


class BehaviorHmmError(Exception):
    """Base exception for all behavior-hmm failures."""
    pass


class ValidationError(BehaviorHmmError):
    """Raised when input data or configuration is invalid."""
    pass


class ConfigurationError(ValidationError):
    """Raised when a configuration value is out of range."""
    pass


class ModelValidationError(ValidationError):
    """Raised when an HMM violates its probability invariants."""

    def __init__(self, message: str, violations: Optional[Sequence[str]] = None):
        self.violations: List[str] = list(violations or [])
        if self.violations:
            message = f"{message}: " + "; ".join(self.violations)
        super().__init__(message)


class OutOfAlphabetError(ValidationError):
    """Raised when a symbol is not in [0, M)."""

    def __init__(self, symbol: int, n_symbols: int):
        self.symbol = symbol
        self.n_symbols = n_symbols
        super().__init__(f"Symbol {symbol} is outside the alphabet [0, {n_symbols}).")


class EmptySequenceError(ValidationError):
    """Raised when a probability is requested for an empty sequence."""
    pass


class AlphabetMismatchError(ValidationError):
    """Raised when behavior models disagree on the alphabet size."""
    pass


class WitnessMismatchError(ValidationError):
    """Raised when a normalizer table was not built from the model it ships with."""
    pass


class NonMonotonicTimeError(ValidationError):
    """Raised when a measurement does not advance time."""
    pass


class MeasurementError(ValidationError):
    """Raised when a position measurement is not finite."""
    pass


class UnknownBehaviorError(ValidationError):
    """Raised when a behavior name does not match any template."""

    def __init__(self, name: str, valid: Sequence[str]):
        self.name = name
        self.valid = list(valid)
        super().__init__(
            f"Unknown behavior '{name}'. Valid behaviors: {', '.join(self.valid)}."
        )


class TrainingDataError(ValidationError):
    """Raised when training data cannot be used, e.g. a run without events."""
    pass


class InputFormatError(ValidationError):
    """Raised when a line of an input stream is malformed."""

    def __init__(self, message: str, line_number: int, source: str = ""):
        self.line_number = line_number
        self.source = source
        where = f"{source}:{line_number}" if source else f"line {line_number}"
        super().__init__(f"{where}: {message}")


class UndefinedPosteriorError(BehaviorHmmError):
    """Raised when every behavior has zero probability."""
    pass


class NodeBudgetExceededError(BehaviorHmmError):
    """Raised when the normalizer search would visit more nodes than allowed."""

    def __init__(self, required: int, allowed: int):
        self.required = required
        self.allowed = allowed
        super().__init__(
            f"Normalizer search needs more than {allowed} nodes (exhaustive worst case {required}). "
            "Reduce the alphabet size or horizon, or raise the node budget."
        )


class StorageError(BehaviorHmmError):
    """Raised when a file cannot be read or written."""
    pass
