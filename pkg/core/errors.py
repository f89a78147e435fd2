"""
Exception hierarchy for the semi-Markov dynamics toolkit
Every error carries the process exit code the CLI reports for it
"""

from typing import Optional, Sequence, Tuple


class SemiMarkovError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1


# --- Input problems (exit code 2) ---

class ConfigError(SemiMarkovError):
    """Invalid configuration file or command-line input"""
    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ValidationError(SemiMarkovError):
    """A domain value violates the invariants of its type"""
    exit_code = 2


# --- Numerical and solver failures (exit code 3) ---

class NumericalError(SemiMarkovError):
    """Base class for numerical and solver failures"""
    exit_code = 3


class InvalidTransformError(NumericalError):
    """Zero denominator or improper rational function"""


class DegeneratePolesError(NumericalError):
    """Roots could not be clustered unambiguously"""

    def __init__(self, message: str, cluster: Sequence[complex] = ()):
        self.cluster = tuple(cluster)
        super().__init__(f"{message} (cluster: {list(self.cluster)})")


class UnsupportedTimeError(NumericalError):
    """Numerical Laplace inversion requested at t <= 0"""


class SaturatedSurvivalError(NumericalError):
    """Survival probability underflowed while evaluating the hazard rate"""

    def __init__(self, message: str, last_valid_t: Optional[float] = None):
        self.last_valid_t = last_valid_t
        super().__init__(message)


class DeconvolutionUnstableError(NumericalError):
    """First-kind Volterra system is too ill-conditioned"""

    def __init__(self, message: str, condition: float = float("inf")):
        self.condition = condition
        super().__init__(message)


class DefectiveGeneratorError(NumericalError):
    """Superoperator is not diagonalizable within tolerance"""


class NotAGeneratorError(NumericalError):
    """Superoperator is not trace-annihilating or not hermiticity preserving"""


class TCLSingularError(NumericalError):
    """Time-local generator diverges inside the requested range"""

    def __init__(self, message: str, bracket: Optional[Tuple[float, float]] = None):
        self.bracket = bracket
        if bracket is not None:
            message = f"{message} (bracket: [{bracket[0]:.12g}, {bracket[1]:.12g}])"
        super().__init__(message)


class AccuracyError(NumericalError):
    """Step-halving check disagrees beyond tolerance"""

    def __init__(self, message: str, discrepancy: float = float("nan")):
        self.discrepancy = discrepancy
        super().__init__(message)


class TruncationError(NumericalError):
    """Jump-count series tail cannot be brought below target"""


class ConvergenceError(NumericalError):
    """Fixed-point iteration did not converge"""

    def __init__(self, message: str, residual: float = float("nan")):
        self.residual = residual
        super().__init__(message)


# --- Invariant violations (exit code 4) ---

class InvariantViolationError(SemiMarkovError):
    """A physical or mathematical invariant is broken"""
    exit_code = 4
