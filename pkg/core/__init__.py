"""
Core module for semi-Markov quantum dynamics
Renewal functions, superoperators, local and non-local generators, solvers
"""

from .config import ConfigManager, RunConfig, get_config, reset_config
from .errors import (AccuracyError, ConfigError, InvariantViolationError, NumericalError,
                     SemiMarkovError, TCLSingularError, ValidationError)
from .generators import (ChannelFunction, GeneratorKind, GeneratorSpec, assemble, fixed_point_tcl,
                         nz_channel_from_tcl, nz_from_semimarkov, redfield_channel,
                         tcl_channel_from_nz, to_nz, to_redfield, to_tcl)
from .montecarlo import RngStream, estimate_counts, estimate_state, sample_waiting_time
from .rational_laplace import ExpPolynomial, RationalLT, inverse_laplace, partial_fractions
from .scenarios import HazardModel, SemiMarkovModel
from .solvers import TimeGrid, Trajectory, divisibility, dynamical_map, solve_nz, solve_series, solve_tcl
from .superop import DampingBasis, DensityMatrix, KrausMap, SuperOperator, damping_basis, liouville
from .waiting_time import Convolution, Erlang, Exponential, Mixture, build, jump_statistics

__version__ = "1.0.0"
__all__ = [
    "ConfigManager",
    "RunConfig",
    "get_config",
    "reset_config",
    "SemiMarkovError",
    "ConfigError",
    "ValidationError",
    "NumericalError",
    "TCLSingularError",
    "AccuracyError",
    "InvariantViolationError",
    "RationalLT",
    "ExpPolynomial",
    "inverse_laplace",
    "partial_fractions",
    "Exponential",
    "Erlang",
    "Mixture",
    "Convolution",
    "build",
    "jump_statistics",
    "KrausMap",
    "SuperOperator",
    "DensityMatrix",
    "DampingBasis",
    "damping_basis",
    "liouville",
    "ChannelFunction",
    "GeneratorKind",
    "GeneratorSpec",
    "nz_from_semimarkov",
    "tcl_channel_from_nz",
    "nz_channel_from_tcl",
    "redfield_channel",
    "fixed_point_tcl",
    "to_tcl",
    "to_nz",
    "to_redfield",
    "assemble",
    "SemiMarkovModel",
    "HazardModel",
    "TimeGrid",
    "Trajectory",
    "solve_tcl",
    "solve_nz",
    "solve_series",
    "dynamical_map",
    "divisibility",
    "RngStream",
    "sample_waiting_time",
    "estimate_counts",
    "estimate_state",
]
