"""Cavity cooling of spin ensembles.

Rate-equation propagation for a single spin-J subspace, a full spin-cavity
Lindblad simulator for validation at small ensemble sizes, and analysis
tools for effective cooling times.
"""

from .errors import (
    ConfigError,
    DomainError,
    FitWindowError,
    NumericalError,
    ResourceLimitError,
    SweepError,
)
from .model import (
    DerivedRates,
    PhysicalParams,
    RegimeReport,
    cavity_temperature,
    check_regime,
    derived_rates,
    thermal_occupation,
)
from .markov import (
    PopulationVector,
    RateMatrix,
    Trajectory,
    build_rate_matrix,
    coefficients,
    equilibrium_jx,
    expectation_jx,
    maximally_mixed,
    propagate,
    steady_state,
)

__version__ = "0.1.0"
