"""Coverage and rate of a two-tier vehicular downlink on a Poisson road layout.

Analytic evaluation (``analysis``, ``load``) and an independent Monte-Carlo
simulator (``montecarlo``) of the same network.
"""

from .analysis import CoverageQuery, Event, association_prob, coverage_probability
from .channel import EquivalentDensities, NetworkParams, equivalent_densities
from .errors import (DegenerateConditioningError, DomainError, NumericError,
                     ParameterError, RegimeError)
from .load import RateQuery, rate_coverage, tier1_mean_load, tier2_load_pmf
from .montecarlo import TrialConfig, run_trial, run_trials

__version__ = "0.1.0"
