"""Simulation laboratory for critical rank-1 inhomogeneous random graphs.

Vertices carry i.i.d. non-negative integer types; pairs connect
independently with probability min(1, x*y*(1 + a*n^(-1/3))/n). At the
critical point (second type moment equal to one) the ordered component
sizes, rescaled by n^(-2/3), converge to the ordered excursion lengths
of a reflected Brownian motion with parabolic drift. This package
simulates both sides at scale and verifies the convergence and its
drift and variance coefficients statistically.
"""

from .config import ExperimentConfig, load_config
from .dist import (
    MomentSummary,
    TypeCounts,
    TypePmf,
    compute_moments,
    sample_types,
    size_biased_pmf,
    validate_max_type,
)
from .limit import ExcursionList, LimitParams, LimitPath, extract_excursions, reflect_path, sample_gamma, simulate_limit_path
from .rng import Stream, child_seed, generator
from .walk import ComponentCensus, WalkState, WalkTrace, census_from_trace, drift_qv_curves, init_walk, rescaled_path, run_walk, step_walk

__all__ = [
    "ComponentCensus",
    "ExcursionList",
    "ExperimentConfig",
    "LimitParams",
    "LimitPath",
    "MomentSummary",
    "Stream",
    "TypeCounts",
    "TypePmf",
    "WalkState",
    "WalkTrace",
    "census_from_trace",
    "child_seed",
    "compute_moments",
    "drift_qv_curves",
    "extract_excursions",
    "generator",
    "init_walk",
    "load_config",
    "reflect_path",
    "rescaled_path",
    "run_walk",
    "sample_gamma",
    "sample_types",
    "simulate_limit_path",
    "size_biased_pmf",
    "step_walk",
    "validate_max_type",
]

__version__ = "0.1.0"
