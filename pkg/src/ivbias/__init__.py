"""Instrumental-variable estimands, structural mean models and bounds for binary data."""

from .errors import *  # noqa: F401,F403
from .scenario import (
    CalibrationSpec,
    CausalTargets,
    ObservationalLaw,
    Scenario,
    calibrate,
    causal_relative_risk,
    causal_targets,
    observational_law,
    simulate,
)
from .estimands import EstimandSet, JointMoments, estimate, estimands_of_law, moments
from .bounds import BoundInterval, bound, bound_all, instrumental_inequality
from .empirical import (
    Dataset,
    empirical_moments,
    plugin_estimates,
    read_dataset,
    solve_additive_smm,
    solve_msmm_general,
    write_dataset,
)
from .study import PRESETS, BiasRow, GridSpec, expand_grid, render, run_bias_study

__version__ = "0.1.0"
