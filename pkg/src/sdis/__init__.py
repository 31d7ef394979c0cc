"""Rare-event failure probability estimation by sequential directional
importance sampling, with an active-learning multi-root finder along
rays and a subset-simulation fallback/baseline."""

from .engine import (FirstLevel, LevelRecord, MoveResult, RunResult, SdisParams,
                     adapt_sigma, conditional_prob, estimate_first_level,
                     failure_intervals, level_ratio, mcmc_move, resample, run)
from .experiment import (AggregateReport, ExperimentConfig, RunRow, emit,
                         rel_eff, run_experiment)
from .kriging import (KrigingModel, RootSet, SearchInterval, find_roots,
                      fit_kriging, initial_design, learning_value, scale_roots,
                      search_interval)
from .model import (BenchmarkCase, LimitState, MarginalSpec, benchmark,
                    benchmark_names, directional_value)
from .specfun import (ChiDist, IntervalUnion, chi_cdf, chi_interval_masses,
                      chi_pdf, chi_quantile, chi_quantile_upper, chi_sf,
                      gamma_cdf, gamma_quantile, sample_truncated_chi,
                      std_normal_cdf, std_normal_logcdf, std_normal_pdf,
                      std_normal_quantile)
from .sus import SusParams, SusResult, acs_chain_step, run_sus, update_scale

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # limit states and benchmarks
    "LimitState", "MarginalSpec", "BenchmarkCase", "benchmark",
    "benchmark_names", "directional_value",
    # special functions and radial machinery
    "ChiDist", "IntervalUnion", "std_normal_cdf", "std_normal_logcdf",
    "std_normal_pdf", "std_normal_quantile", "gamma_cdf", "gamma_quantile",
    "chi_cdf", "chi_sf", "chi_pdf", "chi_quantile", "chi_quantile_upper",
    "chi_interval_masses", "sample_truncated_chi",
    # root finding
    "SearchInterval", "search_interval", "KrigingModel", "fit_kriging",
    "learning_value", "initial_design", "RootSet", "find_roots", "scale_roots",
    # sequential directional sampler
    "SdisParams", "RunResult", "FirstLevel", "LevelRecord", "MoveResult",
    "failure_intervals", "conditional_prob", "estimate_first_level",
    "adapt_sigma", "level_ratio", "resample", "mcmc_move", "run",
    # subset simulation
    "SusParams", "SusResult", "run_sus", "acs_chain_step", "update_scale",
    # experiments
    "ExperimentConfig", "RunRow", "AggregateReport", "rel_eff",
    "run_experiment", "emit",
]
