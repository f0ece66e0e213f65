"""Asymmetric stochastic volatility with calendar covariates.

Estimates percent log returns with day-of-week and holiday effects in
both the return and log-volatility equations, using a hybrid Gibbs /
random-walk Metropolis-Hastings sampler, with synthetic-data generation
and convergence diagnostics.
"""

from .conditionals import (
    GaussianMoments,
    beta_conditional,
    gamma_conditional,
    h_last_conditional,
    log_fcd_h,
    log_fcd_phi_rho_sigma,
)
from .diagnostics import ParamSummary, geweke_cd, inefficiency_factor, summarize
from .model import (
    Dataset,
    LatentPath,
    ParameterState,
    PriorConfig,
    log_joint_posterior,
    log_prior,
    prior_moments_phi,
)
from .sampler import ChainOutput, McmcConfig, SamplerError, adapt_step, mh_scalar_step, run_chain
from .simulate import SimSpec, simulate, simulated_dataset

__all__ = [
    "Dataset",
    "ParameterState",
    "LatentPath",
    "PriorConfig",
    "log_prior",
    "log_joint_posterior",
    "prior_moments_phi",
    "GaussianMoments",
    "beta_conditional",
    "gamma_conditional",
    "log_fcd_phi_rho_sigma",
    "log_fcd_h",
    "h_last_conditional",
    "McmcConfig",
    "ChainOutput",
    "SamplerError",
    "run_chain",
    "mh_scalar_step",
    "adapt_step",
    "SimSpec",
    "simulate",
    "simulated_dataset",
    "ParamSummary",
    "geweke_cd",
    "inefficiency_factor",
    "summarize",
]

__version__ = "0.1.0"
