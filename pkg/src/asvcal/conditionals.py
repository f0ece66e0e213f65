"""Full conditional distributions of the sampler blocks.

Closed-form Gaussian moments for the two coefficient vectors, and log
full-conditional densities (up to constants) for (phi, rho, sigma2) and
for each latent h_t.  Every function here is a pure function of its
arguments; consistency with :func:`asvcal.model.log_joint_posterior` is
what the test suite enforces (a conditional is, by definition, the joint
with everything else held fixed).

Precision matrices are accumulated as sums of rank-1 terms and solved
once per call through a Cholesky factorization; nothing is inverted
explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import Dataset, LatentPath, ParameterState, PriorConfig

__all__ = [
    "GaussianMoments",
    "beta_conditional",
    "gamma_conditional",
    "log_fcd_phi_rho_sigma",
    "log_fcd_h",
    "h_last_conditional",
]


@dataclass(frozen=True)
class GaussianMoments:
    """Mean vector and covariance matrix of a Gaussian full conditional."""

    mean: np.ndarray
    cov: np.ndarray


def _prior_precision(cov: np.ndarray, mean: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    chol = cho_factor(cov, lower=True)
    k = cov.shape[0]
    prec = cho_solve(chol, np.eye(k))
    return prec, prec @ mean


def _solve_moments(precision: np.ndarray, shift: np.ndarray) -> GaussianMoments:
    chol = cho_factor(precision, lower=True)
    mean = cho_solve(chol, shift)
    cov = cho_solve(chol, np.eye(precision.shape[0]))
    cov = 0.5 * (cov + cov.T)
    return GaussianMoments(mean=mean, cov=cov)


def beta_conditional(
    state: ParameterState,
    path: LatentPath,
    data: Dataset,
    prior: PriorConfig,
) -> GaussianMoments:
    """Gaussian moments of beta given everything else.

    Weighted regression of an adjusted response on x_t with weights
    1 / ((1 - rho^2) exp(h_t)); the adjustment subtracts the part of y_t
    explained by the transition innovation when rho != 0.
    """
    y = data.returns
    X = data.design
    h = path.h
    T = y.size
    phi, rho = state.phi, state.rho
    sigma = math.sqrt(state.sigma2)

    xg = X @ state.gamma
    trans_dev = h[1:] - xg[1:] - phi * (h[:T] - xg[:T])
    response = y - (rho / sigma) * np.exp(0.5 * h[:T]) * trans_dev
    weights = 1.0 / ((1.0 - rho * rho) * np.exp(h[:T]))

    Xt = X[:T]
    prior_prec, prior_shift = _prior_precision(prior.beta_cov, prior.beta_mean)
    precision = Xt.T @ (Xt * weights[:, None]) + prior_prec
    shift = Xt.T @ (weights * response) + prior_shift
    return _solve_moments(precision, shift)


def gamma_conditional(
    state: ParameterState,
    path: LatentPath,
    data: Dataset,
    prior: PriorConfig,
) -> GaussianMoments:
    """Gaussian moments of gamma given everything else.

    Regression of h_{t+1} - phi h_t (leverage-adjusted) on the quasi
    differences x_{t+1} - phi x_t, plus the initial-state term
    (1 - phi^2) x_1 x_1' / sigma2.
    """
    y = data.returns
    X = data.design
    h = path.h
    T = y.size
    phi, rho, sigma2 = state.phi, state.rho, state.sigma2
    sigma = math.sqrt(sigma2)

    xb = X[:T] @ state.beta
    diffs = X[1:] - phi * X[:T]
    response = h[1:] - phi * h[:T] - rho * sigma * np.exp(-0.5 * h[:T]) * (y - xb)
    denom = (1.0 - rho * rho) * sigma2

    prior_prec, prior_shift = _prior_precision(prior.gamma_cov, prior.gamma_mean)
    init_w = (1.0 - phi * phi) / sigma2
    precision = init_w * np.outer(X[0], X[0]) + (diffs.T @ diffs) / denom + prior_prec
    shift = init_w * X[0] * h[0] + diffs.T @ response / denom + prior_shift
    return _solve_moments(precision, shift)


def log_fcd_phi_rho_sigma(
    phi: float,
    rho: float,
    sigma2: float,
    state_rest: ParameterState,
    path: LatentPath,
    data: Dataset,
    prior: PriorConfig,
) -> float:
    """Log full conditional of (phi, rho, sigma2), up to a constant.

    Scaled-Beta prior kernels on phi and rho, inverse-gamma kernel on
    sigma2, the (1 - phi^2)^{1/2} initial normalization, the
    (sigma2)^{-(T+1)/2} (1 - rho^2)^{-T/2} likelihood normalization, the
    h_1 quadratic and the T transition quadratics.  Returns -inf outside
    the open region |phi| < 1, |rho| < 1, sigma2 > 0.
    """
    if not (abs(phi) < 1.0 and abs(rho) < 1.0 and sigma2 > 0.0):
        return -math.inf

    y = data.returns
    X = data.design
    h = path.h
    T = y.size
    sigma = math.sqrt(sigma2)

    xb = X[:T] @ state_rest.beta
    xg = X @ state_rest.gamma

    out = (prior.phi_a - 1.0) * math.log(0.5 * (1.0 + phi))
    out += (prior.phi_b - 1.0) * math.log(0.5 * (1.0 - phi))
    out += (prior.rho_a - 1.0) * math.log(0.5 * (1.0 + rho))
    out += (prior.rho_b - 1.0) * math.log(0.5 * (1.0 - rho))
    out += -(0.5 * prior.sigma_nu + 1.0) * math.log(sigma2)
    out += -prior.sigma_lambda / (2.0 * sigma2)

    out += 0.5 * math.log1p(-phi * phi)
    out += -0.5 * (T + 1) * math.log(sigma2)
    out += -0.5 * T * math.log1p(-rho * rho)
    out += -(1.0 - phi * phi) * (h[0] - xg[0]) ** 2 / (2.0 * sigma2)

    resid = y - xb
    dev = h[1:] - xg[1:] - phi * (h[:T] - xg[:T]) - rho * sigma * np.exp(-0.5 * h[:T]) * resid
    out += -float(dev @ dev) / (2.0 * (1.0 - rho * rho) * sigma2)
    return float(out)


def log_fcd_h(
    t: int,
    path: LatentPath,
    state: ParameterState,
    data: Dataset,
) -> float:
    """Log full conditional of h_t (1-based, 1 <= t <= T), up to a constant.

    t = 1 uses the (1 - phi^2) initial term and the forward transition;
    2 <= t <= T uses both the forward (h_{t+1} | h_t) and backward
    (h_t | h_{t-1}) transitions.  Every case carries the -h_t/2 term and
    the observation quadratic.
    """
    y = data.returns
    X = data.design
    h = path.h
    T = y.size
    if not 1 <= t <= T:
        raise IndexError(f"t must be in 1..{T}, got {t}")

    phi, rho, sigma2 = state.phi, state.rho, state.sigma2
    sigma = math.sqrt(sigma2)
    rs = rho * sigma
    trans_denom = 2.0 * (1.0 - rho * rho) * sigma2

    i = t - 1
    ht = h[i]
    xg = X @ state.gamma
    resid = y[i] - X[i] @ state.beta

    out = -0.5 * ht - resid * resid * math.exp(-ht) / 2.0
    fwd = h[i + 1] - xg[i + 1] - phi * (ht - xg[i]) - rs * math.exp(-0.5 * ht) * resid
    out -= fwd * fwd / trans_denom
    if t == 1:
        out -= (1.0 - phi * phi) * (ht - xg[0]) ** 2 / (2.0 * sigma2)
    else:
        resid_prev = y[i - 1] - X[i - 1] @ state.beta
        bwd = ht - xg[i] - phi * (h[i - 1] - xg[i - 1]) - rs * math.exp(-0.5 * h[i - 1]) * resid_prev
        out -= bwd * bwd / trans_denom
    return float(out)


def h_last_conditional(
    path: LatentPath,
    state: ParameterState,
    data: Dataset,
) -> tuple[float, float]:
    """Exact Gaussian moments of h_{T+1} given h_T, y_T and the parameters."""
    y = data.returns
    X = data.design
    h = path.h
    T = y.size
    phi, rho, sigma2 = state.phi, state.rho, state.sigma2
    sigma = math.sqrt(sigma2)

    xg_T = X[T - 1] @ state.gamma
    xg_last = X[T] @ state.gamma
    resid = y[T - 1] - X[T - 1] @ state.beta
    mean = xg_last + phi * (h[T - 1] - xg_T) + rho * sigma * math.exp(-0.5 * h[T - 1]) * resid
    var = sigma2 * (1.0 - rho * rho)
    return float(mean), float(var)
