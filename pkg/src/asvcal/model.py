"""Core types and joint log density of the asymmetric SV model.

The model couples percent log returns y_t with a latent log-volatility
path h_t, with covariates entering both equations:

    y_t     = x_t' beta + exp(h_t / 2) * eps_t              t = 1..T
    h_{t+1} = x_{t+1}' gamma + phi (h_t - x_t' gamma) + eta_t
    h_1     ~ N(x_1' gamma, sigma2 / (1 - phi^2))

where (eps_t, eta_t) are jointly Gaussian with Var(eps) = 1,
Var(eta) = sigma2 and Cov = rho * sqrt(sigma2).  rho = 0 recovers the
standard (symmetric) SV model.  The design matrix has T+1 rows because
the transition at t = T references x_{T+1}; there are T transition terms
(t = 1..T), matching the sums in the Gibbs conditional moments.

Conditioning eta_t on eps_t gives the transition density used everywhere
in this package:

    h_{t+1} | h_t, y_t ~ N(m_t, sigma2 (1 - rho^2)),
    m_t = x_{t+1}' gamma + phi (h_t - x_t' gamma)
          + rho * sigma * exp(-h_t / 2) * (y_t - x_t' beta).

Priors: Gaussian on beta and gamma, scaled Beta on (phi+1)/2 and
(rho+1)/2, inverse gamma on sigma2.

All Gaussian terms are evaluated in log space via their quadratic forms;
nothing is exponentiated before summation (exp(h_t) would overflow long
before the log density does).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln

__all__ = [
    "Dataset",
    "ParameterState",
    "LatentPath",
    "PriorConfig",
    "log_prior",
    "log_joint_posterior",
    "prior_moments_phi",
]

LOG_2PI = math.log(2.0 * math.pi)


def _readonly(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


def _require_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class Dataset:
    """Observed returns plus the covariate design.

    ``returns`` has length T; ``design`` has T+1 rows (one per return date
    plus one trailing date) and k columns, column 0 identically 1.
    """

    returns: np.ndarray
    design: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        returns = _readonly(self.returns)
        design = _readonly(self.design)
        if returns.ndim != 1:
            raise ValueError("returns must be one-dimensional")
        if design.ndim != 2:
            raise ValueError("design must be two-dimensional")
        T = returns.size
        if T < 3:
            raise ValueError(f"need at least 3 returns, got {T}")
        if design.shape[0] != T + 1:
            raise ValueError(
                f"design must have T+1 = {T + 1} rows, got {design.shape[0]}"
            )
        if design.shape[1] < 1:
            raise ValueError("design needs at least the constant column")
        _require_finite("returns", returns)
        _require_finite("design", design)
        if not np.all(design[:, 0] == 1.0):
            raise ValueError("design column 0 must be identically 1")
        labels = tuple(self.labels)
        if not labels:
            labels = ("const",) + tuple(f"x{j}" for j in range(1, design.shape[1]))
        if len(labels) != design.shape[1]:
            raise ValueError(
                f"got {len(labels)} labels for {design.shape[1]} design columns"
            )
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "labels", labels)

    @property
    def n_obs(self) -> int:
        return self.returns.size

    @property
    def n_covariates(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class ParameterState:
    """One point in parameter space: (beta, gamma, phi, rho, sigma2)."""

    beta: np.ndarray
    gamma: np.ndarray
    phi: float
    rho: float
    sigma2: float

    def __post_init__(self):
        beta = _readonly(self.beta)
        gamma = _readonly(self.gamma)
        if beta.ndim != 1 or gamma.ndim != 1 or beta.size != gamma.size:
            raise ValueError("beta and gamma must be vectors of equal length")
        _require_finite("beta", beta)
        _require_finite("gamma", gamma)
        phi = float(self.phi)
        rho = float(self.rho)
        sigma2 = float(self.sigma2)
        if not abs(phi) < 1.0:
            raise ValueError(f"|phi| < 1 required for stationarity, got {phi}")
        if not abs(rho) < 1.0:
            raise ValueError(f"|rho| < 1 required, got {rho}")
        if not (sigma2 > 0.0 and math.isfinite(sigma2)):
            raise ValueError(f"sigma2 must be a positive real, got {sigma2}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def k(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class LatentPath:
    """Log-volatility path h_1 .. h_{T+1} (length = design row count)."""

    h: np.ndarray

    def __post_init__(self):
        h = _readonly(self.h)
        if h.ndim != 1:
            raise ValueError("h must be one-dimensional")
        _require_finite("h", h)
        object.__setattr__(self, "h", h)

    def __len__(self) -> int:
        return self.h.size


def _check_spd(name: str, mat: np.ndarray) -> None:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None


@dataclass(frozen=True)
class PriorConfig:
    """Prior hyperparameters.

    beta ~ N(beta_mean, beta_cov), gamma ~ N(gamma_mean, gamma_cov),
    (phi+1)/2 ~ Beta(phi_a, phi_b), (rho+1)/2 ~ Beta(rho_a, rho_b),
    sigma2 ~ InvGamma(sigma_nu / 2, sigma_lambda / 2).
    """

    beta_mean: np.ndarray
    beta_cov: np.ndarray
    gamma_mean: np.ndarray
    gamma_cov: np.ndarray
    phi_a: float = 20.0
    phi_b: float = 1.5
    rho_a: float = 1.0
    rho_b: float = 1.0
    sigma_nu: float = 5.0
    sigma_lambda: float = 0.01

    def __post_init__(self):
        beta_mean = _readonly(self.beta_mean)
        gamma_mean = _readonly(self.gamma_mean)
        beta_cov = _readonly(self.beta_cov)
        gamma_cov = _readonly(self.gamma_cov)
        k = beta_mean.size
        if gamma_mean.size != k:
            raise ValueError("beta_mean and gamma_mean must have equal length")
        if beta_cov.shape != (k, k) or gamma_cov.shape != (k, k):
            raise ValueError("prior covariances must be k x k")
        _check_spd("beta_cov", beta_cov)
        _check_spd("gamma_cov", gamma_cov)
        for name in ("phi_a", "phi_b", "rho_a", "rho_b", "sigma_nu", "sigma_lambda"):
            value = float(getattr(self, name))
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a positive real, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "beta_mean", beta_mean)
        object.__setattr__(self, "beta_cov", beta_cov)
        object.__setattr__(self, "gamma_mean", gamma_mean)
        object.__setattr__(self, "gamma_cov", gamma_cov)

    @property
    def k(self) -> int:
        return self.beta_mean.size

    @classmethod
    def defaults(cls, k: int, coef_prior_var: float = 100.0) -> "PriorConfig":
        """Default priors: zero-mean coefficients with diagonal variance
        ``coef_prior_var``, Beta(20, 1.5) persistence, flat Beta(1, 1)
        correlation, InvGamma(2.5, 0.005) volatility-of-volatility."""
        eye = np.eye(k) * coef_prior_var
        return cls(
            beta_mean=np.zeros(k),
            beta_cov=eye,
            gamma_mean=np.zeros(k),
            gamma_cov=eye.copy(),
        )


def prior_moments_phi(prior: PriorConfig) -> tuple[float, float]:
    """Mean and standard deviation of phi = 2 X - 1 with X ~ Beta(a, b)."""
    a, b = prior.phi_a, prior.phi_b
    mean = 2.0 * a / (a + b) - 1.0
    sd = 2.0 * math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1.0)))
    return mean, sd


def _gaussian_logpdf_vec(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    chol = np.linalg.cholesky(cov)
    dev = np.linalg.solve(chol, x - mean)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(-0.5 * (x.size * LOG_2PI + logdet + dev @ dev))


def _scaled_beta_logpdf(value: float, a: float, b: float) -> float:
    # density of v = 2 X - 1, X ~ Beta(a, b), support (-1, 1)
    x = 0.5 * (value + 1.0)
    return (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - betaln(a, b) - math.log(2.0)


def _invgamma_logpdf(value: float, shape: float, scale: float) -> float:
    return shape * math.log(scale) - gammaln(shape) - (shape + 1.0) * math.log(value) - scale / value


def log_prior(state: ParameterState, prior: PriorConfig) -> float:
    """Sum of the five log prior densities (normalized)."""
    if state.k != prior.k:
        raise ValueError("state and prior dimension mismatch")
    total = _gaussian_logpdf_vec(state.beta, prior.beta_mean, prior.beta_cov)
    total += _gaussian_logpdf_vec(state.gamma, prior.gamma_mean, prior.gamma_cov)
    total += _scaled_beta_logpdf(state.phi, prior.phi_a, prior.phi_b)
    total += _scaled_beta_logpdf(state.rho, prior.rho_a, prior.rho_b)
    total += _invgamma_logpdf(state.sigma2, 0.5 * prior.sigma_nu, 0.5 * prior.sigma_lambda)
    return total


def log_joint_posterior(
    state: ParameterState,
    path: LatentPath,
    data: Dataset,
    prior: PriorConfig,
) -> float:
    """Log of the unnormalized joint posterior of (parameters, path).

    Sum of the log priors, the initial-state density of h_1, the T
    observation densities and the T transition densities of
    h_{t+1} | h_t, y_t.  Raises ValueError naming the first density term
    that evaluates non-finite.
    """
    y = data.returns
    X = data.design
    h = path.h
    T = y.size
    if state.k != X.shape[1]:
        raise ValueError("state dimension does not match design")
    if h.size != T + 1:
        raise ValueError(f"latent path must have length T+1 = {T + 1}, got {h.size}")

    phi, rho, sigma2 = state.phi, state.rho, state.sigma2
    sigma = math.sqrt(sigma2)

    lp = log_prior(state, prior)
    if not math.isfinite(lp):
        raise ValueError("prior density is non-finite at this state")

    xb = X[:T] @ state.beta
    xg = X @ state.gamma

    # h_1 ~ N(x_1' gamma, sigma2 / (1 - phi^2))
    init_var = sigma2 / (1.0 - phi * phi)
    init = -0.5 * (LOG_2PI + math.log(init_var)) - (h[0] - xg[0]) ** 2 / (2.0 * init_var)
    if not math.isfinite(init):
        raise ValueError("initial-state density of h_1 is non-finite")

    resid = y - xb
    with np.errstate(over="ignore", invalid="ignore"):
        obs = -0.5 * (LOG_2PI + h[:T]) - 0.5 * resid * resid * np.exp(-h[:T])
    if not np.all(np.isfinite(obs)):
        t_bad = int(np.flatnonzero(~np.isfinite(obs))[0]) + 1
        raise ValueError(f"observation density at t={t_bad} is non-finite")

    trans_var = sigma2 * (1.0 - rho * rho)
    with np.errstate(over="ignore", invalid="ignore"):
        mean_next = xg[1:] + phi * (h[:T] - xg[:T]) + rho * sigma * np.exp(-0.5 * h[:T]) * resid
        dev = h[1:] - mean_next
        trans = -0.5 * (LOG_2PI + math.log(trans_var)) - dev * dev / (2.0 * trans_var)
    if not np.all(np.isfinite(trans)):
        t_bad = int(np.flatnonzero(~np.isfinite(trans))[0]) + 1
        raise ValueError(f"transition density at t={t_bad} is non-finite")

    return float(lp + init + np.sum(obs) + np.sum(trans))
