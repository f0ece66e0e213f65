"""Synthetic data generation from the asymmetric SV process.

Used as the parameter-recovery oracle: draw a dataset from known
parameters, estimate, and check that credible intervals cover the truth.
The joint shock is drawn through the conditional factorization
eta | eps ~ N(rho sigma eps, sigma2 (1 - rho^2)), the same decomposition
the sampler's transition density relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Dataset, LatentPath, ParameterState, _readonly, _require_finite

__all__ = ["SimSpec", "simulate", "simulated_dataset"]


@dataclass(frozen=True)
class SimSpec:
    """True parameters, design matrix (T+1 rows) and seed for one draw."""

    truth: ParameterState
    design: np.ndarray
    seed: int = 0

    def __post_init__(self):
        design = _readonly(self.design)
        if design.ndim != 2 or design.shape[0] < 4:
            raise ValueError("design must be (T+1) x k with T >= 3")
        if design.shape[1] != self.truth.k:
            raise ValueError("design width does not match truth dimension")
        _require_finite("design", design)
        if not np.all(design[:, 0] == 1.0):
            raise ValueError("design column 0 must be identically 1")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_obs(self) -> int:
        return self.design.shape[0] - 1


def simulate(spec: SimSpec) -> tuple[np.ndarray, LatentPath]:
    """Draw (returns of length T, latent path of length T+1).

    h_1 comes from its stationary distribution; each step draws eps_t,
    emits y_t, then draws eta_t | eps_t and advances the path.
    Deterministic given the seed.
    """
    truth = spec.truth
    X = spec.design
    T = spec.n_obs
    phi, rho, sigma2 = truth.phi, truth.rho, truth.sigma2
    sigma = math.sqrt(sigma2)
    eta_sd = sigma * math.sqrt(1.0 - rho * rho)

    xb = X[:T] @ truth.beta
    xg = X @ truth.gamma

    rng = np.random.default_rng(spec.seed)
    z_init = rng.standard_normal()
    z_eps = rng.standard_normal(T)
    z_eta = rng.standard_normal(T)

    h = np.empty(T + 1)
    y = np.empty(T)
    h[0] = xg[0] + sigma / math.sqrt(1.0 - phi * phi) * z_init
    for t in range(T):
        y[t] = xb[t] + math.exp(0.5 * h[t]) * z_eps[t]
        eta = rho * sigma * z_eps[t] + eta_sd * z_eta[t]
        h[t + 1] = xg[t + 1] + phi * (h[t] - xg[t]) + eta
    return y, LatentPath(h=h)


def simulated_dataset(spec: SimSpec, labels: tuple[str, ...] = ()) -> tuple[Dataset, LatentPath]:
    """Convenience wrapper returning a ready-to-estimate Dataset."""
    y, path = simulate(spec)
    return Dataset(returns=y, design=spec.design, labels=labels), path
