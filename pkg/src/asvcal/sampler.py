"""Hybrid Gibbs / random-walk Metropolis-Hastings driver.

One iteration updates, in order:

1. beta   -- exact Gaussian draw from its full conditional,
2. gamma  -- exact Gaussian draw from its full conditional,
3. phi, rho, sigma2 -- scalar random-walk MH, in that order.  phi and
   rho are proposed on the natural scale (proposals outside (-1, 1) hit
   a -inf density and are rejected); sigma2 walks on log sigma2 with the
   +log sigma2 Jacobian folded into the acceptance ratio,
4. h_1 .. h_T -- single-move random-walk MH sweep in ascending t,
5. h_{T+1} -- exact Gaussian draw.

Step sizes follow a Robbins-Monro recursion targeting a fixed acceptance
rate and are frozen after burn-in by default, which keeps the post
burn-in kernel fixed.  Each h site carries its own step size.  The chain
consumes random numbers in a fixed documented order, so identical
(seed, config) produce bit-identical output.  Chains share no mutable
state; concurrent calls with distinct seeds are safe.

The h sweep is the hot loop (T sites per iteration) and is JIT-compiled;
its site density mirrors :func:`asvcal.conditionals.log_fcd_h` exactly,
which the test suite verifies step for step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit

from .conditionals import (
    beta_conditional,
    gamma_conditional,
    h_last_conditional,
    log_fcd_phi_rho_sigma,
)
from .model import Dataset, LatentPath, ParameterState, PriorConfig, log_joint_posterior, prior_moments_phi

__all__ = [
    "McmcConfig",
    "ChainOutput",
    "SamplerError",
    "run_chain",
    "mh_scalar_step",
    "adapt_step",
    "H_PROPOSAL_BOUND",
]

# Proposals for any h_t beyond this magnitude are treated as -inf density:
# exp(+-50) over/underflows the downstream quadratics and sits far outside
# any plausible posterior mass for percent returns.
H_PROPOSAL_BOUND = 50.0

_INITIAL_STEP_PHI = 0.1
_INITIAL_STEP_RHO = 0.1
_INITIAL_STEP_LOG_SIGMA2 = 0.2
_INITIAL_STEP_H = 0.5


class SamplerError(RuntimeError):
    """Raised for invalid initial states or mid-chain invariant violations."""


@dataclass(frozen=True)
class McmcConfig:
    """Chain schedule and tuning knobs."""

    n_iterations: int = 200_000
    burn_in: int = 50_000
    thin: int = 10
    seed: int = 0
    target_acceptance: float = 0.44
    adapt_during_burn_in_only: bool = True

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.burn_in >= self.n_iterations:
            raise ValueError("burn_in must be smaller than n_iterations")
        if self.thin < 1:
            raise ValueError("thin must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must be in (0, 1)")
        if self.n_stored < 100:
            warnings.warn(
                f"stored draw count (n_iterations - burn_in) / thin = "
                f"{self.n_stored} is below 100; convergence diagnostics "
                f"need at least 100 draws",
                UserWarning,
                stacklevel=2,
            )

    @property
    def n_stored(self) -> int:
        return (self.n_iterations - self.burn_in) // self.thin


@dataclass(frozen=True)
class ChainOutput:
    """Thinned post-burn-in draws plus bookkeeping.

    ``draws`` columns follow the fixed order beta_1..beta_k,
    gamma_1..gamma_k, phi, rho, sigma2 (see ``param_names``).
    """

    draws: np.ndarray
    h_draws: np.ndarray
    acceptance_rates: dict
    seed_used: int
    param_names: tuple[str, ...]
    step_sizes_at_burn_in: dict
    step_sizes_final: dict

    @property
    def n_stored(self) -> int:
        return self.draws.shape[0]


def mh_scalar_step(
    current: float,
    log_density: Callable[[float], float],
    step: float,
    rng: np.random.Generator,
) -> tuple[float, bool]:
    """One random-walk MH update of a scalar.

    Proposes current + step * z with z standard normal and accepts with
    probability min(1, exp(delta log density)).  A -inf proposal density
    is always rejected.  Draws exactly one normal and one uniform per
    call regardless of the outcome, keeping callers' random streams
    aligned.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    z = rng.standard_normal()
    u = rng.random()
    proposal = current + step * z
    lp_prop = log_density(proposal)
    if lp_prop == -math.inf:
        return current, False
    lp_cur = log_density(current)
    if math.log(u) < lp_prop - lp_cur:
        return proposal, True
    return current, False


def adapt_step(step: float, accepted: bool, iteration: int, target: float) -> float:
    """Robbins-Monro step-size update on the log scale.

    log(step) moves by (accept - target) / iteration^0.6, so the step
    grows after acceptances above target and the gain decays fast enough
    for the recursion to settle.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    if iteration < 1:
        raise ValueError("iteration must be positive")
    gain = iteration ** -0.6
    return step * math.exp(((1.0 if accepted else 0.0) - target) * gain)


@njit(cache=True)
def _h_site_logf(v, i, h, y, xb, xg, phi, rs, sigma2, trans_denom):
    # Mirrors conditionals.log_fcd_h term for term.
    r = y[i] - xb[i]
    out = -0.5 * v - r * r * math.exp(-v) / 2.0
    fwd = h[i + 1] - xg[i + 1] - phi * (v - xg[i]) - rs * math.exp(-0.5 * v) * r
    out -= fwd * fwd / trans_denom
    if i == 0:
        out -= (1.0 - phi * phi) * (v - xg[0]) ** 2 / (2.0 * sigma2)
    else:
        rp = y[i - 1] - xb[i - 1]
        bwd = v - xg[i] - phi * (h[i - 1] - xg[i - 1]) - rs * math.exp(-0.5 * h[i - 1]) * rp
        out -= bwd * bwd / trans_denom
    return out


@njit(cache=True)
def _sweep_h(h, y, xb, xg, phi, rho, sigma2, steps, z, u, accepts):
    """Single-move MH sweep over h_1..h_T in ascending t (in place)."""
    T = y.shape[0]
    sigma = math.sqrt(sigma2)
    rs = rho * sigma
    trans_denom = 2.0 * (1.0 - rho * rho) * sigma2
    for i in range(T):
        proposal = h[i] + steps[i] * z[i]
        if abs(proposal) > H_PROPOSAL_BOUND:
            accepts[i] = 0
            continue
        lf_prop = _h_site_logf(proposal, i, h, y, xb, xg, phi, rs, sigma2, trans_denom)
        lf_cur = _h_site_logf(h[i], i, h, y, xb, xg, phi, rs, sigma2, trans_denom)
        if math.log(u[i]) < lf_prop - lf_cur:
            h[i] = proposal
            accepts[i] = 1
        else:
            accepts[i] = 0


def _initial_values(
    data: Dataset,
    prior: PriorConfig,
    fix_rho: Optional[float],
) -> tuple[np.ndarray, np.ndarray, float, float, float, np.ndarray]:
    beta = np.array(prior.beta_mean, dtype=float)
    gamma = np.array(prior.gamma_mean, dtype=float)
    phi = prior_moments_phi(prior)[0]
    rho = fix_rho if fix_rho is not None else 2.0 * prior.rho_a / (prior.rho_a + prior.rho_b) - 1.0
    sigma2 = 5.0 * prior.sigma_lambda / prior.sigma_nu
    y = data.returns
    demeaned_var = float(np.var(y - y.mean(), ddof=1))
    h0 = math.log(demeaned_var) if demeaned_var > 0.0 else -math.inf
    h = np.full(data.design.shape[0], h0)
    return beta, gamma, float(phi), float(rho), float(sigma2), h


def run_chain(
    data: Dataset,
    prior: PriorConfig,
    config: McmcConfig,
    *,
    fix_rho: Optional[float] = None,
    initial_state: Optional[ParameterState] = None,
    initial_path: Optional[LatentPath] = None,
) -> ChainOutput:
    """Run one MCMC chain and return thinned post-burn-in draws.

    ``fix_rho`` pins the return-volatility correlation at the given value
    and skips its update (the rho = 0 case reduces the model to standard
    SV).  ``initial_state`` / ``initial_path`` override the default
    initialization (coefficients and phi/rho at prior means, h at the log
    sample variance of the demeaned returns).
    """
    y = data.returns
    X = data.design
    T = y.size
    k = X.shape[1]
    if prior.k != k:
        raise SamplerError(f"prior dimension {prior.k} does not match design width {k}")
    if fix_rho is not None and not abs(fix_rho) < 1.0:
        raise SamplerError(f"fix_rho must lie in (-1, 1), got {fix_rho}")

    beta, gamma, phi, rho, sigma2, h = _initial_values(data, prior, fix_rho)
    if initial_state is not None:
        if initial_state.k != k:
            raise SamplerError("initial_state dimension does not match design width")
        beta = np.array(initial_state.beta, dtype=float)
        gamma = np.array(initial_state.gamma, dtype=float)
        phi = initial_state.phi
        rho = fix_rho if fix_rho is not None else initial_state.rho
        sigma2 = initial_state.sigma2
    if initial_path is not None:
        if len(initial_path) != T + 1:
            raise SamplerError("initial_path length must be T + 1")
        h = np.array(initial_path.h, dtype=float)

    if not np.all(np.isfinite(h)):
        raise SamplerError("initial latent path is non-finite (constant returns?)")
    try:
        log_joint_posterior(
            ParameterState(beta=beta, gamma=gamma, phi=phi, rho=rho, sigma2=sigma2),
            LatentPath(h=h),
            data,
            prior,
        )
    except ValueError as exc:
        raise SamplerError(f"log density non-finite at the initial state: {exc}") from exc

    rng = np.random.default_rng(config.seed)
    target = config.target_acceptance

    step_phi = _INITIAL_STEP_PHI
    step_rho = _INITIAL_STEP_RHO
    step_lsig = _INITIAL_STEP_LOG_SIGMA2
    steps_h = np.full(T, _INITIAL_STEP_H)

    n_stored = config.n_stored
    draws = np.empty((n_stored, 2 * k + 3))
    h_draws = np.empty((n_stored, T + 1))
    accepts_h = np.empty(T, dtype=np.uint8)
    accept_totals = {"phi": 0, "rho": 0, "sigma2": 0, "h": 0}

    def step_snapshot() -> dict:
        return {
            "phi": step_phi,
            "rho": step_rho,
            "log_sigma2": step_lsig,
            "h": steps_h.copy(),
        }

    steps_at_burn_in = step_snapshot() if config.burn_in == 0 else None
    stored = 0
    for it in range(1, config.n_iterations + 1):
        adapting = (not config.adapt_during_burn_in_only) or it <= config.burn_in

        # 1-2. Gibbs draws of the coefficient vectors.
        state = ParameterState(beta=beta, gamma=gamma, phi=phi, rho=rho, sigma2=sigma2)
        path = LatentPath(h=h)
        mom = beta_conditional(state, path, data, prior)
        beta = mom.mean + np.linalg.cholesky(mom.cov) @ rng.standard_normal(k)
        state = ParameterState(beta=beta, gamma=gamma, phi=phi, rho=rho, sigma2=sigma2)
        mom = gamma_conditional(state, path, data, prior)
        gamma = mom.mean + np.linalg.cholesky(mom.cov) @ rng.standard_normal(k)
        state = ParameterState(beta=beta, gamma=gamma, phi=phi, rho=rho, sigma2=sigma2)

        # 3. Scalar random-walk MH updates: phi, then rho, then sigma2.
        phi, accepted = mh_scalar_step(
            phi,
            lambda v: log_fcd_phi_rho_sigma(v, rho, sigma2, state, path, data, prior),
            step_phi,
            rng,
        )
        accept_totals["phi"] += accepted
        if adapting:
            step_phi = adapt_step(step_phi, accepted, it, target)

        if fix_rho is None:
            rho, accepted = mh_scalar_step(
                rho,
                lambda v: log_fcd_phi_rho_sigma(phi, v, sigma2, state, path, data, prior),
                step_rho,
                rng,
            )
            accept_totals["rho"] += accepted
            if adapting:
                step_rho = adapt_step(step_rho, accepted, it, target)

        # Random walk on log sigma2; the +x term is the Jacobian of the
        # log transform, so acceptance targets the sigma2 density.
        lsig, accepted = mh_scalar_step(
            math.log(sigma2),
            lambda x: log_fcd_phi_rho_sigma(phi, rho, math.exp(x), state, path, data, prior) + x,
            step_lsig,
            rng,
        )
        sigma2 = math.exp(lsig)
        accept_totals["sigma2"] += accepted
        if adapting:
            step_lsig = adapt_step(step_lsig, accepted, it, target)

        # 4. Single-move sweep over h_1..h_T.
        xb = X[:T] @ beta
        xg = X @ gamma
        z_h = rng.standard_normal(T)
        u_h = rng.random(T)
        _sweep_h(h, y, xb, xg, phi, rho, sigma2, steps_h, z_h, u_h, accepts_h)
        accept_totals["h"] += int(accepts_h.sum())
        if adapting:
            gain = it ** -0.6
            steps_h *= np.exp((accepts_h.astype(float) - target) * gain)

        # 5. Exact Gaussian draw of h_{T+1}.
        mean_last, var_last = h_last_conditional(
            LatentPath(h=h),
            ParameterState(beta=beta, gamma=gamma, phi=phi, rho=rho, sigma2=sigma2),
            data,
        )
        h[T] = mean_last + math.sqrt(var_last) * rng.standard_normal()

        if it == config.burn_in:
            steps_at_burn_in = step_snapshot()

        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            if not (abs(phi) < 1.0 and abs(rho) < 1.0 and sigma2 > 0.0 and np.all(np.isfinite(h))):
                raise SamplerError(f"parameter-space invariant violated at iteration {it}")
            draws[stored, :k] = beta
            draws[stored, k : 2 * k] = gamma
            draws[stored, 2 * k] = phi
            draws[stored, 2 * k + 1] = rho
            draws[stored, 2 * k + 2] = sigma2
            h_draws[stored] = h
            stored += 1

    param_names = tuple(
        [f"beta:{lab}" for lab in data.labels]
        + [f"gamma:{lab}" for lab in data.labels]
        + ["phi", "rho", "sigma2"]
    )
    n_iter = config.n_iterations
    acceptance_rates = {
        "phi": accept_totals["phi"] / n_iter,
        "sigma2": accept_totals["sigma2"] / n_iter,
        "h": accept_totals["h"] / (n_iter * T),
    }
    if fix_rho is None:
        acceptance_rates["rho"] = accept_totals["rho"] / n_iter
    return ChainOutput(
        draws=draws,
        h_draws=h_draws,
        acceptance_rates=acceptance_rates,
        seed_used=config.seed,
        param_names=param_names,
        step_sizes_at_burn_in=steps_at_burn_in,
        step_sizes_final=step_snapshot(),
    )
