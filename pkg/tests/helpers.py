"""Shared test machinery: random instances, independent oracles and a
rho-free reference sampler used to cross-check the main one."""

import datetime as dt
import math

import numpy as np
from numba import njit

from asvcal import Dataset, LatentPath, ParameterState, PriorConfig


def random_instance(rng, T=6, k=2, rho=None, phi=None):
    """Random small model instance with a well-conditioned prior."""
    X = np.column_stack([np.ones(T + 1)] + [rng.standard_normal(T + 1) for _ in range(k - 1)])
    data = Dataset(returns=rng.standard_normal(T), design=X)
    A = rng.standard_normal((k, k)) * 0.3
    beta_cov = A @ A.T + np.eye(k)
    B = rng.standard_normal((k, k)) * 0.3
    gamma_cov = B @ B.T + np.eye(k)
    prior = PriorConfig(
        beta_mean=rng.standard_normal(k) * 0.5,
        beta_cov=beta_cov,
        gamma_mean=rng.standard_normal(k) * 0.5,
        gamma_cov=gamma_cov,
        phi_a=2.0 + rng.random() * 20.0,
        phi_b=1.0 + rng.random() * 2.0,
        rho_a=1.0 + rng.random(),
        rho_b=1.0 + rng.random(),
        sigma_nu=2.0 + rng.random() * 4.0,
        sigma_lambda=0.01 + rng.random() * 0.2,
    )
    state = ParameterState(
        beta=rng.standard_normal(k) * 0.5,
        gamma=rng.standard_normal(k) * 0.5,
        phi=phi if phi is not None else rng.uniform(-0.9, 0.9),
        rho=rho if rho is not None else rng.uniform(-0.9, 0.9),
        sigma2=0.1 + rng.random(),
    )
    path = LatentPath(h=rng.standard_normal(T + 1) * 0.7)
    return data, state, path, prior


def fd_gaussian_moments(logf, x0, delta=0.5):
    """Mean and covariance of an exactly Gaussian log density via central
    differences (exact for quadratics up to rounding) and one Newton step."""
    x0 = np.asarray(x0, dtype=float)
    k = x0.size
    eye = np.eye(k)
    grad = np.array(
        [(logf(x0 + delta * eye[i]) - logf(x0 - delta * eye[i])) / (2 * delta) for i in range(k)]
    )
    hess = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            hess[i, j] = (
                logf(x0 + delta * eye[i] + delta * eye[j])
                - logf(x0 + delta * eye[i] - delta * eye[j])
                - logf(x0 - delta * eye[i] + delta * eye[j])
                + logf(x0 - delta * eye[i] - delta * eye[j])
            ) / (4 * delta * delta)
    mean = x0 - np.linalg.solve(hess, grad)
    cov = np.linalg.inv(-hess)
    return mean, cov


class ScriptedRng:
    """Replays pre-drawn normals and uniforms (for step-for-step replays)."""

    def __init__(self, normals, uniforms):
        self._normals = list(normals)
        self._uniforms = list(uniforms)

    def standard_normal(self):
        return self._normals.pop(0)

    def random(self):
        return self._uniforms.pop(0)


def weekday_dummy_design(T, columns=("mon", "fri"), start=dt.date(2013, 1, 1)):
    """Constant plus selected weekday dummies over T+1 consecutive dates."""
    from asvcal.data import build_weekday_design

    dates = tuple(start + dt.timedelta(days=i) for i in range(T + 1))
    matrix, labels = build_weekday_design(dates)
    keep = [0] + [labels.index(c) for c in columns]
    return matrix[:, keep], tuple(labels[i] for i in keep)


# ---------------------------------------------------------------------------
# Independent standard-SV (rho = 0) reference sampler.  Written from the
# rho-free model directly: conjugate inverse-gamma step for sigma2, its own
# phi conditional and its own latent sweep.  Shares no density code with
# the package.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _ref_site_logf(v, i, h, y, xb, xg, phi, sigma2):
    r = y[i] - xb[i]
    out = -0.5 * v - 0.5 * r * r * math.exp(-v)
    fwd = h[i + 1] - xg[i + 1] - phi * (v - xg[i])
    out -= fwd * fwd / (2.0 * sigma2)
    if i == 0:
        out -= (1.0 - phi * phi) * (v - xg[0]) ** 2 / (2.0 * sigma2)
    else:
        bwd = v - xg[i] - phi * (h[i - 1] - xg[i - 1])
        out -= bwd * bwd / (2.0 * sigma2)
    return out


@njit(cache=True)
def _ref_sweep(h, y, xb, xg, phi, sigma2, steps, z, u, accepts):
    T = y.shape[0]
    for i in range(T):
        prop = h[i] + steps[i] * z[i]
        if abs(prop) > 50.0:
            accepts[i] = 0
            continue
        delta = _ref_site_logf(prop, i, h, y, xb, xg, phi, sigma2) - _ref_site_logf(
            h[i], i, h, y, xb, xg, phi, sigma2
        )
        if math.log(u[i]) < delta:
            h[i] = prop
            accepts[i] = 1
        else:
            accepts[i] = 0


def _ref_log_phi_cond(phi, h, xg, sigma2, a, b):
    if not abs(phi) < 1.0:
        return -math.inf
    dev = h[1:] - xg[1:] - phi * (h[:-1] - xg[:-1])
    out = (a - 1.0) * math.log(0.5 * (1.0 + phi)) + (b - 1.0) * math.log(0.5 * (1.0 - phi))
    out += 0.5 * math.log1p(-phi * phi)
    out -= (1.0 - phi * phi) * (h[0] - xg[0]) ** 2 / (2.0 * sigma2)
    out -= float(dev @ dev) / (2.0 * sigma2)
    return out


def run_reference_standard_sv(data, prior, n_iterations, burn_in, thin, seed):
    """Gibbs/MH sampler for the rho = 0 model; returns (draws, names).

    Column order matches the package sampler: beta, gamma, phi, rho
    (always zero), sigma2.
    """
    y = data.returns
    X = data.design
    T = y.size
    k = X.shape[1]
    rng = np.random.default_rng(seed)

    prior_prec_b = np.linalg.inv(prior.beta_cov)
    prior_shift_b = prior_prec_b @ prior.beta_mean
    prior_prec_g = np.linalg.inv(prior.gamma_cov)
    prior_shift_g = prior_prec_g @ prior.gamma_mean

    beta = np.array(prior.beta_mean)
    gamma = np.array(prior.gamma_mean)
    phi = 2.0 * prior.phi_a / (prior.phi_a + prior.phi_b) - 1.0
    sigma2 = 5.0 * prior.sigma_lambda / prior.sigma_nu
    h = np.full(T + 1, math.log(np.var(y - y.mean(), ddof=1)))

    step_phi = 0.1
    steps_h = np.full(T, 0.5)
    accepts = np.empty(T, dtype=np.uint8)

    n_stored = (n_iterations - burn_in) // thin
    draws = np.empty((n_stored, 2 * k + 3))
    stored = 0
    for it in range(1, n_iterations + 1):
        adapting = it <= burn_in

        # beta | rest: weighted Gaussian regression, weights exp(-h_t)
        w = np.exp(-h[:T])
        Xt = X[:T]
        prec = Xt.T @ (Xt * w[:, None]) + prior_prec_b
        shift = Xt.T @ (w * y) + prior_shift_b
        cov = np.linalg.inv(prec)
        beta = cov @ shift + np.linalg.cholesky(cov) @ rng.standard_normal(k)

        # gamma | rest
        diffs = X[1:] - phi * X[:T]
        resp = h[1:] - phi * h[:T]
        prec = (1.0 - phi * phi) / sigma2 * np.outer(X[0], X[0]) + diffs.T @ diffs / sigma2 + prior_prec_g
        shift = (1.0 - phi * phi) / sigma2 * X[0] * h[0] + diffs.T @ resp / sigma2 + prior_shift_g
        cov = np.linalg.inv(prec)
        gamma = cov @ shift + np.linalg.cholesky(cov) @ rng.standard_normal(k)
        xg = X @ gamma
        xb = X[:T] @ beta

        # phi | rest: random walk MH
        z = rng.standard_normal()
        u = rng.random()
        prop = phi + step_phi * z
        delta = _ref_log_phi_cond(prop, h, xg, sigma2, prior.phi_a, prior.phi_b) - _ref_log_phi_cond(
            phi, h, xg, sigma2, prior.phi_a, prior.phi_b
        )
        accepted = math.log(u) < delta
        if accepted:
            phi = prop
        if adapting:
            step_phi *= math.exp(((1.0 if accepted else 0.0) - 0.44) * it ** -0.6)

        # sigma2 | rest: conjugate inverse gamma
        dev = h[1:] - xg[1:] - phi * (h[:T] - xg[:T])
        rss = (1.0 - phi * phi) * (h[0] - xg[0]) ** 2 + float(dev @ dev)
        shape = 0.5 * (prior.sigma_nu + T + 1)
        scale = 0.5 * (prior.sigma_lambda + rss)
        sigma2 = scale / rng.gamma(shape)

        # latent sweep + closing draw
        z_h = rng.standard_normal(T)
        u_h = rng.random(T)
        _ref_sweep(h, y, xb, xg, phi, sigma2, steps_h, z_h, u_h, accepts)
        if adapting:
            steps_h *= np.exp((accepts.astype(float) - 0.44) * it ** -0.6)
        h[T] = xg[T] + phi * (h[T - 1] - xg[T - 1]) + math.sqrt(sigma2) * rng.standard_normal()

        if it > burn_in and (it - burn_in) % thin == 0:
            draws[stored, :k] = beta
            draws[stored, k : 2 * k] = gamma
            draws[stored, 2 * k] = phi
            draws[stored, 2 * k + 1] = 0.0
            draws[stored, 2 * k + 2] = sigma2
            stored += 1
    return draws


def mc_se(draws):
    """Monte Carlo standard error of the chain mean, IF-adjusted."""
    from asvcal import inefficiency_factor

    x = np.asarray(draws, dtype=float)
    return x.std(ddof=1) * math.sqrt(inefficiency_factor(x) / x.size)


# ---------------------------------------------------------------------------
# Parameter-recovery machinery (simulation is the oracle: draw data from a
# known truth, estimate, record which credible intervals cover it).
# ---------------------------------------------------------------------------


def coverage_replication(args):
    (rep, design, truth_beta, truth_gamma, phi, rho, sigma2,
     n_iterations, burn_in, thin) = args
    from asvcal import McmcConfig, SimSpec, run_chain, simulated_dataset

    k = design.shape[1]
    truth = ParameterState(beta=truth_beta, gamma=truth_gamma, phi=phi, rho=rho, sigma2=sigma2)
    data, _ = simulated_dataset(SimSpec(truth=truth, design=design, seed=1000 + rep))
    prior = PriorConfig.defaults(k)
    config = McmcConfig(n_iterations=n_iterations, burn_in=burn_in, thin=thin, seed=20_000 + rep)
    out = run_chain(data, prior, config)
    truth_vec = np.concatenate([truth_beta, truth_gamma, [phi, rho, sigma2]])
    lo, hi = np.percentile(out.draws, [2.5, 97.5], axis=0)
    return (lo <= truth_vec) & (truth_vec <= hi)


def run_coverage_study(design, truth_beta, truth_gamma, *, phi, rho, sigma2,
                       n_reps, n_iterations, burn_in, thin, workers=2):
    from concurrent.futures import ProcessPoolExecutor

    jobs = [
        (rep, design, np.asarray(truth_beta, float), np.asarray(truth_gamma, float),
         phi, rho, sigma2, n_iterations, burn_in, thin)
        for rep in range(n_reps)
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(coverage_replication, jobs))
    return np.array(rows)
