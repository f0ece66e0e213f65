import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from asvcal import (
    Dataset,
    LatentPath,
    ParameterState,
    PriorConfig,
    SimSpec,
    adapt_step,
    log_fcd_h,
    mh_scalar_step,
    run_chain,
    simulated_dataset,
)
from asvcal.sampler import H_PROPOSAL_BOUND, McmcConfig, SamplerError, _sweep_h
from helpers import ScriptedRng, mc_se, random_instance, run_coverage_study


def small_dataset(T=60, k=1, seed=0, phi=0.9, rho=-0.3, sigma2=0.2):
    rng = np.random.default_rng(seed)
    if k == 1:
        X = np.ones((T + 1, 1))
    else:
        X = np.column_stack([np.ones(T + 1), rng.standard_normal((T + 1, k - 1))])
    truth = ParameterState(beta=np.full(k, 0.2), gamma=np.full(k, 0.1), phi=phi, rho=rho, sigma2=sigma2)
    data, _ = simulated_dataset(SimSpec(truth=truth, design=X, seed=seed))
    return data


class TestMhScalarStep:
    def test_flat_target_always_accepts(self):
        rng = np.random.default_rng(0)
        accepted = sum(mh_scalar_step(0.0, lambda v: 0.0, 1.0, rng)[1] for _ in range(100_000))
        assert accepted == 100_000

    def test_standard_normal_target_moments(self):
        rng = np.random.default_rng(1)
        n = 200_000
        chain = np.empty(n)
        x = 0.0
        for i in range(n):
            x, _ = mh_scalar_step(x, lambda v: -0.5 * v * v, 2.4, rng)
            chain[i] = x
        batches = chain.reshape(20, -1)
        means = batches.mean(axis=1)
        se_mean = means.std(ddof=1) / math.sqrt(20)
        assert abs(chain.mean()) < 4 * se_mean
        variances = batches.var(axis=1, ddof=1)
        se_var = variances.std(ddof=1) / math.sqrt(20)
        assert abs(chain.var(ddof=1) - 1.0) < 4 * se_var

    def test_unsupported_proposals_always_rejected(self):
        rng = np.random.default_rng(2)
        x0 = 0.0
        for _ in range(500):
            new, accepted = mh_scalar_step(
                x0, lambda v: 0.0 if v == x0 else -math.inf, 1.0, rng
            )
            assert not accepted
            assert new == x0

    def test_rejects_nonpositive_step(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError, match="step"):
            mh_scalar_step(0.0, lambda v: 0.0, 0.0, rng)


class TestAdaptStep:
    def test_acceptance_grows_step(self):
        assert adapt_step(1.0, True, 10, 0.44) > 1.0
        assert adapt_step(1.0, False, 10, 0.44) < 1.0

    def test_converges_at_target_rate(self):
        # accept exactly 11 of every 25 updates (= 0.44): the recursion settles
        step = 1.0
        history = []
        for it in range(1, 50_001):
            accepted = (it % 25) < 11
            step = adapt_step(step, accepted, it, 0.44)
            history.append(step)
        assert abs(history[-1] - history[-1001]) / history[-1] < 0.01

    def test_validates_arguments(self):
        with pytest.raises(ValueError):
            adapt_step(-1.0, True, 10, 0.44)
        with pytest.raises(ValueError):
            adapt_step(1.0, True, 0, 0.44)


class TestMcmcConfig:
    def test_storage_arithmetic(self):
        assert McmcConfig(n_iterations=200_000, burn_in=50_000, thin=10).n_stored == 15_000

    def test_burn_in_must_precede_end(self):
        with pytest.raises(ValueError, match="burn_in"):
            McmcConfig(n_iterations=100, burn_in=100, thin=1)

    def test_small_store_warns(self):
        with pytest.warns(UserWarning, match="stored draw count"):
            McmcConfig(n_iterations=300, burn_in=100, thin=10)

    def test_single_stored_draw(self):
        data = small_dataset(T=40)
        prior = PriorConfig.defaults(1)
        config = McmcConfig(n_iterations=105, burn_in=100, thin=5, seed=9)
        out = run_chain(data, prior, config)
        assert out.n_stored == 1
        assert out.draws.shape == (1, 5)
        assert out.h_draws.shape == (1, 41)


class TestDeterminismAndInvariants:
    def test_identical_seed_gives_bit_identical_output(self):
        data = small_dataset(T=50)
        prior = PriorConfig.defaults(1)
        config = McmcConfig(n_iterations=700, burn_in=200, thin=5, seed=123)
        a = run_chain(data, prior, config)
        b = run_chain(data, prior, config)
        assert np.array_equal(a.draws, b.draws)
        assert np.array_equal(a.h_draws, b.h_draws)
        assert a.acceptance_rates == b.acceptance_rates

    def test_different_seeds_differ(self):
        data = small_dataset(T=50)
        prior = PriorConfig.defaults(1)
        a = run_chain(data, prior, McmcConfig(n_iterations=700, burn_in=200, thin=5, seed=1))
        b = run_chain(data, prior, McmcConfig(n_iterations=700, burn_in=200, thin=5, seed=2))
        assert not np.array_equal(a.draws, b.draws)

    def test_stored_draws_satisfy_parameter_space(self):
        data = small_dataset(T=80, rho=-0.5)
        prior = PriorConfig.defaults(1)
        out = run_chain(data, prior, McmcConfig(n_iterations=3000, burn_in=500, thin=5, seed=5))
        phi, rho, sigma2 = out.draws[:, 2], out.draws[:, 3], out.draws[:, 4]
        assert np.all(np.abs(phi) < 1.0)
        assert np.all(np.abs(rho) < 1.0)
        assert np.all(sigma2 > 0.0)
        assert np.all(np.isfinite(out.h_draws))

    def test_steps_frozen_after_burn_in(self):
        data = small_dataset(T=50)
        prior = PriorConfig.defaults(1)
        out = run_chain(data, prior, McmcConfig(n_iterations=900, burn_in=300, thin=2, seed=6))
        for key in ("phi", "rho", "log_sigma2"):
            assert out.step_sizes_final[key] == out.step_sizes_at_burn_in[key]
        assert np.array_equal(out.step_sizes_final["h"], out.step_sizes_at_burn_in["h"])

    def test_steps_keep_adapting_when_asked(self):
        data = small_dataset(T=50)
        prior = PriorConfig.defaults(1)
        config = McmcConfig(
            n_iterations=900, burn_in=300, thin=2, seed=6, adapt_during_burn_in_only=False
        )
        out = run_chain(data, prior, config)
        assert out.step_sizes_final["phi"] != out.step_sizes_at_burn_in["phi"]

    def test_concurrent_chains_match_sequential(self):
        data = small_dataset(T=50)
        prior = PriorConfig.defaults(1)
        configs = [McmcConfig(n_iterations=600, burn_in=200, thin=4, seed=s) for s in (11, 12)]
        sequential = [run_chain(data, prior, c).draws for c in configs]
        with ThreadPoolExecutor(max_workers=2) as pool:
            concurrent = list(pool.map(lambda c: run_chain(data, prior, c).draws, configs))
        for seq, conc in zip(sequential, concurrent):
            assert np.array_equal(seq, conc)

    def test_initialization_error_names_offending_term(self):
        T = 10
        data = Dataset(returns=np.zeros(T) + 1e-9, design=np.ones((T + 1, 1)))
        prior = PriorConfig.defaults(1)
        config = McmcConfig(n_iterations=150, burn_in=10, thin=1, seed=0)
        with pytest.raises(SamplerError, match="initial"):
            run_chain(data, prior, config)

    def test_prior_dimension_mismatch(self):
        data = small_dataset(T=40)
        with pytest.raises(SamplerError, match="dimension"):
            run_chain(data, PriorConfig.defaults(3), McmcConfig(n_iterations=150, burn_in=10, thin=1))


class TestSweepMatchesScalarStep:
    def test_kernel_replays_mh_scalar_step_with_log_fcd_h(self):
        rng = np.random.default_rng(77)
        data, state, path, _ = random_instance(rng, T=30, k=2)
        y, X = data.returns, data.design
        T = y.size
        xb = X[:T] @ state.beta
        xg = X @ state.gamma
        steps = rng.uniform(0.3, 1.2, T)

        for sweep in range(5):
            z = rng.standard_normal(T)
            u = rng.random(T)

            h_kernel = np.array(path.h)
            accepts = np.empty(T, dtype=np.uint8)
            _sweep_h(h_kernel, y, xb, xg, state.phi, state.rho, state.sigma2, steps, z, u, accepts)

            h_ref = np.array(path.h)
            ref_accepts = []
            for t in range(1, T + 1):
                scripted = ScriptedRng([z[t - 1]], [u[t - 1]])

                def log_density(v, t=t):
                    if abs(v) > H_PROPOSAL_BOUND:
                        return -math.inf
                    h_try = h_ref.copy()
                    h_try[t - 1] = v
                    return log_fcd_h(t, LatentPath(h=h_try), state, data)

                new, accepted = mh_scalar_step(h_ref[t - 1], log_density, steps[t - 1], scripted)
                h_ref[t - 1] = new
                ref_accepts.append(accepted)

            assert np.array_equal(h_kernel, h_ref)
            assert accepts.tolist() == [int(a) for a in ref_accepts]
            path = LatentPath(h=h_ref)


class TestPosteriorBehaviour:
    def test_rho_posterior_centers_near_zero_for_symmetric_data(self):
        truth = ParameterState(beta=[0.1], gamma=[0.4], phi=0.9, rho=0.0, sigma2=0.16)
        data, _ = simulated_dataset(SimSpec(truth=truth, design=np.ones((501, 1)), seed=21))
        prior = PriorConfig.defaults(1)
        out = run_chain(data, prior, McmcConfig(n_iterations=12_000, burn_in=3_000, thin=5, seed=22))
        rho_mean = out.draws[:, 3].mean()
        assert abs(rho_mean) < 0.1

    def test_dispersed_starts_agree_after_burn_in(self):
        truth = ParameterState(beta=[0.2], gamma=[0.3], phi=0.9, rho=-0.3, sigma2=0.16)
        data, _ = simulated_dataset(SimSpec(truth=truth, design=np.ones((501, 1)), seed=31))
        prior = PriorConfig.defaults(1)
        config = McmcConfig(n_iterations=14_000, burn_in=5_000, thin=5, seed=32)
        T = data.n_obs

        start_a = ParameterState(beta=[2.0], gamma=[-2.0], phi=0.2, rho=0.5, sigma2=1.0)
        path_a = LatentPath(h=np.full(T + 1, 2.0))
        start_b = ParameterState(beta=[-2.0], gamma=[2.0], phi=0.98, rho=-0.5, sigma2=0.01)
        path_b = LatentPath(h=np.full(T + 1, -2.0))

        out_a = run_chain(data, prior, config, initial_state=start_a, initial_path=path_a)
        config_b = McmcConfig(n_iterations=14_000, burn_in=5_000, thin=5, seed=33)
        out_b = run_chain(data, prior, config_b, initial_state=start_b, initial_path=path_b)

        phi_a, phi_b = out_a.draws[:, 2], out_b.draws[:, 2]
        combined_se = math.hypot(mc_se(phi_a), mc_se(phi_b))
        assert abs(phi_a.mean() - phi_b.mean()) < 3 * combined_se


class TestParameterRecovery:
    def test_k1_recovery_across_replications(self):
        # 20 seeded replications, T = 2000: at least 4 of the 5 parameters
        # inside their 95% interval in at least 90% of replications
        design = np.ones((2001, 1))
        coverage = run_coverage_study(
            design, [0.2], [0.3], phi=0.95, rho=-0.4, sigma2=0.09,
            n_reps=20, n_iterations=20_000, burn_in=5_000, thin=5,
        )
        per_rep = coverage.sum(axis=1)
        assert np.mean(per_rep >= 4) >= 0.90
