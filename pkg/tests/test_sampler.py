import math

import numpy as np
import pytest
from scipy import stats

from gpmix.compare import ModelKind
from gpmix.hier import PriorConfig, log_prior, ParamLayout
from gpmix.sampler import (Diagnostics, GaussianToyProgram, PosteriorDraws, SamplerConfig,
                           SamplerError, _adaptation_windows, diagnostics, log_posterior,
                           mcse_mean, run_chains, sample_program, split_rhat)
from gpmix.simulate import simulate_recovery_dataset


@pytest.fixture(scope="module")
def toy_draws():
    rng = np.random.default_rng(11)
    prog = GaussianToyProgram(rng.normal(2.0, 1.5, 50), sigma=1.5, mu0=0.0, tau0=10.0)
    pd = sample_program(SamplerConfig(n_chains=2, n_iter=2000, n_warmup=1000, seed=42), prog)
    return prog, pd


class TestConfig:
    def test_defaults_match_contract(self):
        cfg = SamplerConfig()
        assert (cfg.n_chains, cfg.n_iter, cfg.n_warmup) == (2, 2000, 1000)
        assert cfg.n_kept == 1000

    def test_invalid(self):
        with pytest.raises(ValueError):
            SamplerConfig(n_warmup=2000, n_iter=2000)
        with pytest.raises(ValueError):
            SamplerConfig(n_chains=0)


class TestToyTarget:
    def test_posterior_mean_within_mcse(self, toy_draws):
        prog, pd = toy_draws
        mean, sd = prog.posterior()
        th = pd.param("theta")
        assert abs(th.mean() - mean) < 3 * mcse_mean(th)
        assert th.std(ddof=1) == pytest.approx(sd, rel=0.1)

    def test_no_divergences(self, toy_draws):
        _, pd = toy_draws
        assert pd.divergence_count == 0

    def test_ks_against_analytic_posterior(self, toy_draws):
        prog, pd = toy_draws
        mean, sd = prog.posterior()
        ks = stats.kstest(pd.flat("theta"), lambda x: stats.norm.cdf(x, mean, sd))
        assert ks.pvalue > 0.01

    def test_determinism(self, toy_draws):
        prog, pd = toy_draws
        again = sample_program(SamplerConfig(n_chains=2, n_iter=2000, n_warmup=1000, seed=42),
                               prog)
        assert np.array_equal(pd.draws, again.draws)
        assert np.array_equal(pd.divergent, again.divergent)

    def test_threads_do_not_change_results(self, toy_draws):
        prog, pd = toy_draws
        threaded = sample_program(
            SamplerConfig(n_chains=2, n_iter=2000, n_warmup=1000, seed=42), prog, threads=2)
        assert np.array_equal(pd.draws, threaded.draws)

    def test_rhat_near_one(self, toy_draws):
        _, pd = toy_draws
        d = diagnostics(pd)
        assert d.max_rhat < 1.01


@pytest.fixture(scope="module")
def small():
    ts, _ = simulate_recovery_dataset(n_participants=4, n_items=8, seed=12)
    return ts


class TestLogPosterior:

    def test_value_and_gradient(self, small):
        layout = ParamLayout.for_trialset(small)
        pv = np.random.default_rng(0).normal(0, 0.4, layout.size)
        v, g = log_posterior(pv, small, ModelKind.MPT)
        assert math.isfinite(v)
        assert g.shape == (layout.size,)
        assert np.all(np.isfinite(g))

    def test_never_nan(self, small):
        rng = np.random.default_rng(1)
        layout = ParamLayout.for_trialset(small)
        for _ in range(10):
            pv = rng.normal(0, 3, layout.size)
            v, g = log_posterior(pv, small, ModelKind.MPT)
            assert not math.isnan(v)
            assert not np.any(np.isnan(g))


class TestRunChains:
    def test_recovery_smoke_and_rows(self):
        ts, _ = simulate_recovery_dataset(n_participants=3, n_items=4, seed=13)
        cfg = SamplerConfig(n_chains=2, n_iter=120, n_warmup=60, seed=7)
        pd = run_chains(cfg, ts, ModelKind.BASELINE)
        assert pd.draws.shape[0] == 60
        assert pd.draws.shape[1] == 2
        assert pd.flat_draws().shape == (120, pd.n_params)

    def test_init_failure_reports_constraint(self):
        class Hopeless:
            n_params = 2
            names = ["a", "b"]
            def logpost_and_grad(self, pv):
                return -math.inf, np.zeros(2)
            def log_prior(self, pv):
                return 0.0
            def init_position(self, rng):
                return rng.uniform(-2, 2, 2)
        with pytest.raises(SamplerError, match="100 init attempts"):
            sample_program(SamplerConfig(n_iter=10, n_warmup=5), Hopeless())


class TestDiagnostics:
    def test_iid_chains_rhat_below_1_01(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 1, (2, 1000))
        assert split_rhat(x) < 1.01

    def test_separated_chains_rhat_above_2(self):
        rng = np.random.default_rng(4)
        x = np.vstack([rng.normal(0, 1, 1000), rng.normal(5, 1, 1000)])
        assert split_rhat(x) > 2.0

    def test_constant_column_flagged_degenerate(self):
        draws = np.random.default_rng(5).normal(size=(200, 2, 2))
        draws[:, :, 1] = 3.14
        pd = PosteriorDraws(
            draws=draws, names=["a", "b"], divergent=np.zeros((200, 2), dtype=bool),
            step_size=np.ones(2), accept_stat=np.zeros((200, 2)),
            tree_depth=np.zeros((200, 2)), energy=np.zeros((200, 2)))
        d = diagnostics(pd)
        assert d.degenerate == ["b"]
        assert math.isnan(d.rhat[1])
        assert not math.isnan(d.rhat[0])

    def test_ess_bounds(self):
        rng = np.random.default_rng(6)
        draws = rng.normal(size=(500, 2, 3))
        pd = PosteriorDraws(
            draws=draws, names=["a", "b", "c"], divergent=np.zeros((500, 2), dtype=bool),
            step_size=np.ones(2), accept_stat=np.zeros((500, 2)),
            tree_depth=np.zeros((500, 2)), energy=np.zeros((500, 2)))
        d = diagnostics(pd)
        total = 1000
        assert np.all(d.ess_bulk > 0)
        assert np.all(d.ess_bulk <= 1.5 * total)
        assert np.all(d.rhat >= 1.0 - 1e-8)

    def test_requires_two_chains_and_draws(self):
        draws = np.zeros((50, 2, 1)) + np.random.default_rng(0).normal(size=(50, 2, 1))
        pd = PosteriorDraws(
            draws=draws, names=["a"], divergent=np.zeros((50, 2), dtype=bool),
            step_size=np.ones(2), accept_stat=np.zeros((50, 2)),
            tree_depth=np.zeros((50, 2)), energy=np.zeros((50, 2)))
        with pytest.raises(ValueError, match="100"):
            diagnostics(pd)


class TestDrawsContainer:
    def test_unique_names_required(self):
        with pytest.raises(ValueError, match="unique"):
            PosteriorDraws(
                draws=np.zeros((5, 2, 2)), names=["a", "a"],
                divergent=np.zeros((5, 2), dtype=bool), step_size=np.ones(2),
                accept_stat=np.zeros((5, 2)), tree_depth=np.zeros((5, 2)),
                energy=np.zeros((5, 2)))

    def test_finite_required(self):
        bad = np.zeros((5, 2, 1))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            PosteriorDraws(
                draws=bad, names=["a"], divergent=np.zeros((5, 2), dtype=bool),
                step_size=np.ones(2), accept_stat=np.zeros((5, 2)),
                tree_depth=np.zeros((5, 2)), energy=np.zeros((5, 2)))

    def test_csv_roundtrip(self, tmp_path, toy_draws):
        _, pd = toy_draws
        path = tmp_path / "draws.csv"
        pd.to_csv(path)
        back = PosteriorDraws.from_csv(path)
        assert back.names == pd.names
        np.testing.assert_allclose(back.draws, pd.draws, rtol=0, atol=0)


class TestAdaptationSchedule:
    def test_standard_windows(self):
        init, term_start, ends = _adaptation_windows(1000)
        assert init == 75
        assert term_start == 950
        assert ends == [100, 150, 250, 450, 950]

    def test_short_warmup(self):
        init, term_start, ends = _adaptation_windows(60)
        assert 0 < init < term_start <= 60
        assert ends[-1] == term_start
