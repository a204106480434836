import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import log_expit, logsumexp

from gpmix.compare import (LooResult, ModelKind, RegLayout, elpd_diff, gpd_fit,
                           pointwise_loglik, psis_loo, reg_transform, regression_loglik,
                           write_pointwise_delta_csv)
from gpmix.data import Outcome, Paradigm, Regression
from gpmix.hier import LOG_SQRT_2PI
from gpmix.sampler import PosteriorDraws, SamplerConfig, run_chains
from gpmix.simulate import simulate_recovery_dataset


@pytest.fixture(scope="module")
def dataset():
    ts, _ = simulate_recovery_dataset(n_participants=4, n_items=8, seed=21)
    return ts


class TestModelKind:
    def test_values(self):
        assert ModelKind("mpt-surprisal") == ModelKind.MPT_PLUS_SURPRISAL
        assert ModelKind.SURPRISAL.needs_surprisal
        assert not ModelKind.BASELINE.needs_surprisal
        assert ModelKind.MPT.is_mpt_family


class TestRegressionLoglik:
    def test_baseline_maze_rt_terms_only(self, dataset):
        layout = RegLayout.for_trialset(dataset, with_surprisal=False)
        pv = np.zeros(layout.size)
        cp, _ = reg_transform(pv, layout)
        t = next(t for t in dataset if t.paradigm == Paradigm.MAZE)
        want = 0.0
        for rt, ln in ((t.rt_crit, t.len_crit), (t.rt_spill, t.len_spill)):
            lx = math.log(rt)
            want += -lx - math.log(cp.sigma) - LOG_SQRT_2PI - 0.5 * (lx - cp.intercept) ** 2
        assert regression_loglik(t, cp) == pytest.approx(want, rel=1e-12)

    def test_bernoulli_factors_where_observed(self, dataset):
        layout = RegLayout.for_trialset(dataset, with_surprisal=False)
        rng = np.random.default_rng(0)
        pv = rng.normal(0, 0.5, layout.size)
        cp, _ = reg_transform(pv, layout)
        t = next(t for t in dataset if t.paradigm == Paradigm.BSPR)
        i = layout.participant_index[t.participant_id]
        j = layout.item_index[t.item_id]
        want = 0.0
        for rt, ln in ((t.rt_crit, t.len_crit), (t.rt_spill, t.len_spill)):
            loc = cp.intercept + cp.len_slope * ln + cp.u_rt[i] + cp.w_rt[j]
            lx = math.log(rt)
            want += -lx - math.log(cp.sigma) - LOG_SQRT_2PI - 0.5 * ((lx - loc) / cp.sigma) ** 2
        eta_r = cp.reg_intercept + cp.u_reg[i]
        want += float(log_expit(eta_r if t.regression == Regression.YES else -eta_r))
        eta_o = cp.out_intercept + cp.u_out[i]
        want += float(log_expit(eta_o if t.outcome == Outcome.GOOD else -eta_o))
        assert regression_loglik(t, cp) == pytest.approx(want, rel=1e-12)

    def test_zero_slope_nests_baseline(self, dataset):
        base_layout = RegLayout.for_trialset(dataset, with_surprisal=False)
        surp_layout = RegLayout.for_trialset(dataset, with_surprisal=True)
        rng = np.random.default_rng(1)
        pv_b = rng.normal(0, 0.5, base_layout.size)
        pv_s = np.zeros(surp_layout.size)
        for name in base_layout.scalar_names + base_layout.tau_names + base_layout.z_names:
            pv_s[surp_layout.sl(name)] = pv_b[base_layout.sl(name)]
        cp_b, _ = reg_transform(pv_b, base_layout)
        cp_s, _ = reg_transform(pv_s, surp_layout)
        for t in dataset.trials[:20]:
            assert regression_loglik(t, cp_s) == pytest.approx(
                regression_loglik(t, cp_b), rel=1e-12)

    def test_missing_surprisal_rejected(self, dataset):
        layout = RegLayout.for_trialset(dataset, with_surprisal=True)
        cp, _ = reg_transform(np.zeros(layout.size), layout)
        import dataclasses

        t = dataclasses.replace(dataset.trials[0], surp_crit=None, surp_spill=None)
        with pytest.raises(ValueError, match="surprisal"):
            regression_loglik(t, cp)


class TestGpdFit:
    def gpd_sample(self, k, sigma, n, rng):
        u = rng.uniform(size=n)
        return sigma / k * ((1 - u) ** (-k) - 1.0)

    def test_recovers_positive_shape(self):
        rng = np.random.default_rng(2)
        x = self.gpd_sample(0.2, 1.0, 2000, rng)
        k, sigma = gpd_fit(x)
        assert 0.1 < k < 0.3
        assert sigma > 0

    def test_exponential_is_shape_zero(self):
        rng = np.random.default_rng(3)
        x = rng.exponential(1.0, 2000)
        k, _ = gpd_fit(x)
        assert -0.1 < k < 0.1

    def test_degenerate_sample(self):
        with pytest.raises(ValueError, match="degenerate"):
            gpd_fit(np.ones(100))

    def test_too_small(self):
        with pytest.raises(ValueError, match="at least 5"):
            gpd_fit([1.0, 2.0, 3.0])


def _conjugate_ll_matrix(y, sigma, mu0, tau0, n_draws, rng):
    """Draws from the analytic posterior + pointwise log-likelihood matrix."""
    n = len(y)
    prec = 1 / tau0**2 + n / sigma**2
    mean = (mu0 / tau0**2 + y.sum() / sigma**2) / prec
    sd = math.sqrt(1 / prec)
    theta = rng.normal(mean, sd, n_draws)
    ll = stats.norm.logpdf(y[None, :], loc=theta[:, None], scale=sigma)
    return theta, ll


def _exact_loo(y, sigma, mu0, tau0):
    """Leave-one-out predictive densities via analytic refits."""
    out = np.empty(len(y))
    idx = np.arange(len(y))
    for i in idx:
        rest = y[idx != i]
        prec = 1 / tau0**2 + len(rest) / sigma**2
        mean = (mu0 / tau0**2 + rest.sum() / sigma**2) / prec
        var = 1 / prec
        out[i] = stats.norm.logpdf(y[i], loc=mean, scale=math.sqrt(var + sigma**2))
    return out


class TestPsisLoo:
    def test_identical_draws_degenerate(self):
        ll = np.tile(np.array([-1.3, -2.1, -0.7]), (200, 1))
        res = psis_loo(ll)
        np.testing.assert_allclose(res.pointwise, [-1.3, -2.1, -0.7])
        assert res.degenerate.all()

    def test_constant_column(self):
        rng = np.random.default_rng(4)
        ll = rng.normal(-2, 0.3, size=(300, 4))
        ll[:, 2] = -1.5
        res = psis_loo(ll)
        assert res.pointwise[2] == pytest.approx(-1.5)
        assert res.degenerate[2] and not res.degenerate[0]

    def test_loo_penalizes_vs_in_sample(self):
        rng = np.random.default_rng(5)
        y = rng.normal(0.5, 1.0, 60)
        _, ll = _conjugate_ll_matrix(y, 1.0, 0.0, 5.0, 1000, rng)
        res = psis_loo(ll)
        lpd = float(np.sum(logsumexp(ll, axis=0) - math.log(ll.shape[0])))
        assert res.elpd_hat <= lpd

    def test_matches_exact_loo_on_conjugate_model(self):
        rng = np.random.default_rng(6)
        y = rng.normal(0.5, 1.2, 100)
        _, ll = _conjugate_ll_matrix(y, 1.2, 0.0, 5.0, 4000, rng)
        res = psis_loo(ll)
        exact = float(np.sum(_exact_loo(y, 1.2, 0.0, 5.0)))
        assert abs(res.elpd_hat - exact) < 2 * res.se

    def test_pareto_k_small_for_wellbehaved(self):
        rng = np.random.default_rng(7)
        y = rng.normal(0, 1, 50)
        _, ll = _conjugate_ll_matrix(y, 1.0, 0.0, 5.0, 2000, rng)
        res = psis_loo(ll)
        assert res.n_high_k == 0

    def test_requires_enough_draws(self):
        with pytest.raises(ValueError, match="100 draws"):
            psis_loo(np.zeros((50, 3)))

    def test_nonfinite_rejected(self):
        ll = np.zeros((200, 3))
        ll[0, 0] = np.inf
        with pytest.raises(ValueError, match="finite"):
            psis_loo(ll)

    def test_json_roundtrip(self, tmp_path):
        rng = np.random.default_rng(8)
        ll = rng.normal(-2, 0.4, (150, 5))
        res = psis_loo(ll)
        path = tmp_path / "loo.json"
        res.to_json(path)
        import json

        loaded = json.loads(path.read_text())
        assert loaded["elpd_hat"] == pytest.approx(res.elpd_hat)
        assert len(loaded["pointwise_elpd"]) == 5


class TestElpdDiff:
    def make(self, pointwise):
        pw = np.asarray(pointwise, dtype=float)
        return LooResult(elpd_hat=float(pw.sum()), se=0.0, pointwise=pw,
                         pareto_k=np.zeros(len(pw)), degenerate=np.zeros(len(pw), bool),
                         n_draws=100)

    def test_self_difference_zero(self):
        a = self.make([-1.0, -2.0, -3.0])
        d, se = elpd_diff(a, a)
        assert d == 0.0 and se == 0.0

    def test_antisymmetry(self):
        rng = np.random.default_rng(9)
        a = self.make(rng.normal(-2, 1, 50))
        b = self.make(rng.normal(-2.5, 1, 50))
        dab = elpd_diff(a, b)
        dba = elpd_diff(b, a)
        assert dab[0] == pytest.approx(-dba[0])
        assert dab[1] == pytest.approx(dba[1])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="different numbers"):
            elpd_diff(self.make([-1.0]), self.make([-1.0, -2.0]))


class TestPointwiseLoglik:
    def test_matrix_shape_and_single_draw(self, dataset):
        cfg = SamplerConfig(n_chains=2, n_iter=40, n_warmup=20, seed=3)
        pd = run_chains(cfg, dataset, ModelKind.BASELINE)
        ll = pointwise_loglik(pd, dataset, ModelKind.BASELINE)
        assert ll.shape == (40, len(dataset))
        from gpmix.engine import build_program

        prog = build_program(ModelKind.BASELINE, dataset)
        np.testing.assert_allclose(ll[0], prog.trial_logliks(pd.flat_draws()[0]), rtol=1e-12)

    def test_mismatched_draws_rejected(self, dataset):
        cfg = SamplerConfig(n_chains=2, n_iter=40, n_warmup=20, seed=3)
        pd = run_chains(cfg, dataset, ModelKind.BASELINE)
        with pytest.raises(ValueError, match="layout"):
            pointwise_loglik(pd, dataset, ModelKind.MPT)

    def test_column_means_match_conjugate_predictive(self):
        """Posterior-mean likelihood equals the analytic posterior predictive."""
        rng = np.random.default_rng(10)
        y = rng.normal(1.0, 1.0, 30)
        sigma, mu0, tau0 = 1.0, 0.0, 5.0
        theta, ll = _conjugate_ll_matrix(y, sigma, mu0, tau0, 8000, rng)
        n = len(y)
        prec = 1 / tau0**2 + n / sigma**2
        mean = (mu0 / tau0**2 + y.sum() / sigma**2) / prec
        var = 1 / prec
        lpd = logsumexp(ll, axis=0) - math.log(ll.shape[0])
        analytic = stats.norm.logpdf(y, loc=mean, scale=math.sqrt(var + sigma**2))
        # in-sample predictive density, MC error shrinks with draws
        np.testing.assert_allclose(lpd, analytic, atol=0.02)

    def test_delta_csv(self, dataset, tmp_path):
        rng = np.random.default_rng(11)
        n = len(dataset)
        a = LooResult(0.0, 0.0, rng.normal(-2, 1, n), np.zeros(n), np.zeros(n, bool), 100)
        b = LooResult(0.0, 0.0, rng.normal(-2, 1, n), np.zeros(n), np.zeros(n, bool), 100)
        path = tmp_path / "delta.csv"
        write_pointwise_delta_csv(dataset, a, b, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "trial_id,category,rt_crit,delta_elpd"
        assert len(lines) == n + 1
