"""The JAX programs must reproduce the pure-Python reference semantics."""

import math

import numpy as np
import pytest

from gpmix.compare import ModelKind, RegLayout, reg_log_prior, reg_transform, regression_loglik
from gpmix.data import TrialSet
from gpmix.engine import build_program
from gpmix.hier import (ParamLayout, PriorConfig, assemble_process_probs, assemble_rt_params,
                        log_prior, transform)
from gpmix.rtmix import trial_loglik
from gpmix.simulate import simulate_recovery_dataset


@pytest.fixture(scope="module")
def dataset():
    ts, _ = simulate_recovery_dataset(n_participants=5, n_items=8, seed=9)
    return ts


class TestMptProgram:
    @pytest.mark.parametrize("kind", [ModelKind.MPT, ModelKind.MPT_PLUS_SURPRISAL])
    def test_matches_pure_reference(self, dataset, kind):
        prog = build_program(kind, dataset)
        layout = prog.layout
        rng = np.random.default_rng(1)
        for _ in range(5):
            pv = rng.normal(0, 0.6, layout.size)
            cp, _ = transform(pv, layout)
            fast = prog.trial_logliks(pv)
            ref = np.array([
                trial_loglik(t, assemble_process_probs(cp, t), assemble_rt_params(cp, t))
                for t in dataset
            ])
            np.testing.assert_allclose(fast, ref, rtol=1e-10)

    def test_prior_matches_reference(self, dataset):
        prog = build_program(ModelKind.MPT, dataset)
        rng = np.random.default_rng(2)
        for _ in range(5):
            pv = rng.normal(0, 0.8, prog.layout.size)
            assert prog.log_prior(pv) == pytest.approx(
                log_prior(pv, PriorConfig(), prog.layout), rel=1e-9)

    def test_logpost_is_prior_plus_loglik(self, dataset):
        prog = build_program(ModelKind.MPT, dataset)
        pv = np.random.default_rng(3).normal(0, 0.5, prog.layout.size)
        v, _ = prog.logpost_and_grad(pv)
        assert v == pytest.approx(prog.log_prior(pv) + prog.trial_logliks(pv).sum(), rel=1e-10)

    def test_empty_trialset_gives_prior(self, dataset):
        layout = ParamLayout.for_trialset(dataset)
        empty = build_program(ModelKind.MPT, TrialSet(trials=()), layout=layout)
        pv = np.random.default_rng(4).normal(0, 0.5, layout.size)
        v, _ = empty.logpost_and_grad(pv)
        assert v == pytest.approx(log_prior(pv, PriorConfig(), layout), rel=1e-9)

    def test_additivity_over_split(self, dataset):
        layout = ParamLayout.for_trialset(dataset)
        full = build_program(ModelKind.MPT, dataset, layout=layout)
        half = len(dataset) // 2
        a = build_program(ModelKind.MPT, dataset.with_trials(dataset.trials[:half]),
                          layout=layout)
        b = build_program(ModelKind.MPT, dataset.with_trials(dataset.trials[half:]),
                          layout=layout)
        pv = np.random.default_rng(5).normal(0, 0.5, layout.size)
        prior = log_prior(pv, PriorConfig(), layout)
        assert full.logpost(pv) == pytest.approx(a.logpost(pv) + b.logpost(pv) - prior,
                                                 rel=1e-10)

    def test_rejection_signal_below_shift(self, dataset):
        prog = build_program(ModelKind.MPT, dataset)
        pv = np.zeros(prog.layout.size)
        pv[prog.layout.sl("log_shift")] = math.log(10000.0)  # shift above every RT
        v, g = prog.logpost_and_grad(pv)
        assert v == -math.inf
        assert np.all(g == 0.0)

    def test_gradient_matches_finite_differences(self, dataset):
        prog = build_program(ModelKind.MPT, dataset)
        rng = np.random.default_rng(6)
        pv = rng.normal(0, 0.4, prog.layout.size)
        _, grad = prog.logpost_and_grad(pv)
        h = 1e-5
        idx = rng.choice(prog.layout.size, 12, replace=False)
        for k in idx:
            e = np.zeros(prog.layout.size)
            e[k] = h
            fd = (prog.logpost(pv + e) - prog.logpost(pv - e)) / (2 * h)
            assert grad[k] == pytest.approx(fd, rel=1e-4, abs=1e-6)

    def test_surprisal_required(self, dataset):
        stripped = dataset.with_trials([
            t.__class__(**{**t.__dict__, "surp_crit": None, "surp_spill": None})
            for t in dataset
        ])
        with pytest.raises(ValueError, match="requires surprisal"):
            build_program(ModelKind.MPT_PLUS_SURPRISAL, stripped)

    def test_hybrid_nests_mpt(self, dataset):
        """Surprisal slope pinned at zero reproduces the plain mixture model."""
        hybrid = build_program(ModelKind.MPT_PLUS_SURPRISAL, dataset)
        plain = build_program(ModelKind.MPT, dataset)
        rng = np.random.default_rng(7)
        pv_plain = rng.normal(0, 0.5, plain.layout.size)
        pv_h = np.zeros(hybrid.layout.size)
        for name in plain.layout.scalar_block_names:
            pv_h[hybrid.layout.sl(name)] = pv_plain[plain.layout.sl(name)]
        for name in ("log_tau_part", "log_tau_item", "chol_part", "chol_item",
                     "z_part", "z_item"):
            pv_h[hybrid.layout.sl(name)] = pv_plain[plain.layout.sl(name)]
        pv_h[hybrid.layout.sl("surp_slope")] = 0.0
        np.testing.assert_allclose(hybrid.trial_logliks(pv_h), plain.trial_logliks(pv_plain),
                                   rtol=1e-12)


class TestRegressionProgram:
    @pytest.mark.parametrize("kind", [ModelKind.BASELINE, ModelKind.SURPRISAL])
    def test_matches_pure_reference(self, dataset, kind):
        prog = build_program(kind, dataset)
        rng = np.random.default_rng(8)
        for _ in range(5):
            pv = rng.normal(0, 0.6, prog.layout.size)
            cp, _ = reg_transform(pv, prog.layout)
            ref = np.array([regression_loglik(t, cp) for t in dataset])
            np.testing.assert_allclose(prog.trial_logliks(pv), ref, rtol=1e-10)

    def test_prior_matches_reference(self, dataset):
        for kind in (ModelKind.BASELINE, ModelKind.SURPRISAL):
            prog = build_program(kind, dataset)
            pv = np.random.default_rng(9).normal(0, 0.5, prog.layout.size)
            assert prog.log_prior(pv) == pytest.approx(
                reg_log_prior(pv, PriorConfig(), prog.layout), rel=1e-9)

    def test_gradient_matches_finite_differences(self, dataset):
        prog = build_program(ModelKind.SURPRISAL, dataset)
        rng = np.random.default_rng(10)
        pv = rng.normal(0, 0.4, prog.layout.size)
        _, grad = prog.logpost_and_grad(pv)
        h = 1e-5
        for k in rng.choice(prog.layout.size, 10, replace=False):
            e = np.zeros(prog.layout.size)
            e[k] = h
            fd = (prog.logpost(pv + e) - prog.logpost(pv - e)) / (2 * h)
            assert grad[k] == pytest.approx(fd, rel=1e-4, abs=1e-6)
