"""Shifted-lognormal mixture likelihood for region reading times.

Five components share a lognormal core; processing stages add location
costs on the log scale, and inattentive reading uses the narrower scale
sigma1. The per-trial likelihood marginalizes latent paths and, where the
response is missing, the end-of-trial outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .data import Outcome, Regression, Trial
from .tree import Component, ProcessProbs, enumerate_paths

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Location costs entering each component: (att, gp, reanalysis, regression).
COMPONENT_COSTS = {
    Component.C1: (False, False, False, False),
    Component.C2: (True, False, False, False),
    Component.C3: (True, True, False, False),
    Component.C4: (True, True, True, False),
    Component.C5: (True, True, False, True),
}


class BelowShiftSignal(float):
    """-inf log-density for an RT at or below the shift.

    A typed value rather than an exception: proposals that move the shift
    past an observed RT must be rejectable, not fatal.
    """

    def __new__(cls):
        return super().__new__(cls, "-inf")

    def __repr__(self):
        return "BELOW_SHIFT"


BELOW_SHIFT = BelowShiftSignal()


@dataclass(frozen=True)
class RtParams:
    """Mixture parameters for one trial (after hierarchical assembly)."""

    mu: float
    sigma1: float
    sigma2: float
    shift: float
    att_cost: float
    gp_cost: float
    reanalysis_cost: float
    regression_cost: float
    len_slope: float = 0.0
    surp_slope: float = 0.0

    def validate(self) -> None:
        if not self.sigma1 < self.sigma2:
            raise ValueError(f"sigma1 ({self.sigma1}) must be < sigma2 ({self.sigma2})")
        if self.sigma1 <= 0:
            raise ValueError("sigma1 must be positive")
        if self.shift < 0:
            raise ValueError("shift must be >= 0")
        for name in ("att_cost", "gp_cost", "reanalysis_cost", "regression_cost"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class ComponentSpec:
    """A mixture component, optionally with the baseline-rereading cost."""

    component: Component
    add_base_regression_cost: bool = False

    def location(self, rp: RtParams, region_len: float = 0.0, surprisal: float = 0.0) -> float:
        att, gp, rean, regr = COMPONENT_COSTS[self.component]
        loc = rp.mu + rp.len_slope * region_len + rp.surp_slope * surprisal
        if att:
            loc += rp.att_cost
        if gp:
            loc += rp.gp_cost
        if rean:
            loc += rp.reanalysis_cost
        if regr or self.add_base_regression_cost:
            loc += rp.regression_cost
        return loc

    def scale(self, rp: RtParams) -> float:
        return rp.sigma1 if self.component == Component.C1 else rp.sigma2


def lognormal_logpdf(x: float, loc: float, scale: float) -> float:
    z = (math.log(x) - loc) / scale
    return -math.log(x) - math.log(scale) - LOG_SQRT_2PI - 0.5 * z * z


def comp_logpdf(rt: float, spec: ComponentSpec, rp: RtParams,
                region_len: float = 0.0, surprisal: float = 0.0) -> float:
    """Log-density of the shifted lognormal component at ``rt`` ms."""
    x = rt - rp.shift
    if x <= 0.0:
        return BELOW_SHIFT
    return lognormal_logpdf(x, spec.location(rp, region_len, surprisal), spec.scale(rp))


def comp_mean(spec: ComponentSpec, rp: RtParams,
              region_len: float = 0.0, surprisal: float = 0.0) -> float:
    """Mean RT in ms: shift + exp(location + scale^2 / 2)."""
    s = spec.scale(rp)
    return rp.shift + math.exp(spec.location(rp, region_len, surprisal) + 0.5 * s * s)


def comp_median(spec: ComponentSpec, rp: RtParams,
                region_len: float = 0.0, surprisal: float = 0.0) -> float:
    return rp.shift + math.exp(spec.location(rp, region_len, surprisal))


def cost_ms_equivalents(rp: RtParams, region_len: float = 0.0) -> dict[str, dict[str, float]]:
    """Back-transform log-scale costs to millisecond differences.

    The exact reporting convention is undocumented upstream, so both are
    given: difference of component means and of component medians, holding
    sigma2 and inserting each cost on top of the costs that precede it
    (att < gp < reanalysis/regression).
    """
    base = rp.mu + rp.len_slope * region_len
    chains = {
        "att_cost": (base, rp.att_cost),
        "gp_cost": (base + rp.att_cost, rp.gp_cost),
        "reanalysis_cost": (base + rp.att_cost + rp.gp_cost, rp.reanalysis_cost),
        "regression_cost": (base + rp.att_cost + rp.gp_cost, rp.regression_cost),
    }
    out = {}
    v = 0.5 * rp.sigma2 * rp.sigma2
    for name, (loc, cost) in chains.items():
        out[name] = {
            "mean_ms": math.exp(loc + v) * math.expm1(cost),
            "median_ms": math.exp(loc) * math.expm1(cost),
        }
    return out


def _observation_logfactor(path, trial: Trial) -> float:
    """log P(observed response/rereading | path); missing parts marginalize."""
    lf = 0.0
    if trial.regression != Regression.NA:
        observed = trial.regression == Regression.YES
        if path.regression_observed != observed:
            return -math.inf
    if trial.outcome != Outcome.NA:
        p_good = path.outcome_good
        p = p_good if trial.outcome == Outcome.GOOD else 1.0 - p_good
        if p <= 0.0:
            return -math.inf
        lf += math.log(p)
    return lf


def trial_loglik(trial: Trial, pp: ProcessProbs, rp: RtParams) -> float:
    """Joint log-likelihood of one trial, marginalizing latent paths.

    Sums P(path) * P(observed category | path) * f(rt_crit) * f(rt_spill)
    over all paths via log-sum-exp. Maze outcomes are missing by design and
    integrate out. Returns -inf when no path can produce the observation
    (e.g. both RTs below the shift).
    """
    paths = enumerate_paths(pp, trial.paradigm, trial.task)
    terms = []
    sc = trial.surp_crit or 0.0
    ss = trial.surp_spill or 0.0
    for path in paths:
        if path.prob <= 0.0:
            continue
        lf = _observation_logfactor(path, trial)
        if lf == -math.inf:
            continue
        spec_c = ComponentSpec(path.comp_crit, path.add_regression_cost_crit)
        spec_s = ComponentSpec(path.comp_spill)
        lc = comp_logpdf(trial.rt_crit, spec_c, rp, trial.len_crit, sc)
        ls = comp_logpdf(trial.rt_spill, spec_s, rp, trial.len_spill, ss)
        if lc == -math.inf or ls == -math.inf:
            continue
        terms.append(math.log(path.prob) + lf + lc + ls)
    if not terms:
        return -math.inf
    return float(logsumexp(np.array(terms)))


def trial_density_grids(trial_template: Trial, pp: ProcessProbs, rp: RtParams,
                        grid_crit: np.ndarray, grid_spill: np.ndarray):
    """Joint density over an RT grid, as per-path outer-product factors.

    Returns (weights, dens_crit, dens_spill): the joint density at
    (rt_c, rt_s) summed over observable categories is
    sum_k weights[k] * dens_crit[k][i] * dens_spill[k][j]. Used by the
    normalization checks; evaluation goes through the same component
    density as ``trial_loglik``.
    """
    paths = enumerate_paths(pp, trial_template.paradigm, trial_template.task)
    weights, dens_c, dens_s = [], [], []
    sc = trial_template.surp_crit or 0.0
    ss = trial_template.surp_spill or 0.0
    for path in paths:
        if path.prob <= 0.0:
            continue
        spec_c = ComponentSpec(path.comp_crit, path.add_regression_cost_crit)
        spec_s = ComponentSpec(path.comp_spill)
        fc = np.array([
            math.exp(comp_logpdf(rt, spec_c, rp, trial_template.len_crit, sc))
            if rt > rp.shift else 0.0 for rt in grid_crit])
        fs = np.array([
            math.exp(comp_logpdf(rt, spec_s, rp, trial_template.len_spill, ss))
            if rt > rp.shift else 0.0 for rt in grid_spill])
        weights.append(path.prob)
        dens_c.append(fc)
        dens_s.append(fs)
    return np.array(weights), np.array(dens_c), np.array(dens_s)
