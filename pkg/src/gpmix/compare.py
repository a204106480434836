"""Competitor models and cross-validated model comparison.

Holds the mixture-free regression likelihoods (length-only baseline and
GPT-2-style surprisal regression), pointwise log-likelihood extraction,
Pareto-smoothed importance-sampling leave-one-out estimation, and elpd
differences between fitted models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit, log_expit, logsumexp

from .data import Outcome, Regression, Trial, TrialSet
from .hier import LOG_SQRT_2PI, PriorConfig, halfnorm_logpdf, norm_logpdf


class ModelKind(str, Enum):
    BASELINE = "baseline"
    MPT = "mpt"
    SURPRISAL = "surprisal"
    MPT_PLUS_SURPRISAL = "mpt-surprisal"

    @property
    def needs_surprisal(self) -> bool:
        return self in (ModelKind.SURPRISAL, ModelKind.MPT_PLUS_SURPRISAL)

    @property
    def is_mpt_family(self) -> bool:
        return self in (ModelKind.MPT, ModelKind.MPT_PLUS_SURPRISAL)


@dataclass(frozen=True)
class RegLayout:
    """Flat coordinate layout for the regression competitors."""

    n_participants: int
    n_items: int
    with_surprisal: bool
    participant_index: dict[str, int] | None = field(default=None, compare=False)
    item_index: dict[str, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        scalars = ["intercept", "len_slope", "log_sigma", "reg_intercept", "out_intercept"]
        if self.with_surprisal:
            scalars += ["surp_slope_rt", "surp_slope_reg", "surp_slope_out"]
        taus = ["log_tau_rt_part", "log_tau_reg_part", "log_tau_out_part", "log_tau_rt_item"]
        zs = [("z_rt_part", self.n_participants), ("z_reg_part", self.n_participants),
              ("z_out_part", self.n_participants), ("z_rt_item", self.n_items)]
        if self.with_surprisal:
            taus.append("log_tau_surp_part")
            zs.append(("z_surp_part", self.n_participants))
        blocks = [(s, 1) for s in scalars] + [(t, 1) for t in taus] + zs
        slices, pos = {}, 0
        for name, size in blocks:
            slices[name] = slice(pos, pos + size)
            pos += size
        object.__setattr__(self, "_slices", slices)
        object.__setattr__(self, "size", pos)
        object.__setattr__(self, "scalar_names", scalars)
        object.__setattr__(self, "tau_names", taus)
        object.__setattr__(self, "z_names", [z for z, _ in zs])

    def sl(self, name: str) -> slice:
        return self._slices[name]

    @property
    def names(self) -> list[str]:
        out = []
        for name, s in self._slices.items():
            n = s.stop - s.start
            out += [name] if n == 1 else [f"{name}[{k}]" for k in range(n)]
        return out

    @property
    def init_blocks(self) -> list[str]:
        return self.scalar_names + self.tau_names

    @classmethod
    def for_trialset(cls, ts: TrialSet, with_surprisal: bool) -> "RegLayout":
        return cls(
            n_participants=ts.n_participants,
            n_items=ts.n_items,
            with_surprisal=with_surprisal,
            participant_index=ts.participant_index,
            item_index=ts.item_index,
        )


@dataclass(frozen=True)
class RegressionParams:
    """Constrained regression-model parameters with realized effects."""

    layout: RegLayout
    intercept: float
    len_slope: float
    sigma: float
    reg_intercept: float
    out_intercept: float
    surp_slope_rt: float
    surp_slope_reg: float
    surp_slope_out: float
    u_rt: np.ndarray
    u_reg: np.ndarray
    u_out: np.ndarray
    u_surp: np.ndarray
    w_rt: np.ndarray


def reg_transform(pv: np.ndarray, layout: RegLayout) -> tuple[RegressionParams, float]:
    pv = np.asarray(pv, dtype=float)
    if pv.shape != (layout.size,):
        raise ValueError(f"expected {layout.size} coordinates, got {pv.shape}")
    g = lambda name: float(pv[layout.sl(name)][0])
    cl = lambda x: min(max(x, -40.0), 40.0)
    sigma = math.exp(cl(g("log_sigma")))
    logjac = cl(g("log_sigma"))
    taus = {}
    for tname in layout.tau_names:
        taus[tname.replace("log_", "")] = math.exp(cl(g(tname)))
        logjac += cl(g(tname))
    with_surp = layout.with_surprisal
    if with_surp:
        u_surp = taus["tau_surp_part"] * pv[layout.sl("z_surp_part")]
    else:
        u_surp = np.zeros(layout.n_participants)
    cp = RegressionParams(
        layout=layout,
        intercept=g("intercept"),
        len_slope=g("len_slope"),
        sigma=sigma,
        reg_intercept=g("reg_intercept"),
        out_intercept=g("out_intercept"),
        surp_slope_rt=g("surp_slope_rt") if with_surp else 0.0,
        surp_slope_reg=g("surp_slope_reg") if with_surp else 0.0,
        surp_slope_out=g("surp_slope_out") if with_surp else 0.0,
        u_rt=taus["tau_rt_part"] * pv[layout.sl("z_rt_part")],
        u_reg=taus["tau_reg_part"] * pv[layout.sl("z_reg_part")],
        u_out=taus["tau_out_part"] * pv[layout.sl("z_out_part")],
        u_surp=u_surp,
        w_rt=taus["tau_rt_item"] * pv[layout.sl("z_rt_item")],
    )
    return cp, logjac


def reg_log_prior(pv: np.ndarray, priors: PriorConfig, layout: RegLayout) -> float:
    cp, logjac = reg_transform(pv, layout)
    g = lambda name: float(pv[layout.sl(name)][0])
    lp = norm_logpdf(cp.intercept, priors.mu_loc, priors.mu_scale)
    lp += norm_logpdf(cp.len_slope, 0.0, priors.len_slope_scale)
    lp += norm_logpdf(cp.reg_intercept, 0.0, priors.prob_logit_scale)
    lp += norm_logpdf(cp.out_intercept, 0.0, priors.prob_logit_scale)
    if layout.with_surprisal:
        for s in ("surp_slope_rt", "surp_slope_reg", "surp_slope_out"):
            lp += norm_logpdf(getattr(cp, s), 0.0, priors.surp_slope_scale)
    lp += halfnorm_logpdf(cp.sigma, priors.sigma_scale)
    for tname in layout.tau_names:
        lp += halfnorm_logpdf(math.exp(min(max(g(tname), -40.0), 40.0)), priors.tau_scale)
    for zname in layout.z_names:
        lp += float(np.sum(norm_logpdf(pv[layout.sl(zname)])))
    return lp + logjac


def regression_loglik(trial: Trial, cp_reg: RegressionParams) -> float:
    """Log-likelihood of one trial under a regression competitor.

    Lognormal reading times at both regions, plus Bernoulli factors for
    the rereading flag and the end-of-trial response where observed; the
    surprisal terms vanish in the baseline model.
    """
    layout = cp_reg.layout
    if layout.participant_index is None:
        raise ValueError("layout carries no id maps")
    if layout.with_surprisal and not trial.has_surprisal:
        raise ValueError(f"trial {trial.key} lacks surprisal values")
    i = layout.participant_index[trial.participant_id]
    j = layout.item_index[trial.item_id]
    slope_rt = cp_reg.surp_slope_rt + cp_reg.u_surp[i]
    base = cp_reg.intercept + cp_reg.u_rt[i] + cp_reg.w_rt[j]
    ll = 0.0
    for rt, length, surp in ((trial.rt_crit, trial.len_crit, trial.surp_crit or 0.0),
                             (trial.rt_spill, trial.len_spill, trial.surp_spill or 0.0)):
        loc = base + cp_reg.len_slope * length + slope_rt * surp
        lx = math.log(rt)
        z = (lx - loc) / cp_reg.sigma
        ll += -lx - math.log(cp_reg.sigma) - LOG_SQRT_2PI - 0.5 * z * z
    surp_c = trial.surp_crit or 0.0
    if trial.regression != Regression.NA:
        eta = cp_reg.reg_intercept + cp_reg.surp_slope_reg * surp_c + cp_reg.u_reg[i]
        ll += float(log_expit(eta if trial.regression == Regression.YES else -eta))
    if trial.outcome != Outcome.NA:
        eta = cp_reg.out_intercept + cp_reg.surp_slope_out * surp_c + cp_reg.u_out[i]
        ll += float(log_expit(eta if trial.outcome == Outcome.GOOD else -eta))
    return ll


# ---------------------------------------------------------------------------
# PSIS-LOO

@dataclass(frozen=True)
class LooResult:
    """PSIS-LOO estimate with per-trial terms and tail diagnostics."""

    elpd_hat: float
    se: float
    pointwise: np.ndarray
    pareto_k: np.ndarray
    degenerate: np.ndarray
    n_draws: int

    @property
    def n_high_k(self) -> int:
        return int(np.sum(self.pareto_k[~self.degenerate] > 0.7))

    def to_dict(self) -> dict:
        return {
            "elpd_hat": self.elpd_hat,
            "se": self.se,
            "n_trials": int(len(self.pointwise)),
            "n_draws": self.n_draws,
            "n_pareto_k_above_0.7": self.n_high_k,
            "n_degenerate": int(np.sum(self.degenerate)),
            "pointwise_elpd": [float(x) for x in self.pointwise],
            "pareto_k": [None if np.isnan(k) else float(k) for k in self.pareto_k],
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def gpd_fit(tail_sample) -> tuple[float, float]:
    """Generalized-Pareto fit to positive exceedances.

    Empirical-Bayes profile estimator over the scale-ratio grid with the
    weak n/(n+10) prior pull on the shape toward 0.5 (Zhang & Stephens
    style estimating equation). Returns (k, sigma) with k > 0 meaning a
    heavy tail.
    """
    x = np.sort(np.asarray(tail_sample, dtype=float))
    n = len(x)
    if n < 5:
        raise ValueError(f"need at least 5 tail samples, got {n}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("tail sample must be finite and positive")
    if x[0] == x[-1]:
        raise ValueError("degenerate tail sample (all values equal)")

    m = 30 + int(math.sqrt(n))
    b = 1.0 - np.sqrt(m / (np.arange(1, m + 1) - 0.5))
    b /= 3.0 * x[int(n / 4 + 0.5) - 1]
    b += 1.0 / x[-1]
    k_cand = np.mean(np.log1p(-b[:, None] * x), axis=1)
    profile = n * (np.log(-(b / k_cand)) - k_cand - 1.0)
    weights = 1.0 / np.sum(np.exp(profile - profile[:, None]), axis=1)
    keep = weights >= 10 * np.finfo(float).eps
    weights, b = weights[keep], b[keep]
    weights /= weights.sum()
    b_post = float(np.sum(b * weights))
    k_post = float(np.mean(np.log1p(-b_post * x)))
    sigma = -k_post / b_post
    k_post = (n * k_post + 10.0 * 0.5) / (n + 10.0)
    return k_post, sigma


def _gp_quantiles(probs: np.ndarray, k: float, sigma: float) -> np.ndarray:
    if abs(k) < np.finfo(float).eps:
        q = -np.log1p(-probs)
    else:
        q = np.expm1(-k * np.log1p(-probs)) / k
    return sigma * q


def _smooth_column(ll_col: np.ndarray) -> tuple[np.ndarray, float]:
    """Smoothed, truncated, normalized log importance weights for one trial."""
    S = len(ll_col)
    lw = -ll_col
    lw = lw - np.max(lw)
    n_tail = int(min(0.2 * S, 3.0 * math.sqrt(S)))
    k_hat = np.nan
    if n_tail >= 5:
        order = np.argsort(lw)
        cutoff = max(lw[order[-n_tail - 1]], math.log(np.finfo(float).tiny))
        tail_ids = np.where(lw > cutoff)[0]
        if len(tail_ids) >= 5:
            tail_sorted = tail_ids[np.argsort(lw[tail_ids])]
            exceed = np.exp(lw[tail_sorted]) - math.exp(cutoff)
            try:
                k_hat, sigma = gpd_fit(exceed[exceed > 0] if np.any(exceed <= 0) else exceed)
            except ValueError:
                k_hat = np.nan
            if np.isfinite(k_hat):
                sti = (np.arange(len(tail_sorted)) + 0.5) / len(tail_sorted)
                lw[tail_sorted] = np.log(_gp_quantiles(sti, k_hat, sigma) + math.exp(cutoff))
    # truncate at S^(3/4) times the mean weight
    cap = (logsumexp(lw) - math.log(S)) + 0.75 * math.log(S)
    lw = np.minimum(lw, cap)
    lw = lw - logsumexp(lw)
    return lw, k_hat


def psis_loo(ll: np.ndarray) -> LooResult:
    """PSIS-LOO over a (draws x trials) pointwise log-likelihood matrix."""
    ll = np.asarray(ll, dtype=float)
    if ll.ndim != 2:
        raise ValueError("expected a (draws, trials) matrix")
    S, n = ll.shape
    if S < 100:
        raise ValueError(f"need at least 100 draws, got {S}")
    if not np.all(np.isfinite(ll)):
        raise ValueError("non-finite pointwise log-likelihoods")
    pointwise = np.empty(n)
    pareto_k = np.full(n, np.nan)
    degenerate = np.zeros(n, dtype=bool)
    for i in range(n):
        col = ll[:, i]
        if np.ptp(col) == 0.0:
            pointwise[i] = col[0]
            degenerate[i] = True
            continue
        lw, k_hat = _smooth_column(col)
        pareto_k[i] = k_hat
        pointwise[i] = logsumexp(lw + col)
    se = math.sqrt(n * float(np.var(pointwise, ddof=1))) if n > 1 else 0.0
    return LooResult(
        elpd_hat=float(np.sum(pointwise)),
        se=se,
        pointwise=pointwise,
        pareto_k=pareto_k,
        degenerate=degenerate,
        n_draws=S,
    )


def elpd_diff(a: LooResult, b: LooResult) -> tuple[float, float]:
    """Pairwise elpd difference a - b with its paired SE."""
    if len(a.pointwise) != len(b.pointwise):
        raise ValueError("LooResults cover different numbers of trials")
    d = a.pointwise - b.pointwise
    n = len(d)
    se = math.sqrt(n * float(np.var(d, ddof=1))) if n > 1 else 0.0
    return float(np.sum(d)), se


def pointwise_loglik(pd, ts: TrialSet, model: ModelKind,
                     priors: PriorConfig | None = None) -> np.ndarray:
    """(draws x trials) log-likelihood matrix from retained posterior draws."""
    from .engine import build_program  # deferred: engine imports this module

    program = build_program(model, ts, priors)
    if list(pd.names) != list(program.names):
        raise ValueError(
            "draws do not match the model layout for this dataset "
            f"({len(pd.names)} vs {len(program.names)} parameters)"
        )
    flat = pd.flat_draws()
    out = np.empty((flat.shape[0], len(ts)))
    for s in range(flat.shape[0]):
        out[s] = program.trial_logliks(flat[s])
    return out


def write_pointwise_delta_csv(ts: TrialSet, a: LooResult, b: LooResult, path) -> None:
    """Plot-ready per-trial elpd differences (a - b) by category and RT."""
    from .data import trial_category

    if len(a.pointwise) != len(ts) or len(b.pointwise) != len(ts):
        raise ValueError("LooResult length does not match the trial set")
    d = a.pointwise - b.pointwise
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("trial_id,category,rt_crit,delta_elpd\n")
        for t, dd in zip(ts, d):
            tid = f"{t.study_id}:{t.participant_id}:{t.item_id}"
            fh.write(f"{tid},{trial_category(t)},{t.rt_crit:.17g},{dd:.17g}\n")
