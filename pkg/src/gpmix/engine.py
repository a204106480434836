"""JAX-backed log-posterior programs for the four models.

Compiles a dataset into grouped arrays plus a jitted value-and-gradient
function over the flat coordinate vector. The pure-Python modules
(`tree`, `rtmix`, `hier`, `compare`) define the reference semantics; the
programs here must match them trial-for-trial and are what the sampler
actually runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np
from jax.nn import log_sigmoid
from jax.scipy.special import log_ndtr, logsumexp

from . import hier
from .compare import ModelKind, RegLayout
from .data import Ambiguity, Construction, DisambType, Outcome, Paradigm, Regression, Task, TrialSet
from .hier import ITEM_EFFECTS, PART_EFFECTS, ParamLayout, PriorConfig
from .rtmix import COMPONENT_COSTS
from .tree import PROB_NAMES, Component, symbolic_paths

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
CLAMP = hier.CLAMP

_OUT_CODE = {Outcome.GOOD: 0, Outcome.BAD: 1, Outcome.NA: 2}
_REG_CODE = {Regression.NO: 0, Regression.YES: 1, Regression.NA: 2}


@dataclass(frozen=True)
class PathTable:
    """Constant path structure for one (allows_regression, task) tree shape."""

    e_pos: np.ndarray        # (P, 8) exponents of p_k in the path probability
    e_neg: np.ndarray        # (P, 8) exponents of (1 - p_k)
    mask3_crit: np.ndarray   # (P, 3) att/gp/reanalysis costs at the critical region
    mask3_spill: np.ndarray  # (P, 3) same at spillover
    regr_crit: np.ndarray    # (P,) regression cost applies at the critical region
    sig1_crit: np.ndarray    # (P,) component C1 (narrow scale) at critical
    sig1_spill: np.ndarray
    log_out: np.ndarray      # (3, P) log P(outcome code | path); NA row is zero
    log_reg: np.ndarray      # (3, P) rereading match; NA row is zero


def build_path_table(allows_regression: bool, task: Task) -> PathTable:
    syms = symbolic_paths(allows_regression, task)
    P = len(syms)
    e_pos = np.zeros((P, 8))
    e_neg = np.zeros((P, 8))
    m3c = np.zeros((P, 3))
    m3s = np.zeros((P, 3))
    regr_c = np.zeros(P)
    sig1_c = np.zeros(P, dtype=bool)
    sig1_s = np.zeros(P, dtype=bool)
    log_out = np.zeros((3, P))
    log_reg = np.zeros((3, P))
    for k, sym in enumerate(syms):
        for name, complement in sym.factors:
            col = PROB_NAMES.index(name)
            (e_neg if complement else e_pos)[k, col] += 1.0
        for region, comp, m3 in (("crit", sym.comp_crit, m3c), ("spill", sym.comp_spill, m3s)):
            att, gp, rean, regr = COMPONENT_COSTS[comp]
            m3[k] = [att, gp, rean]
            if region == "crit":
                regr_c[k] = float(regr or sym.add_regression_cost_crit)
        sig1_c[k] = sym.comp_crit == Component.C1
        sig1_s[k] = sym.comp_spill == Component.C1
        og = sym.outcome_good
        if og is None:
            log_out[0, k] = log_out[1, k] = -np.inf  # outcome never observed
        else:
            log_out[0, k] = math.log(og) if og > 0 else -np.inf
            log_out[1, k] = math.log(1.0 - og) if og < 1 else -np.inf
        log_reg[0, k] = 0.0 if not sym.regression_observed else -np.inf
        log_reg[1, k] = 0.0 if sym.regression_observed else -np.inf
    return PathTable(e_pos, e_neg, m3c, m3s, regr_c, sig1_c, sig1_s, log_out, log_reg)


@dataclass(frozen=True)
class GroupArrays:
    table: PathTable
    idx: np.ndarray       # positions in the original trial order
    part: np.ndarray
    item: np.ndarray
    amb: np.ndarray
    mvrr: np.ndarray
    amb_mvrr: np.ndarray
    amb_anim: np.ndarray
    is_et: np.ndarray
    allows_reg: bool
    rt_c: np.ndarray
    rt_s: np.ndarray
    len_c: np.ndarray
    len_s: np.ndarray
    surp_c: np.ndarray
    surp_s: np.ndarray
    out_code: np.ndarray
    reg_code: np.ndarray


def group_trials(ts: TrialSet, participant_index=None, item_index=None) -> list[GroupArrays]:
    pidx = participant_index if participant_index is not None else ts.participant_index
    iidx = item_index if item_index is not None else ts.item_index
    groups: dict[tuple[bool, Task], list[int]] = {}
    for i, t in enumerate(ts):
        groups.setdefault((t.paradigm.allows_regression, t.task), []).append(i)
    out = []
    for (allows_reg, task), idx in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        trials = [ts.trials[i] for i in idx]
        out.append(GroupArrays(
            table=build_path_table(allows_reg, task),
            idx=np.array(idx),
            part=np.array([pidx[t.participant_id] for t in trials]),
            item=np.array([iidx[t.item_id] for t in trials]),
            amb=np.array([t.ambiguity == Ambiguity.AMBIGUOUS for t in trials], dtype=float),
            mvrr=np.array([t.construction == Construction.MVRR for t in trials], dtype=float),
            amb_mvrr=np.array([t.ambiguity == Ambiguity.AMBIGUOUS
                               and t.construction == Construction.MVRR for t in trials], dtype=float),
            amb_anim=np.array([t.ambiguity == Ambiguity.AMBIGUOUS
                               and t.disamb_type == DisambType.ANIMACY for t in trials], dtype=float),
            is_et=np.array([t.paradigm == Paradigm.ET for t in trials], dtype=float),
            allows_reg=allows_reg,
            rt_c=np.array([t.rt_crit for t in trials]),
            rt_s=np.array([t.rt_spill for t in trials]),
            len_c=np.array([t.len_crit for t in trials], dtype=float),
            len_s=np.array([t.len_spill for t in trials], dtype=float),
            surp_c=np.array([t.surp_crit or 0.0 for t in trials]),
            surp_s=np.array([t.surp_spill or 0.0 for t in trials]),
            out_code=np.array([_OUT_CODE[t.outcome] for t in trials]),
            reg_code=np.array([_REG_CODE[t.regression] for t in trials]),
        ))
    return out


# ---------------------------------------------------------------------------
# JAX mirrors of the hierarchical transform and prior (hier.py is the
# reference; tests pin agreement).

def _jnorm_logpdf(x, loc=0.0, scale=1.0):
    z = (x - loc) / scale
    return -0.5 * z * z - jnp.log(scale) - LOG_SQRT_2PI


def _jchol_from_coords(y, d):
    z = jnp.tanh(y)
    logjac = jnp.sum(jnp.log1p(-z * z))
    rows = [jnp.zeros(d).at[0].set(1.0)]
    idx = 0
    for i in range(1, d):
        rem = 1.0
        row = jnp.zeros(d)
        for j in range(i):
            logjac = logjac + 0.5 * jnp.log(rem)
            lij = z[idx] * jnp.sqrt(rem)
            row = row.at[j].set(lij)
            rem = rem - lij * lij
            idx += 1
        row = row.at[i].set(jnp.sqrt(jnp.maximum(rem, 1e-300)))
        rows.append(row)
    return jnp.stack(rows), logjac


def _jlkj_logpdf(L, eta, d):
    ks = jnp.arange(1, d)
    return jnp.sum((d - ks - 1 + 2.0 * eta - 2.0) * jnp.log(jnp.diag(L)[1:]))


def _jtransform(pv, layout: ParamLayout):
    """JAX twin of hier.transform; returns a dict of constrained values."""
    g = lambda name: pv[layout.sl(name)][0] if layout.sl(name).stop - layout.sl(name).start == 1 \
        else pv[layout.sl(name)]
    cl = lambda x: jnp.clip(x, -CLAMP, CLAMP)

    c = {}
    c["mu"] = g("mu")
    a1, a2, a3 = cl(g("log_sigma1")), cl(g("log_sigma2_inc")), cl(g("log_shift"))
    c["sigma1"] = jnp.exp(a1)
    c["sigma2"] = c["sigma1"] + jnp.exp(a2)
    c["shift"] = jnp.exp(a3)
    logjac = a1 + a2 + a3
    for name in ("att_cost", "gp_cost", "reanalysis_cost", "regression_cost"):
        c[name] = jnp.exp(cl(g(f"log_{name}")))
    for a in ("alpha_attentive", "alpha_gp", "alpha_overt", "alpha_postpone",
              "alpha_success_o", "alpha_success_c", "alpha_infer", "alpha_base_regress"):
        c[a] = g(a)
    for b in ("beta1", "beta2", "beta3", "beta4", "beta5"):
        c[b] = g(b)
    c["gamma_animacy"] = g("gamma_animacy")
    c["len_slope"] = g("len_slope")
    c["surp_slope"] = g("surp_slope") if layout.has_surprisal_slope else jnp.asarray(0.0)
    c["et_shift_mult"] = jax.nn.sigmoid(g("et_shift_logit"))
    c["et_regr_mult"] = jax.nn.sigmoid(g("et_regr_logit"))
    c["et_overt_surplus"] = jnp.exp(cl(g("log_et_overt_surplus")))

    lt_part = cl(pv[layout.sl("log_tau_part")])
    lt_item = cl(pv[layout.sl("log_tau_item")])
    c["tau_part"] = jnp.exp(lt_part)
    c["tau_item"] = jnp.exp(lt_item)
    logjac = logjac + jnp.sum(lt_part) + jnp.sum(lt_item)

    L_part, j1 = _jchol_from_coords(pv[layout.sl("chol_part")], len(PART_EFFECTS))
    L_item, j2 = _jchol_from_coords(pv[layout.sl("chol_item")], len(ITEM_EFFECTS))
    c["L_part"], c["L_item"] = L_part, L_item
    logjac = logjac + j1 + j2

    z_part = pv[layout.sl("z_part")].reshape(len(PART_EFFECTS), layout.n_participants)
    z_item = pv[layout.sl("z_item")].reshape(len(ITEM_EFFECTS), layout.n_items)
    c["z_part"], c["z_item"] = z_part, z_item
    c["part_effects"] = c["tau_part"][:, None] * (L_part @ z_part)
    c["item_effects"] = c["tau_item"][:, None] * (L_item @ z_item)
    return c, logjac


def _jlog_prior(pv, c, logjac, layout: ParamLayout, priors: PriorConfig):
    g = lambda name: pv[layout.sl(name)][0]
    lp = _jnorm_logpdf(c["mu"], priors.mu_loc, priors.mu_scale)
    for a in ("alpha_attentive", "alpha_gp", "alpha_overt", "alpha_postpone",
              "alpha_success_o", "alpha_success_c", "alpha_infer", "alpha_base_regress"):
        lp += _jnorm_logpdf(c[a], 0.0, priors.prob_logit_scale)
    for name in ("log_att_cost", "log_gp_cost", "log_reanalysis_cost", "log_regression_cost"):
        lp += _jnorm_logpdf(g(name), priors.cost_log_loc, priors.cost_log_scale)
    for b in ("beta1", "beta2", "beta3", "beta4", "beta5"):
        lp += _jnorm_logpdf(c[b], 0.0, priors.beta_scale)
    lp += _jnorm_logpdf(c["gamma_animacy"], 0.0, priors.beta_scale)
    lp += _jnorm_logpdf(c["len_slope"], 0.0, priors.len_slope_scale)
    if layout.has_surprisal_slope:
        lp += _jnorm_logpdf(c["surp_slope"], 0.0, priors.surp_slope_scale)
    lp += _jnorm_logpdf(g("et_shift_logit"), 0.0, priors.et_logit_scale)
    lp += _jnorm_logpdf(g("et_regr_logit"), 0.0, priors.et_logit_scale)
    lp += _jnorm_logpdf(g("log_et_overt_surplus"), priors.et_overt_log_loc,
                        priors.et_overt_log_scale)
    lp += _jnorm_logpdf(c["shift"], priors.shift_loc, priors.shift_scale) \
        - log_ndtr(priors.shift_loc / priors.shift_scale)
    lp += math.log(2.0) + _jnorm_logpdf(c["sigma1"], 0.0, priors.sigma_scale)
    lp += math.log(2.0) + _jnorm_logpdf(c["sigma2"] - c["sigma1"], 0.0, priors.sigma_scale)
    lp += jnp.sum(math.log(2.0) + _jnorm_logpdf(c["tau_part"], 0.0, priors.tau_scale))
    lp += jnp.sum(math.log(2.0) + _jnorm_logpdf(c["tau_item"], 0.0, priors.tau_scale))
    lp += _jlkj_logpdf(c["L_part"], priors.lkj_eta, len(PART_EFFECTS))
    lp += _jlkj_logpdf(c["L_item"], priors.lkj_eta, len(ITEM_EFFECTS))
    lp += jnp.sum(_jnorm_logpdf(c["z_part"]))
    lp += jnp.sum(_jnorm_logpdf(c["z_item"]))
    return lp + logjac


_PEFF = {name: k for k, name in enumerate(PART_EFFECTS)}
_IEFF = {name: k for k, name in enumerate(ITEM_EFFECTS)}


def _group_logliks(c, grp: GroupArrays):
    """Per-trial log-likelihood for one trial group, (n_g,)."""
    t = grp.table
    u = c["part_effects"]
    w = c["item_effects"]

    lg_gp = (c["alpha_gp"] + c["beta1"] * grp.amb + c["beta2"] * grp.amb_mvrr
             + c["gamma_animacy"] * grp.amb_anim
             + u[_PEFF["gp"], grp.part] + w[_IEFF["gp"], grp.item])
    logits = jnp.stack([
        c["alpha_attentive"] + u[_PEFF["attentive"], grp.part],
        lg_gp,
        c["alpha_overt"] + c["et_overt_surplus"] * grp.is_et + u[_PEFF["overt"], grp.part],
        c["alpha_postpone"] + u[_PEFF["postpone"], grp.part],
        c["alpha_success_o"] + c["beta3"] * grp.mvrr,
        c["alpha_success_c"] + c["beta4"] * grp.mvrr,
        c["alpha_infer"] + u[_PEFF["infer"], grp.part] + w[_IEFF["infer"], grp.item],
        c["alpha_base_regress"] + c["beta5"] * grp.is_et + u[_PEFF["base_regress"], grp.part],
    ], axis=1)  # (n, 8) in PROB_NAMES order
    logp = log_sigmoid(logits)
    log1mp = log_sigmoid(-logits)
    path_logprob = logp @ t.e_pos.T + log1mp @ t.e_neg.T  # (n, P)

    obs = t.log_out[grp.out_code] + t.log_reg[grp.reg_code]  # (n, P)

    costs3 = jnp.stack([c["att_cost"], c["gp_cost"], c["reanalysis_cost"]])
    regr_eff = c["regression_cost"] * jnp.where(grp.is_et > 0, c["et_regr_mult"], 1.0)
    shift = c["shift"] * jnp.exp(u[_PEFF["shift"], grp.part])
    shift = shift * jnp.where(grp.is_et > 0, c["et_shift_mult"], 1.0)

    def region_logpdf(rt, lens, surp, mask3, regr_mask, sig1):
        base = c["mu"] + c["len_slope"] * lens + c["surp_slope"] * surp  # (n,)
        loc = base[:, None] + (mask3 @ costs3)[None, :] + regr_mask[None, :] * regr_eff[:, None]
        sig = jnp.where(sig1, c["sigma1"], c["sigma2"])[None, :]
        x = rt - shift
        ok = x > 0
        lx = jnp.log(jnp.where(ok, x, 1.0))[:, None]
        lpdf = -lx - jnp.log(sig) - LOG_SQRT_2PI - 0.5 * ((lx - loc) / sig) ** 2
        return jnp.where(ok[:, None], lpdf, -jnp.inf)

    lpdf_c = region_logpdf(grp.rt_c, grp.len_c, grp.surp_c,
                           t.mask3_crit, t.regr_crit, t.sig1_crit)
    lpdf_s = region_logpdf(grp.rt_s, grp.len_s, grp.surp_s,
                           t.mask3_spill, np.zeros(len(t.regr_crit)), t.sig1_spill)
    return logsumexp(path_logprob + obs + lpdf_c + lpdf_s, axis=1)


def _build_mpt_functions(ts: TrialSet, layout: ParamLayout, priors: PriorConfig):
    groups = group_trials(ts, layout.participant_index, layout.item_index)
    n = len(ts)

    def trial_logliks(pv):
        c, _ = _jtransform(pv, layout)
        out = jnp.zeros(n)
        for grp in groups:
            out = out.at[grp.idx].set(_group_logliks(c, grp))
        return out

    def logpost(pv):
        c, logjac = _jtransform(pv, layout)
        lp = _jlog_prior(pv, c, logjac, layout, priors)
        for grp in groups:
            lp = lp + jnp.sum(_group_logliks(c, grp))
        return lp

    def logprior_only(pv):
        c, logjac = _jtransform(pv, layout)
        return _jlog_prior(pv, c, logjac, layout, priors)

    return trial_logliks, logpost, logprior_only


# ---------------------------------------------------------------------------
# Regression competitors (baseline / surprisal), mirroring compare.py.

def _build_reg_functions(ts: TrialSet, layout: RegLayout, priors: PriorConfig):
    pidx = layout.participant_index if layout.participant_index is not None \
        else ts.participant_index
    iidx = layout.item_index if layout.item_index is not None else ts.item_index
    part = np.array([pidx[t.participant_id] for t in ts], dtype=int)
    item = np.array([iidx[t.item_id] for t in ts], dtype=int)
    rt_c = np.array([t.rt_crit for t in ts])
    rt_s = np.array([t.rt_spill for t in ts])
    len_c = np.array([t.len_crit for t in ts], dtype=float)
    len_s = np.array([t.len_spill for t in ts], dtype=float)
    surp_c = np.array([t.surp_crit or 0.0 for t in ts])
    surp_s = np.array([t.surp_spill or 0.0 for t in ts])
    has_out = np.array([t.outcome != Outcome.NA for t in ts], dtype=float)
    out_good = np.array([t.outcome == Outcome.GOOD for t in ts], dtype=float)
    has_reg = np.array([t.regression != Regression.NA for t in ts], dtype=float)
    reg_yes = np.array([t.regression == Regression.YES for t in ts], dtype=float)
    with_surp = layout.with_surprisal

    def constrain(pv):
        g = lambda name: pv[layout.sl(name)][0] if layout.sl(name).stop - layout.sl(name).start == 1 \
            else pv[layout.sl(name)]
        cl = lambda x: jnp.clip(x, -CLAMP, CLAMP)
        c = {n: g(n) for n in layout.scalar_names}
        c["sigma"] = jnp.exp(cl(g("log_sigma")))
        logjac = cl(g("log_sigma"))
        for tname in layout.tau_names:
            coord = cl(g(tname))
            c[tname.replace("log_", "")] = jnp.exp(coord)
            logjac = logjac + coord
        return c, logjac

    def trial_logliks(pv):
        c, _ = constrain(pv)
        u_rt = c["tau_rt_part"] * pv[layout.sl("z_rt_part")]
        w_rt = c["tau_rt_item"] * pv[layout.sl("z_rt_item")]
        u_reg = c["tau_reg_part"] * pv[layout.sl("z_reg_part")]
        u_out = c["tau_out_part"] * pv[layout.sl("z_out_part")]
        if with_surp:
            slope_rt = c["surp_slope_rt"] + c["tau_surp_part"] * pv[layout.sl("z_surp_part")]
            srt = slope_rt[part]
            s_reg = c["surp_slope_reg"]
            s_out = c["surp_slope_out"]
        else:
            srt = jnp.zeros(len(part))
            s_reg = s_out = 0.0
        base = c["intercept"] + u_rt[part] + w_rt[item]
        ll = jnp.zeros(len(part))
        for rt, lens, surp in ((rt_c, len_c, surp_c), (rt_s, len_s, surp_s)):
            loc = base + c["len_slope"] * lens + srt * surp
            lx = jnp.log(rt)
            ll += -lx - jnp.log(c["sigma"]) - LOG_SQRT_2PI - 0.5 * ((lx - loc) / c["sigma"]) ** 2
        eta_reg = c["reg_intercept"] + s_reg * surp_c + u_reg[part]
        ll += has_reg * (reg_yes * log_sigmoid(eta_reg) + (1 - reg_yes) * log_sigmoid(-eta_reg))
        eta_out = c["out_intercept"] + s_out * surp_c + u_out[part]
        ll += has_out * (out_good * log_sigmoid(eta_out) + (1 - out_good) * log_sigmoid(-eta_out))
        return ll

    def logprior_only(pv):
        c, logjac = constrain(pv)
        lp = _jnorm_logpdf(c["intercept"], priors.mu_loc, priors.mu_scale)
        lp += _jnorm_logpdf(c["len_slope"], 0.0, priors.len_slope_scale)
        lp += _jnorm_logpdf(c["reg_intercept"], 0.0, priors.prob_logit_scale)
        lp += _jnorm_logpdf(c["out_intercept"], 0.0, priors.prob_logit_scale)
        if with_surp:
            for s in ("surp_slope_rt", "surp_slope_reg", "surp_slope_out"):
                lp += _jnorm_logpdf(c[s], 0.0, priors.surp_slope_scale)
        lp += math.log(2.0) + _jnorm_logpdf(c["sigma"], 0.0, priors.sigma_scale)
        for tname in layout.tau_names:
            lp += math.log(2.0) + _jnorm_logpdf(c[tname.replace("log_", "")], 0.0, priors.tau_scale)
        for zname in layout.z_names:
            lp += jnp.sum(_jnorm_logpdf(pv[layout.sl(zname)]))
        return lp + logjac

    def logpost(pv):
        return logprior_only(pv) + jnp.sum(trial_logliks(pv))

    return trial_logliks, logpost, logprior_only


# ---------------------------------------------------------------------------

@dataclass
class ModelProgram:
    """A model compiled against one dataset."""

    kind: ModelKind
    layout: ParamLayout | RegLayout
    n_trials: int
    _logpost_and_grad: Callable
    _logpost: Callable
    _trial_logliks: Callable
    _logprior: Callable

    @property
    def n_params(self) -> int:
        return self.layout.size

    @property
    def names(self) -> list[str]:
        return self.layout.names

    def logpost_and_grad(self, pv: np.ndarray) -> tuple[float, np.ndarray]:
        """Rejection contract: non-finite log-density maps to (-inf, 0)."""
        v, g = self._logpost_and_grad(jnp.asarray(pv, dtype=jnp.float64))
        v = float(v)
        if not math.isfinite(v):
            return -math.inf, np.zeros(self.layout.size)
        return v, np.asarray(g)

    def logpost(self, pv: np.ndarray) -> float:
        v = float(self._logpost(jnp.asarray(pv, dtype=jnp.float64)))
        return v if math.isfinite(v) else -math.inf

    def trial_logliks(self, pv: np.ndarray) -> np.ndarray:
        return np.asarray(self._trial_logliks(jnp.asarray(pv, dtype=jnp.float64)))

    def log_prior(self, pv: np.ndarray) -> float:
        return float(self._logprior(jnp.asarray(pv, dtype=jnp.float64)))

    def init_position(self, rng: np.random.Generator) -> np.ndarray:
        """Dispersed init: population coordinates U(-2, 2), z at zero."""
        pv = np.zeros(self.layout.size)
        for name in self.layout.init_blocks:
            s = self.layout.sl(name)
            pv[s] = rng.uniform(-2.0, 2.0, s.stop - s.start)
        return pv


def build_program(kind: ModelKind, ts: TrialSet, priors: PriorConfig | None = None,
                  layout: ParamLayout | RegLayout | None = None) -> ModelProgram:
    """Compile a model against a dataset.

    A ``layout`` built for a superset of the data may be passed so that
    programs over different trial subsets share one parameter space
    (likelihoods then add across subsets). An empty TrialSet yields the
    prior alone.
    """
    priors = priors or PriorConfig()
    priors.validate()
    if kind.needs_surprisal:
        missing = [t.key for t in ts if not t.has_surprisal]
        if missing:
            raise ValueError(
                f"{kind.value} requires surprisal on every trial; "
                f"{len(missing)} trials lack it (first: {missing[0]})"
            )
    if kind in (ModelKind.MPT, ModelKind.MPT_PLUS_SURPRISAL):
        layout = layout or ParamLayout.for_trialset(
            ts, has_surprisal_slope=kind == ModelKind.MPT_PLUS_SURPRISAL)
        trial_logliks, logpost, logprior = _build_mpt_functions(ts, layout, priors)
    else:
        layout = layout or RegLayout.for_trialset(ts, with_surprisal=kind == ModelKind.SURPRISAL)
        trial_logliks, logpost, logprior = _build_reg_functions(ts, layout, priors)
    return ModelProgram(
        kind=kind,
        layout=layout,
        n_trials=len(ts),
        _logpost_and_grad=jax.jit(jax.value_and_grad(logpost)),
        _logpost=jax.jit(logpost),
        _trial_logliks=jax.jit(trial_logliks),
        _logprior=jax.jit(logprior),
    )
