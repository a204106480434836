"""Hierarchical parameterization: unconstrained coordinates to constrained
population parameters, fixed effects, and crossed random effects.

The sampler works on a flat real vector. This module owns the coordinate
layout, the constraining transform with its log-Jacobian, the per-trial
assembly of process probabilities and RT parameters, and the log-prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_ndtr

from .data import Ambiguity, Construction, DisambType, Paradigm, Task, Trial, TrialSet
from .rtmix import RtParams
from .tree import ProcessProbs

# Participant random effects, in layout order; items vary garden-pathing
# and inference only.
PART_EFFECTS = ("shift", "attentive", "overt", "postpone", "infer", "base_regress", "gp")
ITEM_EFFECTS = ("gp", "infer")

_ALPHAS = (
    "alpha_attentive", "alpha_gp", "alpha_overt", "alpha_postpone",
    "alpha_success_o", "alpha_success_c", "alpha_infer", "alpha_base_regress",
)
_COSTS = ("log_att_cost", "log_gp_cost", "log_reanalysis_cost", "log_regression_cost")
_BETAS = ("beta1", "beta2", "beta3", "beta4", "beta5")

CLAMP = 40.0  # exp/logit coordinates are clipped here before transforming

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def norm_logpdf(x, loc=0.0, scale=1.0):
    z = (x - loc) / scale
    return -0.5 * z * z - math.log(scale) - LOG_SQRT_2PI


def halfnorm_logpdf(x, scale):
    return math.log(2.0) + norm_logpdf(x, 0.0, scale)


def truncnorm_logpdf(x, loc, scale, lower=0.0):
    # normal density renormalized to [lower, inf)
    if x < lower:
        return -math.inf
    log_tail = log_ndtr((loc - lower) / scale)
    return norm_logpdf(x, loc, scale) - log_tail


@dataclass(frozen=True)
class PriorConfig:
    """Named prior hyperparameters; every default is overridable from file.

    Scales must be positive. Keys marked (constrained) are densities on the
    transformed quantity and pick up the matching Jacobian term in
    ``log_prior``; all others act on the raw coordinate.
    """

    mu_loc: float = 5.8            # log-ms RT location
    mu_scale: float = 1.0
    prob_logit_scale: float = 1.5  # population logits ~ N(0, .)
    cost_log_loc: float = math.log(0.1)
    cost_log_scale: float = 1.0    # log-costs ~ N(log 0.1, .)
    shift_loc: float = 150.0       # (constrained) ms, truncated at 0
    shift_scale: float = 50.0
    sigma_scale: float = 0.5       # (constrained) half-normal on sigma1 and the sigma2 increment
    beta_scale: float = 1.0
    len_slope_scale: float = 0.5
    surp_slope_scale: float = 0.5
    tau_scale: float = 0.5         # (constrained) half-normal on random-effect scales
    lkj_eta: float = 4.0
    et_logit_scale: float = 1.0    # ET shift / regression-cost deficit coordinates
    et_overt_log_loc: float = -1.0
    et_overt_log_scale: float = 1.0

    def validate(self) -> None:
        for name in ("mu_scale", "prob_logit_scale", "cost_log_scale", "shift_scale",
                     "sigma_scale", "beta_scale", "len_slope_scale", "surp_slope_scale",
                     "tau_scale", "et_logit_scale", "et_overt_log_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"prior scale {name} must be positive")
        if self.lkj_eta <= 0:
            raise ValueError("lkj_eta must be positive")

    @classmethod
    def from_file(cls, path) -> "PriorConfig":
        """Read ``key = value`` lines; '#' starts a comment."""
        overrides = {}
        valid = set(cls.__dataclass_fields__)
        with open(path, encoding="utf-8") as fh:
            for ln, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{ln}: expected 'key = value'")
                key, val = (s.strip() for s in line.split("=", 1))
                if key not in valid:
                    raise ValueError(f"{path}:{ln}: unknown prior key {key!r}")
                overrides[key] = float(val)
        cfg = cls(**overrides)
        cfg.validate()
        return cfg

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for name in self.__dataclass_fields__:
                fh.write(f"{name} = {getattr(self, name)!r}\n")


def _chol_dim(d: int) -> int:
    return d * (d - 1) // 2


@dataclass(frozen=True)
class ParamLayout:
    """Flat coordinate layout for one model design."""

    n_participants: int
    n_items: int
    has_surprisal_slope: bool = False
    participant_index: dict[str, int] | None = field(default=None, compare=False)
    item_index: dict[str, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        blocks: list[tuple[str, int]] = [
            ("mu", 1), ("log_sigma1", 1), ("log_sigma2_inc", 1), ("log_shift", 1),
        ]
        blocks += [(c, 1) for c in _COSTS]
        blocks += [(a, 1) for a in _ALPHAS]
        blocks += [(b, 1) for b in _BETAS]
        blocks += [("gamma_animacy", 1), ("len_slope", 1)]
        blocks += [("et_shift_logit", 1), ("et_regr_logit", 1), ("log_et_overt_surplus", 1)]
        if self.has_surprisal_slope:
            blocks.append(("surp_slope", 1))
        blocks += [
            ("log_tau_part", len(PART_EFFECTS)),
            ("log_tau_item", len(ITEM_EFFECTS)),
            ("chol_part", _chol_dim(len(PART_EFFECTS))),
            ("chol_item", _chol_dim(len(ITEM_EFFECTS))),
            ("z_part", len(PART_EFFECTS) * self.n_participants),
            ("z_item", len(ITEM_EFFECTS) * self.n_items),
        ]
        slices, pos = {}, 0
        for name, size in blocks:
            slices[name] = slice(pos, pos + size)
            pos += size
        object.__setattr__(self, "_slices", slices)
        object.__setattr__(self, "size", pos)

    def sl(self, name: str) -> slice:
        return self._slices[name]

    def get(self, pv: np.ndarray, name: str):
        s = self._slices[name]
        return pv[..., s.start] if s.stop - s.start == 1 else pv[..., s]

    @property
    def names(self) -> list[str]:
        out = []
        for name, s in self._slices.items():
            n = s.stop - s.start
            if n == 1:
                out.append(name)
            elif name in ("log_tau_part", "log_tau_item"):
                effs = PART_EFFECTS if name.endswith("part") else ITEM_EFFECTS
                out += [f"{name}[{e}]" for e in effs]
            elif name.startswith("chol"):
                out += [f"{name}[{k}]" for k in range(n)]
            else:
                effs = PART_EFFECTS if name.endswith("part") else ITEM_EFFECTS
                groups = n // len(effs)
                out += [f"{name}[{e},{g}]" for e in effs for g in range(groups)]
        return out

    @property
    def scalar_block_names(self) -> list[str]:
        return [name for name, s in self._slices.items() if s.stop - s.start == 1]

    @property
    def init_blocks(self) -> list[str]:
        """Blocks that get dispersed initialization (population level);
        standardized effects and correlation coordinates start at zero."""
        return self.scalar_block_names + ["log_tau_part", "log_tau_item"]

    @classmethod
    def for_trialset(cls, ts: TrialSet, has_surprisal_slope: bool = False) -> "ParamLayout":
        return cls(
            n_participants=ts.n_participants,
            n_items=ts.n_items,
            has_surprisal_slope=has_surprisal_slope,
            participant_index=ts.participant_index,
            item_index=ts.item_index,
        )


def chol_from_coords(y: np.ndarray, d: int) -> tuple[np.ndarray, float]:
    """Cholesky factor of a correlation matrix from canonical partial
    correlations, with the log-Jacobian of the coordinate map."""
    z = np.tanh(y)
    L = np.zeros((d, d))
    L[0, 0] = 1.0
    logjac = float(np.sum(np.log1p(-z * z)))  # d tanh / dy
    idx = 0
    for i in range(1, d):
        rem = 1.0
        for j in range(i):
            logjac += 0.5 * math.log(rem)
            L[i, j] = z[idx] * math.sqrt(rem)
            rem -= L[i, j] ** 2
            idx += 1
        L[i, i] = math.sqrt(max(rem, 0.0))
    return L, logjac


def coords_from_chol(L: np.ndarray) -> np.ndarray:
    d = L.shape[0]
    y = np.zeros(_chol_dim(d))
    idx = 0
    for i in range(1, d):
        rem = 1.0
        for j in range(i):
            z = L[i, j] / math.sqrt(rem)
            rem -= L[i, j] ** 2
            y[idx] = np.arctanh(z)
            idx += 1
    return y


def lkj_chol_logpdf(L: np.ndarray, eta: float) -> float:
    """LKJ density over correlation matrices, evaluated at a Cholesky
    factor (unnormalized)."""
    d = L.shape[0]
    if any(L[k, k] <= 0.0 for k in range(d)):
        return -math.inf
    return float(sum((d - k - 1 + 2.0 * eta - 2.0) * math.log(L[k, k]) for k in range(1, d)))


@dataclass(frozen=True)
class ConstrainedParams:
    """Constrained image of a coordinate vector, ready for assembly."""

    layout: ParamLayout
    mu: float
    sigma1: float
    sigma2: float
    shift: float
    att_cost: float
    gp_cost: float
    reanalysis_cost: float
    regression_cost: float
    alphas: dict[str, float]
    betas: np.ndarray
    gamma_animacy: float
    len_slope: float
    surp_slope: float
    et_shift_mult: float
    et_regr_mult: float
    et_overt_surplus: float
    tau_part: np.ndarray
    tau_item: np.ndarray
    L_part: np.ndarray
    L_item: np.ndarray
    z_part: np.ndarray
    z_item: np.ndarray
    part_effects: np.ndarray
    item_effects: np.ndarray
    n_clamped: int = 0

    @property
    def population_probs(self) -> dict[str, float]:
        return {a.replace("alpha_", "p_"): float(expit(v)) for a, v in self.alphas.items()}


def _clamped_exp(x: float) -> tuple[float, int]:
    if abs(x) > CLAMP:
        return math.exp(math.copysign(CLAMP, x)), 1
    return math.exp(x), 0


def transform(pv: np.ndarray, layout: ParamLayout) -> tuple[ConstrainedParams, float]:
    """Map coordinates to constrained parameters.

    The log-Jacobian covers the volume element of the map onto the scales
    the priors are stated on (see ``flat_constrained``): the exp transforms
    for shift, the sigmas, and the random-effect scales, plus the
    correlation-factor map. sigma1 < sigma2 holds by construction.
    """
    pv = np.asarray(pv, dtype=float)
    if pv.shape != (layout.size,):
        raise ValueError(f"expected {layout.size} coordinates, got {pv.shape}")
    if not np.all(np.isfinite(pv)):
        raise ValueError("non-finite coordinates")
    g = lambda name: float(layout.get(pv, name))

    n_clamped = 0
    logjac = 0.0

    def expc(name):
        nonlocal n_clamped
        v, c = _clamped_exp(g(name))
        n_clamped += c
        return v

    sigma1 = expc("log_sigma1")
    sigma2 = sigma1 + expc("log_sigma2_inc")
    shift = expc("log_shift")
    logjac += min(max(g("log_sigma1"), -CLAMP), CLAMP)
    logjac += min(max(g("log_sigma2_inc"), -CLAMP), CLAMP)
    logjac += min(max(g("log_shift"), -CLAMP), CLAMP)

    costs = {}
    for name in _COSTS:
        costs[name.replace("log_", "")] = expc(name)

    tau_part = np.empty(len(PART_EFFECTS))
    for k in range(len(PART_EFFECTS)):
        coord = float(pv[layout.sl("log_tau_part")][k])
        v, c = _clamped_exp(coord)
        tau_part[k] = v
        n_clamped += c
        logjac += min(max(coord, -CLAMP), CLAMP)
    tau_item = np.empty(len(ITEM_EFFECTS))
    for k in range(len(ITEM_EFFECTS)):
        coord = float(pv[layout.sl("log_tau_item")][k])
        v, c = _clamped_exp(coord)
        tau_item[k] = v
        n_clamped += c
        logjac += min(max(coord, -CLAMP), CLAMP)

    L_part, j_part = chol_from_coords(pv[layout.sl("chol_part")], len(PART_EFFECTS))
    L_item, j_item = chol_from_coords(pv[layout.sl("chol_item")], len(ITEM_EFFECTS))
    logjac += j_part + j_item

    z_part = pv[layout.sl("z_part")].reshape(len(PART_EFFECTS), layout.n_participants)
    z_item = pv[layout.sl("z_item")].reshape(len(ITEM_EFFECTS), layout.n_items)
    part_effects = tau_part[:, None] * (L_part @ z_part)
    item_effects = tau_item[:, None] * (L_item @ z_item)

    cp = ConstrainedParams(
        layout=layout,
        mu=g("mu"),
        sigma1=sigma1,
        sigma2=sigma2,
        shift=shift,
        alphas={a: g(a) for a in _ALPHAS},
        betas=np.array([g(b) for b in _BETAS]),
        gamma_animacy=g("gamma_animacy"),
        len_slope=g("len_slope"),
        surp_slope=g("surp_slope") if layout.has_surprisal_slope else 0.0,
        et_shift_mult=float(expit(g("et_shift_logit"))),
        et_regr_mult=float(expit(g("et_regr_logit"))),
        et_overt_surplus=expc("log_et_overt_surplus"),
        tau_part=tau_part,
        tau_item=tau_item,
        L_part=L_part,
        L_item=L_item,
        z_part=z_part,
        z_item=z_item,
        part_effects=part_effects,
        item_effects=item_effects,
        n_clamped=n_clamped,
        **costs,
    )
    return cp, logjac


def flat_constrained(cp: ConstrainedParams, pv: np.ndarray) -> np.ndarray:
    """The constrained image as a flat vector of the same dimension as the
    coordinates, on the scales the priors are stated on. Identity blocks
    are passed through; exp/Cholesky blocks appear transformed."""
    layout = cp.layout
    out = pv.astype(float).copy()
    out[layout.sl("log_sigma1")] = cp.sigma1
    out[layout.sl("log_sigma2_inc")] = cp.sigma2
    out[layout.sl("log_shift")] = cp.shift
    out[layout.sl("log_tau_part")] = cp.tau_part
    out[layout.sl("log_tau_item")] = cp.tau_item
    out[layout.sl("chol_part")] = cp.L_part[np.tril_indices(len(PART_EFFECTS), k=-1)]
    out[layout.sl("chol_item")] = cp.L_item[np.tril_indices(len(ITEM_EFFECTS), k=-1)]
    return out


def inverse_transform(cp: ConstrainedParams) -> np.ndarray:
    """Coordinates that reproduce ``cp`` (bijection inverse)."""
    layout = cp.layout
    pv = np.zeros(layout.size)
    pv[layout.sl("mu")] = cp.mu
    pv[layout.sl("log_sigma1")] = math.log(cp.sigma1)
    pv[layout.sl("log_sigma2_inc")] = math.log(cp.sigma2 - cp.sigma1)
    pv[layout.sl("log_shift")] = math.log(cp.shift)
    pv[layout.sl("log_att_cost")] = math.log(cp.att_cost)
    pv[layout.sl("log_gp_cost")] = math.log(cp.gp_cost)
    pv[layout.sl("log_reanalysis_cost")] = math.log(cp.reanalysis_cost)
    pv[layout.sl("log_regression_cost")] = math.log(cp.regression_cost)
    for a in _ALPHAS:
        pv[layout.sl(a)] = cp.alphas[a]
    for b, v in zip(_BETAS, cp.betas):
        pv[layout.sl(b)] = v
    pv[layout.sl("gamma_animacy")] = cp.gamma_animacy
    pv[layout.sl("len_slope")] = cp.len_slope
    if layout.has_surprisal_slope:
        pv[layout.sl("surp_slope")] = cp.surp_slope
    logit = lambda p: math.log(p) - math.log1p(-p)
    pv[layout.sl("et_shift_logit")] = logit(cp.et_shift_mult)
    pv[layout.sl("et_regr_logit")] = logit(cp.et_regr_mult)
    pv[layout.sl("log_et_overt_surplus")] = math.log(cp.et_overt_surplus)
    pv[layout.sl("log_tau_part")] = np.log(cp.tau_part)
    pv[layout.sl("log_tau_item")] = np.log(cp.tau_item)
    pv[layout.sl("chol_part")] = coords_from_chol(cp.L_part)
    pv[layout.sl("chol_item")] = coords_from_chol(cp.L_item)
    pv[layout.sl("z_part")] = cp.z_part.reshape(-1)
    pv[layout.sl("z_item")] = cp.z_item.reshape(-1)
    return pv


_PEFF = {name: k for k, name in enumerate(PART_EFFECTS)}
_IEFF = {name: k for k, name in enumerate(ITEM_EFFECTS)}


def _indices(cp: ConstrainedParams, trial: Trial) -> tuple[int, int]:
    layout = cp.layout
    if layout.participant_index is None or layout.item_index is None:
        raise ValueError("layout carries no id maps; build it with ParamLayout.for_trialset")
    return layout.participant_index[trial.participant_id], layout.item_index[trial.item_id]


def assemble_process_probs(cp: ConstrainedParams, trial: Trial) -> ProcessProbs:
    """Latent process probabilities for one trial.

    Garden-pathing gets the ambiguity effect, its MV/RR and animacy
    modulation, and crossed random effects; reanalysis success gets the
    MV/RR offsets; overt and baseline rereading get the eye-tracking
    adjustments and are structurally zero when the paradigm cannot regress.
    """
    i, j = _indices(cp, trial)
    u = cp.part_effects[:, i]
    w = cp.item_effects[:, j]
    amb = trial.ambiguity == Ambiguity.AMBIGUOUS
    mvrr = trial.construction == Construction.MVRR
    animacy = trial.disamb_type == DisambType.ANIMACY
    et = trial.paradigm == Paradigm.ET
    b1, b2, b3, b4, b5 = cp.betas

    lg_gp = (cp.alphas["alpha_gp"] + b1 * amb + b2 * (amb and mvrr)
             + cp.gamma_animacy * (amb and animacy) + u[_PEFF["gp"]] + w[_IEFF["gp"]])
    lg = {
        "p_attentive": cp.alphas["alpha_attentive"] + u[_PEFF["attentive"]],
        "p_gp": lg_gp,
        "p_postpone": cp.alphas["alpha_postpone"] + u[_PEFF["postpone"]],
        "p_success_o": cp.alphas["alpha_success_o"] + b3 * mvrr,
        "p_success_c": cp.alphas["alpha_success_c"] + b4 * mvrr,
        "p_infer": cp.alphas["alpha_infer"] + u[_PEFF["infer"]] + w[_IEFF["infer"]],
    }
    probs = {k: float(expit(v)) for k, v in lg.items()}
    if trial.paradigm.allows_regression:
        probs["p_overt"] = float(expit(
            cp.alphas["alpha_overt"] + cp.et_overt_surplus * et + u[_PEFF["overt"]]))
        probs["p_base_regress"] = float(expit(
            cp.alphas["alpha_base_regress"] + b5 * et + u[_PEFF["base_regress"]]))
    else:
        probs["p_overt"] = 0.0
        probs["p_base_regress"] = 0.0
    return ProcessProbs(**probs)


def assemble_rt_params(cp: ConstrainedParams, trial: Trial) -> RtParams:
    """RT mixture parameters for one trial.

    The participant's shift multiplies down for eye tracking (shorter
    non-decision time), as does the regression cost (rereading is cheaper
    than in bidirectional self-paced reading).
    """
    i, _ = _indices(cp, trial)
    et = trial.paradigm == Paradigm.ET
    shift = cp.shift * math.exp(cp.part_effects[_PEFF["shift"], i])
    regr = cp.regression_cost
    if et:
        shift *= cp.et_shift_mult
        regr *= cp.et_regr_mult
    return RtParams(
        mu=cp.mu,
        sigma1=cp.sigma1,
        sigma2=cp.sigma2,
        shift=shift,
        att_cost=cp.att_cost,
        gp_cost=cp.gp_cost,
        reanalysis_cost=cp.reanalysis_cost,
        regression_cost=regr,
        len_slope=cp.len_slope,
        surp_slope=cp.surp_slope,
    )


def log_prior(pv: np.ndarray, priors: PriorConfig, layout: ParamLayout) -> float:
    """Joint log-prior over coordinates, including the transform Jacobian."""
    priors.validate()
    cp, logjac = transform(pv, layout)
    g = lambda name: float(layout.get(pv, name))

    lp = norm_logpdf(g("mu"), priors.mu_loc, priors.mu_scale)
    lp += sum(norm_logpdf(g(a), 0.0, priors.prob_logit_scale) for a in _ALPHAS)
    lp += sum(norm_logpdf(g(c), priors.cost_log_loc, priors.cost_log_scale) for c in _COSTS)
    lp += sum(norm_logpdf(g(b), 0.0, priors.beta_scale) for b in _BETAS)
    lp += norm_logpdf(g("gamma_animacy"), 0.0, priors.beta_scale)
    lp += norm_logpdf(g("len_slope"), 0.0, priors.len_slope_scale)
    if layout.has_surprisal_slope:
        lp += norm_logpdf(g("surp_slope"), 0.0, priors.surp_slope_scale)
    lp += norm_logpdf(g("et_shift_logit"), 0.0, priors.et_logit_scale)
    lp += norm_logpdf(g("et_regr_logit"), 0.0, priors.et_logit_scale)
    lp += norm_logpdf(g("log_et_overt_surplus"), priors.et_overt_log_loc,
                      priors.et_overt_log_scale)
    lp += truncnorm_logpdf(cp.shift, priors.shift_loc, priors.shift_scale)
    lp += halfnorm_logpdf(cp.sigma1, priors.sigma_scale)
    lp += halfnorm_logpdf(cp.sigma2 - cp.sigma1, priors.sigma_scale)
    lp += float(np.sum([halfnorm_logpdf(t, priors.tau_scale) for t in cp.tau_part]))
    lp += float(np.sum([halfnorm_logpdf(t, priors.tau_scale) for t in cp.tau_item]))
    lp += lkj_chol_logpdf(cp.L_part, priors.lkj_eta)
    lp += lkj_chol_logpdf(cp.L_item, priors.lkj_eta)
    lp += float(np.sum(norm_logpdf(cp.z_part)))
    lp += float(np.sum(norm_logpdf(cp.z_item)))
    return lp + logjac


def pv_from_truth(truth: dict, layout: ParamLayout) -> np.ndarray:
    """Coordinates from named constrained values (simulation/test helper).

    Recognized keys: probabilities ``p_*`` (population scale), ``mu``,
    ``sigma1``/``sigma2``, ``shift`` (ms), the four ``*_cost`` log-scale
    offsets, ``beta1``..``beta5``, ``gamma_animacy``, ``len_slope``,
    ``surp_slope``, ``et_shift_mult``, ``et_regr_mult``,
    ``et_overt_surplus``, ``tau_part``/``tau_item`` (dicts by effect name),
    ``corr_part``/``corr_item`` (correlation matrices). Random-effect z
    coordinates are zero.
    """
    pv = np.zeros(layout.size)
    logit = lambda p: math.log(p) - math.log1p(-p)
    pv[layout.sl("mu")] = truth.get("mu", 5.8)
    sigma1 = truth.get("sigma1", 0.3)
    sigma2 = truth.get("sigma2", 0.5)
    pv[layout.sl("log_sigma1")] = math.log(sigma1)
    pv[layout.sl("log_sigma2_inc")] = math.log(sigma2 - sigma1)
    pv[layout.sl("log_shift")] = math.log(truth.get("shift", 166.0))
    for cost in ("att_cost", "gp_cost", "reanalysis_cost", "regression_cost"):
        pv[layout.sl(f"log_{cost}")] = math.log(truth.get(cost, 0.1))
    for a in _ALPHAS:
        p = truth.get(a.replace("alpha_", "p_"), 0.5)
        pv[layout.sl(a)] = logit(p)
    for b in _BETAS:
        pv[layout.sl(b)] = truth.get(b, 0.0)
    pv[layout.sl("gamma_animacy")] = truth.get("gamma_animacy", 0.0)
    pv[layout.sl("len_slope")] = truth.get("len_slope", 0.0)
    if layout.has_surprisal_slope:
        pv[layout.sl("surp_slope")] = truth.get("surp_slope", 0.0)
    pv[layout.sl("et_shift_logit")] = logit(truth.get("et_shift_mult", 0.5))
    pv[layout.sl("et_regr_logit")] = logit(truth.get("et_regr_mult", 0.7))
    pv[layout.sl("log_et_overt_surplus")] = math.log(truth.get("et_overt_surplus", 0.5))
    tau_part = truth.get("tau_part", {})
    for k, eff in enumerate(PART_EFFECTS):
        pv[layout.sl("log_tau_part")][k] = math.log(tau_part.get(eff, 0.2))
    tau_item = truth.get("tau_item", {})
    for k, eff in enumerate(ITEM_EFFECTS):
        pv[layout.sl("log_tau_item")][k] = math.log(tau_item.get(eff, 0.2))
    if "corr_part" in truth:
        pv[layout.sl("chol_part")] = coords_from_chol(np.linalg.cholesky(truth["corr_part"]))
    if "corr_item" in truth:
        pv[layout.sl("chol_item")] = coords_from_chol(np.linalg.cholesky(truth["corr_item"]))
    return pv
