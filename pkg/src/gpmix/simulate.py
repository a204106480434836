"""Generative model: synthetic datasets for recovery studies, oracle tests,
and posterior predictive replication."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logit

from .data import (Ambiguity, Construction, DisambType, Outcome, Paradigm, Regression,
                   SurprisalTable, Task, Trial, TrialSet)
from .hier import (ITEM_EFFECTS, PART_EFFECTS, ConstrainedParams, ParamLayout,
                   assemble_process_probs, assemble_rt_params, pv_from_truth, transform)
from .rtmix import ComponentSpec
from .tree import Component, ProcessProbs


@dataclass(frozen=True)
class StudyBlock:
    """One synthetic study: a paradigm/task with its items."""

    study_id: str
    paradigm: Paradigm
    task: Task
    item_specs: tuple[tuple[Construction, DisambType], ...]
    len_crit_range: tuple[int, int] = (6, 12)
    len_spill_range: tuple[int, int] = (4, 10)

    def __post_init__(self):
        if self.paradigm == Paradigm.MAZE and self.task != Task.NONE:
            raise ValueError("MAZE blocks carry no task")
        if not self.item_specs:
            raise ValueError("a block needs at least one item")


@dataclass(frozen=True)
class DesignSpec:
    """Crossed design: every participant reads every item once; ambiguity
    alternates within item across participants so both conditions of each
    item are observed."""

    n_participants: int
    blocks: tuple[StudyBlock, ...]
    seed: int = 0

    def __post_init__(self):
        if self.n_participants < 1:
            raise ValueError("need at least one participant")
        if not self.blocks:
            raise ValueError("need at least one study block")

    @property
    def n_items(self) -> int:
        return sum(len(b.item_specs) for b in self.blocks)

    @property
    def participant_ids(self) -> list[str]:
        return [f"p{i:03d}" for i in range(self.n_participants)]

    @property
    def item_ids(self) -> list[str]:
        return [f"i{j:03d}" for j in range(self.n_items)]


def default_design(n_participants: int = 50, n_items: int = 24, seed: int = 0) -> DesignSpec:
    """Four paradigm blocks mirroring the study mix the model targets:
    SPR with questions, eye tracking with questions, BSPR with judgments,
    and Maze without a task."""
    if n_items % 4:
        raise ValueError("n_items must be divisible by 4")
    per = n_items // 4
    def mixed(n):
        specs = []
        for k in range(n):
            if k % 2 == 0:
                specs.append((Construction.NPZ, DisambType.COMMA))
            elif k % 4 == 1:
                specs.append((Construction.MVRR, DisambType.RELATIVE_CLAUSE))
            else:
                specs.append((Construction.MVRR, DisambType.ANIMACY))
        return tuple(specs)
    npz_only = tuple((Construction.NPZ, DisambType.COMMA) for _ in range(per))
    return DesignSpec(
        n_participants=n_participants,
        blocks=(
            StudyBlock("spr_q", Paradigm.SPR, Task.QUESTION, mixed(per)),
            StudyBlock("et_q", Paradigm.ET, Task.QUESTION, npz_only),
            StudyBlock("bspr_j", Paradigm.BSPR, Task.JUDGMENT, mixed(per)),
            StudyBlock("maze", Paradigm.MAZE, Task.NONE, npz_only),
        ),
        seed=seed,
    )


def default_truth() -> dict:
    """Population ground truth for recovery studies.

    Cost coordinates are calibrated so the component-mean differences hit
    millisecond targets (the documented mean-difference convention at
    region length zero); probability effects are logit gaps between the
    target condition probabilities.
    """
    mu = math.log(330.0)
    sigma2 = 0.5
    v = 0.5 * sigma2 * sigma2
    att_ms, gp_ms, rean_ms, regr_ms = 6.0, 14.5, 467.5, 299.0
    att = math.log1p(att_ms / math.exp(mu + v))
    gp = math.log1p(gp_ms / math.exp(mu + att + v))
    rean = math.log1p(rean_ms / math.exp(mu + att + gp + v))
    regr = math.log1p(regr_ms / math.exp(mu + att + gp + v))
    return {
        "mu": mu, "sigma1": 0.3, "sigma2": sigma2, "shift": 166.0,
        "att_cost": att, "gp_cost": gp, "reanalysis_cost": rean, "regression_cost": regr,
        "p_attentive": 0.91, "p_gp": 0.19, "p_overt": 0.25, "p_postpone": 0.675,
        "p_success_o": 0.705, "p_success_c": 0.415, "p_infer": 0.30, "p_base_regress": 0.015,
        "beta1": float(logit(0.675) - logit(0.19)),
        "beta2": float(logit(0.83) - logit(0.675)),
        "beta3": float(logit(0.82) - logit(0.705)),
        "beta4": float(logit(0.67) - logit(0.415)),
        "beta5": float(logit(0.02) - logit(0.015)),
        "gamma_animacy": 0.3,
        "len_slope": 0.02,
        "et_shift_mult": 0.5, "et_regr_mult": 0.7, "et_overt_surplus": 0.5,
        "tau_part": {"shift": 0.1, "attentive": 0.3, "overt": 0.3, "postpone": 0.3,
                     "infer": 0.3, "base_regress": 0.3, "gp": 0.3},
        "tau_item": {"gp": 0.3, "infer": 0.3},
    }


def layout_for_design(ds: DesignSpec, has_surprisal_slope: bool = False) -> ParamLayout:
    return ParamLayout(
        n_participants=ds.n_participants,
        n_items=ds.n_items,
        has_surprisal_slope=has_surprisal_slope,
        participant_index={p: i for i, p in enumerate(ds.participant_ids)},
        item_index={it: j for j, it in enumerate(ds.item_ids)},
    )


def constrained_from_truth(truth: dict, layout: ParamLayout) -> ConstrainedParams:
    cp, _ = transform(pv_from_truth(truth, layout), layout)
    return cp


@dataclass(frozen=True)
class TrialFrame:
    """Design cell of one trial; the simulator fills in behavior."""

    study_id: str
    participant_id: str
    item_id: str
    paradigm: Paradigm
    task: Task
    construction: Construction
    disamb_type: DisambType
    ambiguity: Ambiguity
    len_crit: int
    len_spill: int
    surp_crit: float | None = None
    surp_spill: float | None = None


def design_frames(ds: DesignSpec, rng: np.random.Generator) -> list[TrialFrame]:
    """All participant x item trials with balanced ambiguity and synthetic
    surprisals (a fixed value per item x condition, higher when ambiguous,
    as a language model would assign)."""
    frames = []
    item_ids = ds.item_ids
    lens: dict[str, tuple[int, int]] = {}
    surps: dict[tuple[str, Ambiguity], tuple[float, float]] = {}
    j0 = 0
    for block in ds.blocks:
        for local_j, (constr, disamb) in enumerate(block.item_specs):
            item = item_ids[j0 + local_j]
            lens[item] = (
                int(rng.integers(block.len_crit_range[0], block.len_crit_range[1] + 1)),
                int(rng.integers(block.len_spill_range[0], block.len_spill_range[1] + 1)),
            )
            for amb in (Ambiguity.AMBIGUOUS, Ambiguity.UNAMBIGUOUS):
                extra = 3.0 if amb == Ambiguity.AMBIGUOUS else 0.0
                surps[(item, amb)] = (
                    max(0.05, float(rng.normal(3.0 + extra, 0.8))),
                    max(0.05, float(rng.normal(2.5 + extra / 3.0, 0.6))),
                )
        j0 += len(block.item_specs)

    j0 = 0
    for block in ds.blocks:
        for local_j, (constr, disamb) in enumerate(block.item_specs):
            j = j0 + local_j
            item = item_ids[j]
            for i, part in enumerate(ds.participant_ids):
                amb = Ambiguity.AMBIGUOUS if (i + j) % 2 == 0 else Ambiguity.UNAMBIGUOUS
                sc, ss = surps[(item, amb)]
                frames.append(TrialFrame(
                    study_id=block.study_id,
                    participant_id=part,
                    item_id=item,
                    paradigm=block.paradigm,
                    task=block.task,
                    construction=constr,
                    disamb_type=disamb,
                    ambiguity=amb,
                    len_crit=lens[item][0],
                    len_spill=lens[item][1],
                    surp_crit=sc,
                    surp_spill=ss,
                ))
        j0 += len(block.item_specs)
    return frames


def frames_from_trialset(ts: TrialSet) -> list[TrialFrame]:
    """The observed design frame, for posterior predictive replication."""
    return [TrialFrame(
        study_id=t.study_id, participant_id=t.participant_id, item_id=t.item_id,
        paradigm=t.paradigm, task=t.task, construction=t.construction,
        disamb_type=t.disamb_type, ambiguity=t.ambiguity,
        len_crit=t.len_crit, len_spill=t.len_spill,
        surp_crit=t.surp_crit, surp_spill=t.surp_spill,
    ) for t in ts]


def surprisal_table_from_frames(frames) -> SurprisalTable:
    rows = {}
    for f in frames:
        if f.surp_crit is not None:
            rows[(f.item_id, f.ambiguity, f.disamb_type)] = (f.surp_crit, f.surp_spill)
    return SurprisalTable(rows=rows)


def simulate_trial(cp: ConstrainedParams, frame: TrialFrame,
                   rng: np.random.Generator) -> tuple[Trial, dict]:
    """One trial: walk the branch Bernoullis, then draw RTs and the response.

    Returns the trial plus a hidden ground-truth record of the latent path.
    """
    probe = Trial(
        study_id=frame.study_id, participant_id=frame.participant_id,
        item_id=frame.item_id, paradigm=frame.paradigm, task=frame.task,
        construction=frame.construction, disamb_type=frame.disamb_type,
        ambiguity=frame.ambiguity, rt_crit=1000.0, rt_spill=1000.0,
        regression=Regression.YES if frame.paradigm.allows_regression else Regression.NA,
        outcome=Outcome.NA if frame.task == Task.NONE else Outcome.GOOD,
        len_crit=frame.len_crit, len_spill=frame.len_spill,
        surp_crit=frame.surp_crit, surp_spill=frame.surp_spill,
    )
    pp = assemble_process_probs(cp, probe)
    rp = assemble_rt_params(cp, probe)

    allows_reg = frame.paradigm.allows_regression
    latent: dict = dict.fromkeys(
        ("base_regress", "attentive", "gp", "overt", "postpone", "success", "infer"))
    base = bool(rng.uniform() < pp.p_base_regress) if allows_reg else False
    if allows_reg:
        latent["base_regress"] = base
    attentive = bool(rng.uniform() < pp.p_attentive)
    latent["attentive"] = attentive

    parse_good = None
    if not attentive:
        comp_c, comp_s, addon = Component.C1, Component.C1, base
        overt = False
    else:
        gp = bool(rng.uniform() < pp.p_gp)
        latent["gp"] = gp
        if not gp:
            comp_c, comp_s, addon = Component.C2, Component.C2, base
            overt = False
            parse_good = True
        else:
            overt = bool(rng.uniform() < pp.p_overt) if allows_reg else False
            if allows_reg:
                latent["overt"] = overt
            if overt:
                comp_c, comp_s, addon = Component.C5, Component.C2, False
                success = bool(rng.uniform() < pp.p_success_o)
            else:
                postpone = bool(rng.uniform() < pp.p_postpone)
                latent["postpone"] = postpone
                comp_c, comp_s = ((Component.C3, Component.C4) if postpone
                                  else (Component.C4, Component.C2))
                addon = base
                success = bool(rng.uniform() < pp.p_success_c)
            latent["success"] = success
            parse_good = success

    if frame.task == Task.NONE:
        outcome = Outcome.NA
    elif not attentive:
        outcome = Outcome.GOOD if rng.uniform() < 0.5 else Outcome.BAD
    elif not parse_good:
        outcome = Outcome.BAD
    elif frame.task == Task.QUESTION:
        infer = bool(rng.uniform() < pp.p_infer)
        latent["infer"] = infer
        outcome = Outcome.BAD if infer else Outcome.GOOD
    else:
        outcome = Outcome.GOOD

    reg_observed = base or overt
    regression = Regression.NA
    if allows_reg:
        regression = Regression.YES if reg_observed else Regression.NO

    spec_c = ComponentSpec(comp_c, addon)
    spec_s = ComponentSpec(comp_s)
    sc = frame.surp_crit or 0.0
    ss = frame.surp_spill or 0.0
    rt_c = rp.shift + rng.lognormal(spec_c.location(rp, frame.len_crit, sc), spec_c.scale(rp))
    rt_s = rp.shift + rng.lognormal(spec_s.location(rp, frame.len_spill, ss), spec_s.scale(rp))

    trial = replace(probe, rt_crit=float(rt_c), rt_spill=float(rt_s),
                    regression=regression, outcome=outcome)
    latent["comp_crit"] = comp_c.name
    latent["comp_spill"] = comp_s.name
    latent["base_regression_cost_added"] = addon
    return trial, latent


@dataclass(frozen=True)
class GroundTruth:
    """Everything the simulator knew: parameters, effects, latent paths."""

    truth: dict
    participant_ids: list[str]
    item_ids: list[str]
    part_effects: np.ndarray
    item_effects: np.ndarray
    latents: list[dict]

    def to_json(self, path) -> None:
        payload = {
            "truth": {k: (v if not isinstance(v, dict) else dict(v))
                      for k, v in self.truth.items()},
            "participant_ids": self.participant_ids,
            "item_ids": self.item_ids,
            "part_effect_names": list(PART_EFFECTS),
            "item_effect_names": list(ITEM_EFFECTS),
            "part_effects": self.part_effects.tolist(),
            "item_effects": self.item_effects.tolist(),
            "latents": self.latents,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)


def _with_effects(cp: ConstrainedParams, rng: np.random.Generator) -> ConstrainedParams:
    """Fresh random effects drawn from the hierarchical distribution."""
    z_part = rng.standard_normal(cp.z_part.shape)
    z_item = rng.standard_normal(cp.z_item.shape)
    return replace(
        cp, z_part=z_part, z_item=z_item,
        part_effects=cp.tau_part[:, None] * (cp.L_part @ z_part),
        item_effects=cp.tau_item[:, None] * (cp.L_item @ z_item),
    )


def simulate_on_frames(cp: ConstrainedParams, frames, rng: np.random.Generator,
                       n_excluded: int = 0) -> tuple[TrialSet, list[dict]]:
    trials, latents = [], []
    for frame in frames:
        t, lat = simulate_trial(cp, frame, rng)
        trials.append(t)
        latents.append(lat)
    return TrialSet(trials=tuple(trials), n_excluded=n_excluded), latents


def simulate_dataset(cp: ConstrainedParams, ds: DesignSpec, truth: dict | None = None,
                     reuse_effects: bool = False) -> tuple[TrialSet, GroundTruth]:
    """A full synthetic dataset, deterministic per ``ds.seed``.

    Participant and item effects are drawn from their hierarchical
    distributions unless ``reuse_effects`` keeps the ones realized in
    ``cp`` (posterior predictive replication path).
    """
    layout = cp.layout
    if layout.n_participants != ds.n_participants or layout.n_items != ds.n_items:
        raise ValueError("ConstrainedParams layout does not match the design dimensions")
    rng = np.random.default_rng(ds.seed)
    frames = design_frames(ds, rng)
    if not reuse_effects:
        cp = _with_effects(cp, rng)
    ts, latents = simulate_on_frames(cp, frames, rng)
    gt = GroundTruth(
        truth=truth or {},
        participant_ids=list(ds.participant_ids),
        item_ids=list(ds.item_ids),
        part_effects=cp.part_effects,
        item_effects=cp.item_effects,
        latents=latents,
    )
    return ts, gt


def simulate_recovery_dataset(n_participants: int = 50, n_items: int = 24, seed: int = 0,
                              truth: dict | None = None) -> tuple[TrialSet, GroundTruth]:
    """The standard recovery setup: default design + documented truth."""
    truth = truth or default_truth()
    ds = default_design(n_participants, n_items, seed)
    layout = layout_for_design(ds)
    cp = constrained_from_truth(truth, layout)
    return simulate_dataset(cp, ds, truth=truth)


# ---------------------------------------------------------------------------
# Vectorized branch simulation (independent of the path enumeration; used
# by the large-sample generative consistency checks).

def simulate_category_counts(pp: ProcessProbs, paradigm: Paradigm, task: Task,
                             n: int, rng: np.random.Generator) -> dict[str, int]:
    """Category counts from n branch-level Bernoulli walks at fixed
    probabilities. Pure boolean cascade, no path table involved."""
    from .data import category_labels

    pp.validate(paradigm)
    allows_reg = paradigm.allows_regression
    u = rng.uniform(size=(8, n))
    base = (u[0] < pp.p_base_regress) if allows_reg else np.zeros(n, dtype=bool)
    att = u[1] < pp.p_attentive
    gp = att & (u[2] < pp.p_gp)
    overt = gp & (u[3] < pp.p_overt) if allows_reg else np.zeros(n, dtype=bool)
    covert = gp & ~overt
    succ_p = np.where(overt, pp.p_success_o, pp.p_success_c)
    success = gp & (u[4] < succ_p)
    parse_good = att & (~gp | success)
    reg_obs = base | overt

    labels = category_labels(paradigm, task)
    counts = dict.fromkeys(labels, 0)
    if task == Task.NONE:
        if allows_reg:
            counts["reg"] = int(np.sum(reg_obs))
            counts["noreg"] = n - counts["reg"]
        else:
            counts["all"] = n
        return counts

    guess_good = u[5] < 0.5
    if task == Task.QUESTION:
        infer = u[6] < pp.p_infer
        good = np.where(att, parse_good & ~infer, guess_good)
    else:
        good = np.where(att, parse_good, guess_good)

    if allows_reg:
        for glabel, gmask in (("good", good), ("bad", ~good)):
            for rlabel, rmask in (("noreg", ~reg_obs), ("reg", reg_obs)):
                counts[f"{glabel}_{rlabel}"] = int(np.sum(gmask & rmask))
    else:
        counts["good"] = int(np.sum(good))
        counts["bad"] = n - counts["good"]
    return counts
