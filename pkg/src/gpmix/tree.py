"""Latent-path enumeration for the multinomial processing tree.

Observable trial categories (response x rereading) arise as sums of
root-to-leaf path probabilities. Each path also fixes which reaction-time
mixture component applies at the critical and spillover regions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .data import Paradigm, Task, category_labels

PROB_NAMES = (
    "p_attentive", "p_gp", "p_overt", "p_postpone",
    "p_success_o", "p_success_c", "p_infer", "p_base_regress",
)

BRANCH_NAMES = ("base_regress", "attentive", "gp", "overt", "postpone", "success", "infer")


class Component(IntEnum):
    """RT mixture components, in increasing processing depth."""

    C1 = 1  # inattentive
    C2 = 2  # attentive, not garden-pathed
    C3 = 3  # garden-pathed, no reanalysis at this region
    C4 = 4  # garden-pathed, covert reanalysis here
    C5 = 5  # garden-pathed, overt reanalysis (regression)


class TreeError(ValueError):
    """Invalid process probabilities or impossible observation."""


@dataclass(frozen=True)
class ProcessProbs:
    """Latent process probabilities for one trial."""

    p_attentive: float
    p_gp: float
    p_overt: float
    p_postpone: float
    p_success_o: float
    p_success_c: float
    p_infer: float
    p_base_regress: float

    def validate(self, paradigm: Paradigm | None = None) -> None:
        for name in PROB_NAMES:
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0) or not math.isfinite(v):
                raise TreeError(f"{name}={v} outside [0, 1]")
        if paradigm is not None and not paradigm.allows_regression:
            if self.p_overt != 0.0 or self.p_base_regress != 0.0:
                raise TreeError(
                    f"p_overt and p_base_regress must be exactly 0 for {paradigm.value}"
                )

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PROB_NAMES])


@dataclass(frozen=True)
class LatentPath:
    """One root-to-leaf path with its probability and RT assignment.

    ``branches`` holds the branch decisions on this path (None when the
    branch is not on the path). ``outcome_good`` is P(GOOD response | path),
    or None when no end-of-trial task was administered.
    """

    branches: dict[str, bool | None]
    prob: float
    comp_crit: Component
    comp_spill: Component
    add_regression_cost_crit: bool
    outcome_good: float | None
    regression_observed: bool

    @property
    def outcome_dist(self) -> tuple[float, float] | None:
        if self.outcome_good is None:
            return None
        return (self.outcome_good, 1.0 - self.outcome_good)

    def category(self, paradigm: Paradigm, task: Task, outcome_is_good: bool | None) -> str:
        """Observable category this path yields for a concrete outcome draw."""
        if paradigm.allows_regression:
            reg = "reg" if self.regression_observed else "noreg"
            if task == Task.NONE:
                return reg
            return ("good_" if outcome_is_good else "bad_") + reg
        if task == Task.NONE:
            return "all"
        return "good" if outcome_is_good else "bad"


@dataclass(frozen=True)
class OutcomeDist:
    """Probabilities of the observable trial categories."""

    labels: tuple[str, ...]
    probs: np.ndarray

    def __getitem__(self, label: str) -> float:
        return float(self.probs[self.labels.index(label)])

    def as_dict(self) -> dict[str, float]:
        return {l: float(p) for l, p in zip(self.labels, self.probs)}


@dataclass(frozen=True)
class SymbolicPath:
    """Structure of one path: probability factors and RT/outcome assignment.

    ``factors`` lists (process probability name, takes_complement) pairs whose
    product is the path probability. Shared by the exact enumeration here and
    by the vectorized likelihood engine.
    """

    factors: tuple[tuple[str, bool], ...]
    branches: dict[str, bool | None]
    comp_crit: Component
    comp_spill: Component
    add_regression_cost_crit: bool
    outcome_good: float | None
    regression_observed: bool


def _leaf(factors, branches, comp_crit, comp_spill, add_regr, outcome_good, reg_obs):
    full = dict.fromkeys(BRANCH_NAMES)
    full.update(branches)
    return SymbolicPath(
        factors=tuple(factors),
        branches=full,
        comp_crit=comp_crit,
        comp_spill=comp_spill,
        add_regression_cost_crit=add_regr,
        outcome_good=outcome_good,
        regression_observed=reg_obs,
    )


def _outcome_leaves(factors, branches, comp_crit, comp_spill, add_regr, reg_obs,
                    parse_good: bool, task: Task):
    """Expand the response stage of a path whose parse succeeded or failed.

    With a comprehension question, successful parses can still yield a "yes"
    via pragmatic inference; failed parses answer "yes" outright. Judgments
    have no inference stage. Without a task there is no response process.
    """
    if task == Task.NONE:
        yield _leaf(factors, branches, comp_crit, comp_spill, add_regr, None, reg_obs)
        return
    if not parse_good:
        yield _leaf(factors, branches, comp_crit, comp_spill, add_regr, 0.0, reg_obs)
        return
    if task == Task.JUDGMENT:
        yield _leaf(factors, branches, comp_crit, comp_spill, add_regr, 1.0, reg_obs)
        return
    # QUESTION: inference turns a correct parse into a "yes" response.
    yield _leaf(factors + [("p_infer", False)], {**branches, "infer": True},
                comp_crit, comp_spill, add_regr, 0.0, reg_obs)
    yield _leaf(factors + [("p_infer", True)], {**branches, "infer": False},
                comp_crit, comp_spill, add_regr, 1.0, reg_obs)


def symbolic_paths(allows_regression: bool, task: Task) -> tuple[SymbolicPath, ...]:
    """Exhaustive, mutually exclusive path list for one tree shape."""
    paths: list[SymbolicPath] = []
    base_opts = [False, True] if allows_regression else [False]
    for base in base_opts:
        f0 = [("p_base_regress", not base)] if allows_regression else []
        b0 = {"base_regress": base} if allows_regression else {}

        # Inattentive reading: guess the response with equal probability.
        og = None if task == Task.NONE else 0.5
        paths.append(_leaf(f0 + [("p_attentive", True)], {**b0, "attentive": False},
                           Component.C1, Component.C1, base, og, base))

        fa = f0 + [("p_attentive", False)]
        ba = {**b0, "attentive": True}

        # Attentive, not garden-pathed.
        paths.extend(_outcome_leaves(fa + [("p_gp", True)], {**ba, "gp": False},
                                     Component.C2, Component.C2, base, base, True, task))

        fg = fa + [("p_gp", False)]
        bg = {**ba, "gp": True}
        if allows_regression:
            # Overt reanalysis: rereading registers at the critical region.
            fo = fg + [("p_overt", False)]
            bo = {**bg, "overt": True}
            if task == Task.NONE:
                paths.append(_leaf(fo, bo, Component.C5, Component.C2, False, None, True))
            else:
                paths.extend(_outcome_leaves(fo + [("p_success_o", False)],
                                             {**bo, "success": True},
                                             Component.C5, Component.C2, False, True, True, task))
                paths.extend(_outcome_leaves(fo + [("p_success_o", True)],
                                             {**bo, "success": False},
                                             Component.C5, Component.C2, False, True, False, task))
            fc = fg + [("p_overt", True)]
            bc = {**bg, "overt": False}
        else:
            fc, bc = fg, bg

        # Covert reanalysis, carried out at the critical region or postponed
        # to spillover (the slowdown registers there).
        for postponed, comps in ((False, (Component.C4, Component.C2)),
                                 (True, (Component.C3, Component.C4))):
            fp = fc + [("p_postpone", not postponed)]
            bp = {**bc, "postpone": postponed}
            if task == Task.NONE:
                paths.append(_leaf(fp, bp, comps[0], comps[1], base, None, base))
            else:
                paths.extend(_outcome_leaves(fp + [("p_success_c", False)],
                                             {**bp, "success": True},
                                             comps[0], comps[1], base, base, True, task))
                paths.extend(_outcome_leaves(fp + [("p_success_c", True)],
                                             {**bp, "success": False},
                                             comps[0], comps[1], base, base, False, task))
    return tuple(paths)


def enumerate_paths(pp: ProcessProbs, paradigm: Paradigm, task: Task) -> list[LatentPath]:
    """All latent paths with numeric probabilities; probabilities sum to 1."""
    pp.validate(paradigm)
    if paradigm == Paradigm.MAZE and task != Task.NONE:
        raise TreeError("MAZE has no end-of-trial task")
    out = []
    for sym in symbolic_paths(paradigm.allows_regression, task):
        prob = 1.0
        for name, complement in sym.factors:
            v = getattr(pp, name)
            prob *= (1.0 - v) if complement else v
        out.append(LatentPath(
            branches=sym.branches,
            prob=prob,
            comp_crit=sym.comp_crit,
            comp_spill=sym.comp_spill,
            add_regression_cost_crit=sym.add_regression_cost_crit,
            outcome_good=sym.outcome_good,
            regression_observed=sym.regression_observed,
        ))
    return out


def _category_prob_factor(path: LatentPath, label: str, paradigm: Paradigm, task: Task) -> float:
    """P(observed category | path)."""
    if paradigm.allows_regression:
        if task == Task.NONE:
            want_reg = label == "reg"
            return 1.0 if path.regression_observed == want_reg else 0.0
        out, reg = label.split("_")
        if path.regression_observed != (reg == "reg"):
            return 0.0
        return path.outcome_good if out == "good" else 1.0 - path.outcome_good
    if task == Task.NONE:
        return 1.0
    return path.outcome_good if label == "good" else 1.0 - path.outcome_good


def event_probabilities(pp: ProcessProbs, paradigm: Paradigm, task: Task) -> OutcomeDist:
    """Exact multinomial event probabilities of the observable categories."""
    paths = enumerate_paths(pp, paradigm, task)
    labels = category_labels(paradigm, task)
    probs = np.zeros(len(labels))
    for i, label in enumerate(labels):
        probs[i] = sum(p.prob * _category_prob_factor(p, label, paradigm, task) for p in paths)
    return OutcomeDist(labels=labels, probs=probs)


def p_yes_no_regress(pp: ProcessProbs) -> float:
    """Probability of an incorrect "yes" answer without rereading.

    Literal six-term expansion over the surviving paths: guessing,
    inference after a clean parse, failed covert reanalysis (in place or
    postponed), and inference after successful covert reanalysis (in place
    or postponed). Must agree with the path-enumeration marginal.
    """
    pp.validate()
    a, g = pp.p_attentive, pp.p_gp
    ov, po = pp.p_overt, pp.p_postpone
    sc, inf = pp.p_success_c, pp.p_infer
    return (1.0 - pp.p_base_regress) * (
        (1.0 - a) * 0.5
        + a * (1.0 - g) * inf
        + a * g * (1.0 - ov) * (1.0 - po) * (1.0 - sc)
        + a * g * (1.0 - ov) * po * (1.0 - sc)
        + a * g * (1.0 - ov) * (1.0 - po) * sc * inf
        + a * g * (1.0 - ov) * po * sc * inf
    )


def path_posterior(pp: ProcessProbs, paradigm: Paradigm, task: Task,
                   category: str) -> list[tuple[LatentPath, float]]:
    """Responsibilities over latent paths given an observed category."""
    labels = category_labels(paradigm, task)
    if category not in labels:
        raise TreeError(f"unknown category {category!r} for {paradigm.value}/{task.value}")
    paths = enumerate_paths(pp, paradigm, task)
    joint = [p.prob * _category_prob_factor(p, category, paradigm, task) for p in paths]
    total = sum(joint)
    if total <= 0.0:
        raise TreeError(f"category {category!r} has zero probability under these parameters")
    return [(p, j / total) for p, j in zip(paths, joint) if j > 0.0]


def tree_to_json(paradigm: Paradigm, task: Task, pp: ProcessProbs | None = None,
                 indent: int = 2) -> str:
    """Auditable JSON dump of the enumerated tree (debug CLI surface)."""
    syms = symbolic_paths(paradigm.allows_regression, task)
    entries = []
    for sym in syms:
        expr = " * ".join(
            (f"(1 - {name})" if complement else name) for name, complement in sym.factors
        ) or "1"
        entry = {
            "branches": {k: v for k, v in sym.branches.items() if v is not None},
            "probability": expr,
            "comp_crit": sym.comp_crit.name,
            "comp_spill": sym.comp_spill.name,
            "add_regression_cost_crit": sym.add_regression_cost_crit,
            "p_good_response": sym.outcome_good,
            "regression_observed": sym.regression_observed,
        }
        if pp is not None:
            prob = 1.0
            for name, complement in sym.factors:
                v = getattr(pp, name)
                prob *= (1.0 - v) if complement else v
            entry["numeric_probability"] = prob
        entries.append(entry)
    return json.dumps({
        "paradigm": paradigm.value,
        "task": task.value,
        "categories": list(category_labels(paradigm, task)),
        "n_paths": len(entries),
        "paths": entries,
    }, indent=indent)
