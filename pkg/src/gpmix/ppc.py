"""Posterior predictive checks: replicated datasets and proportion tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TrialSet, category_labels, trial_category
from .hier import ParamLayout, transform
from .sampler import PosteriorDraws
from .simulate import frames_from_trialset, simulate_on_frames


def replicate(pd: PosteriorDraws, ts: TrialSet, n_reps: int = 500,
              seed: int = 0, has_surprisal_slope: bool = False) -> list[TrialSet]:
    """Replicated datasets on the observed design frame.

    Each replicate takes one retained draw (evenly spaced through the
    retained sample), rebuilds its constrained parameters including the
    fitted random effects of the observed participants and items, and
    simulates fresh behavior for every observed trial cell.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    layout = ParamLayout.for_trialset(ts, has_surprisal_slope=has_surprisal_slope)
    if list(pd.names) != layout.names:
        raise ValueError(
            "draws do not match the mixture-model layout for this dataset "
            f"({len(pd.names)} vs {len(layout.names)} parameters)"
        )
    frames = frames_from_trialset(ts)
    flat = pd.flat_draws()
    picks = np.unique(np.linspace(0, flat.shape[0] - 1, n_reps).round().astype(int)) \
        if n_reps > 1 else np.array([flat.shape[0] - 1])
    rng = np.random.default_rng(seed)
    reps = []
    for s in picks:
        cp, _ = transform(flat[s], layout)
        rep, _ = simulate_on_frames(cp, frames, rng)
        reps.append(rep)
    return reps


@dataclass(frozen=True)
class PpcCell:
    study_id: str
    condition: str
    trial_type: str
    observed: float
    pred_mean: float
    pred_lo: float
    pred_hi: float


@dataclass(frozen=True)
class ProportionTable:
    cells: tuple[PpcCell, ...]
    warnings: tuple[str, ...] = ()

    def coverage(self) -> float:
        """Fraction of cells whose observed proportion sits inside the
        predictive interval."""
        inside = [c.pred_lo <= c.observed <= c.pred_hi for c in self.cells]
        return float(np.mean(inside)) if inside else float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("study,condition,trial_type,observed,pred_mean,pred_lo,pred_hi\n")
            for c in self.cells:
                fh.write(f"{c.study_id},{c.condition},{c.trial_type},"
                         f"{c.observed:.17g},{c.pred_mean:.17g},"
                         f"{c.pred_lo:.17g},{c.pred_hi:.17g}\n")


def _cell_proportions(ts: TrialSet, grouping: tuple[str, ...]):
    """Per-group trial-type proportions; groups keyed by grouping fields."""
    groups: dict[tuple, list] = {}
    for t in ts:
        key = tuple(str(getattr(t, g)) if not hasattr(getattr(t, g), "value")
                    else getattr(t, g).value for g in grouping)
        groups.setdefault(key, []).append(t)
    out = {}
    for key, trials in groups.items():
        labels = category_labels(trials[0].paradigm, trials[0].task)
        counts = dict.fromkeys(labels, 0)
        for t in trials:
            counts[trial_category(t)] += 1
        n = len(trials)
        out[key] = {lab: c / n for lab, c in counts.items()}
    return out


def trial_type_table(replicates: list[TrialSet], observed: TrialSet,
                     grouping: tuple[str, ...] = ("study_id", "ambiguity")) -> ProportionTable:
    """Observed vs predicted trial-type proportions per design cell.

    Predictive mean and central 95% interval come from the replicate
    distribution; the observed column is untouched by replication.
    """
    if not replicates:
        raise ValueError("need at least one replicate")
    if grouping[0] != "study_id":
        grouping = ("study_id",) + tuple(grouping)
    obs = _cell_proportions(observed, grouping)
    rep_props = [_cell_proportions(r, grouping) for r in replicates]

    cells = []
    warnings = []
    for key in obs:
        for label, observed_p in obs[key].items():
            vals = [rp[key][label] for rp in rep_props if key in rp]
            if not vals:
                warnings.append(f"cell {key} missing from all replicates")
                continue
            arr = np.array(vals)
            cells.append(PpcCell(
                study_id=key[0],
                condition="/".join(key[1:]),
                trial_type=label,
                observed=observed_p,
                pred_mean=float(arr.mean()),
                pred_lo=float(np.quantile(arr, 0.025)),
                pred_hi=float(np.quantile(arr, 0.975)),
            ))
    return ProportionTable(cells=tuple(cells), warnings=tuple(warnings))
