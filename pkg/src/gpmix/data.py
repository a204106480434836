"""Trial-level data schema, CSV ingestion, and dataset summaries."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

# Reading-time exclusion window, both endpoints inclusive.
RT_MIN_MS = 150.0
RT_MAX_MS = 5000.0

LN2 = math.log(2.0)

CSV_HEADER = [
    "study_id", "participant_id", "item_id", "paradigm", "task",
    "construction", "disamb_type", "ambiguity", "rt_crit", "rt_spill",
    "regression", "outcome", "len_crit", "len_spill", "surp_crit",
    "surp_spill",
]

SURPRISAL_HEADER = ["item_id", "ambiguity", "disamb_type", "surp_crit", "surp_spill"]


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class Paradigm(str, Enum):
    ET = "ET"
    SPR = "SPR"
    BSPR = "BSPR"
    MAZE = "MAZE"

    @property
    def allows_regression(self) -> bool:
        return self in (Paradigm.ET, Paradigm.BSPR)


class Task(str, Enum):
    JUDGMENT = "JUDGMENT"
    QUESTION = "QUESTION"
    NONE = "NONE"


class Construction(str, Enum):
    NPZ = "NPZ"
    MVRR = "MVRR"


class DisambType(str, Enum):
    COMMA = "COMMA"
    RELATIVE_CLAUSE = "RELATIVE_CLAUSE"
    ANIMACY = "ANIMACY"


class Ambiguity(str, Enum):
    AMBIGUOUS = "AMBIGUOUS"
    UNAMBIGUOUS = "UNAMBIGUOUS"


class Regression(str, Enum):
    YES = "YES"
    NO = "NO"
    NA = "NA"


class Outcome(str, Enum):
    GOOD = "GOOD"  # accept judgment, or correct "no" answer
    BAD = "BAD"    # reject judgment, or incorrect "yes" answer
    NA = "NA"


# Raw response spellings collapsed at ingestion: accepting the sentence or
# correctly answering "no" both count as successful parsing.
_OUTCOME_SYNONYMS = {
    "GOOD": Outcome.GOOD, "ACCEPT": Outcome.GOOD, "NO": Outcome.GOOD,
    "BAD": Outcome.BAD, "REJECT": Outcome.BAD, "YES": Outcome.BAD,
    "NA": Outcome.NA,
}


@dataclass(frozen=True)
class Trial:
    """One reading trial: design cell, two region RTs, and responses."""

    study_id: str
    participant_id: str
    item_id: str
    paradigm: Paradigm
    task: Task
    construction: Construction
    disamb_type: DisambType
    ambiguity: Ambiguity
    rt_crit: float
    rt_spill: float
    regression: Regression
    outcome: Outcome
    len_crit: int
    len_spill: int
    surp_crit: float | None = None
    surp_spill: float | None = None

    def __post_init__(self):
        if not (self.rt_crit > 0 and math.isfinite(self.rt_crit)):
            raise DataError(f"rt_crit must be a positive number, got {self.rt_crit}")
        if not (self.rt_spill > 0 and math.isfinite(self.rt_spill)):
            raise DataError(f"rt_spill must be a positive number, got {self.rt_spill}")
        if self.len_crit < 1 or self.len_spill < 1:
            raise DataError("region lengths must be >= 1 character")
        if not self.paradigm.allows_regression and self.regression != Regression.NA:
            raise DataError(
                f"regression must be NA for {self.paradigm.value} (rereading impossible)"
            )
        if self.paradigm.allows_regression and self.regression == Regression.NA:
            raise DataError(f"regression flag required for {self.paradigm.value}")
        if self.paradigm == Paradigm.MAZE:
            if self.task != Task.NONE:
                raise DataError("MAZE trials carry no end-of-trial task")
            if self.outcome != Outcome.NA:
                raise DataError("MAZE outcome must be NA (treated as missing)")
        if self.task != Task.NONE and self.outcome == Outcome.NA:
            raise DataError(f"outcome required when task is {self.task.value}")
        if self.task == Task.NONE and self.outcome != Outcome.NA:
            raise DataError("outcome must be NA when no task was administered")
        if self.construction == Construction.NPZ and self.disamb_type != DisambType.COMMA:
            raise DataError("NPZ items are disambiguated by COMMA")
        if self.construction == Construction.MVRR and self.disamb_type == DisambType.COMMA:
            raise DataError("MVRR items are disambiguated by RELATIVE_CLAUSE or ANIMACY")
        for name in ("surp_crit", "surp_spill"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise DataError(f"{name} must be finite and >= 0, got {v}")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.participant_id, self.item_id, self.study_id)

    @property
    def has_surprisal(self) -> bool:
        return self.surp_crit is not None and self.surp_spill is not None


def category_labels(paradigm: Paradigm, task: Task) -> tuple[str, ...]:
    """Observable trial categories for a paradigm/task combination."""
    if paradigm.allows_regression:
        if task == Task.NONE:
            return ("noreg", "reg")
        return ("good_noreg", "good_reg", "bad_noreg", "bad_reg")
    if task == Task.NONE:
        return ("all",)
    return ("good", "bad")


def trial_category(trial: Trial) -> str:
    """Observed category label of one trial."""
    if trial.paradigm.allows_regression:
        reg = "reg" if trial.regression == Regression.YES else "noreg"
        if trial.task == Task.NONE:
            return reg
        out = "good" if trial.outcome == Outcome.GOOD else "bad"
        return f"{out}_{reg}"
    if trial.task == Task.NONE:
        return "all"
    return "good" if trial.outcome == Outcome.GOOD else "bad"


@dataclass(frozen=True)
class TrialSet:
    """Immutable ordered collection of trials with dense id indices."""

    trials: tuple[Trial, ...]
    n_excluded: int = 0
    participant_index: dict[str, int] = field(default=None, compare=False)
    item_index: dict[str, int] = field(default=None, compare=False)

    def __post_init__(self):
        pidx, iidx = {}, {}
        for t in self.trials:
            pidx.setdefault(t.participant_id, len(pidx))
            iidx.setdefault(t.item_id, len(iidx))
        object.__setattr__(self, "participant_index", pidx)
        object.__setattr__(self, "item_index", iidx)

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    @property
    def n_participants(self) -> int:
        return len(self.participant_index)

    @property
    def n_items(self) -> int:
        return len(self.item_index)

    def with_trials(self, trials) -> "TrialSet":
        return TrialSet(trials=tuple(trials), n_excluded=self.n_excluded)


def _parse_enum(cls, raw: str, line: int, col: str):
    try:
        return cls(raw.strip().upper())
    except ValueError:
        valid = "/".join(m.value for m in cls)
        raise DataError(f"line {line}: bad {col} {raw!r} (expected {valid})") from None


def _parse_float(raw: str, line: int, col: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"line {line}: bad {col} {raw!r}") from None


def _parse_surprisal(raw: str, line: int, col: str, units: str) -> float | None:
    raw = raw.strip()
    if raw in ("", "NA"):
        return None
    v = _parse_float(raw, line, col)
    if not math.isfinite(v):
        raise DataError(f"line {line}: non-finite {col}")
    return v * LN2 if units == "bits" else v


def parse_trials(data: bytes | str, *, surprisal_units: str = "nats") -> TrialSet:
    """Parse the trial CSV, dropping rows outside the RT window.

    Rows with either region RT outside [150, 5000] ms (inclusive) are
    excluded and counted; structurally invalid rows raise ``DataError``
    with a line number.
    """
    if surprisal_units not in ("nats", "bits"):
        raise ValueError(f"surprisal_units must be 'nats' or 'bits', got {surprisal_units!r}")
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty input") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise DataError(f"bad header: expected {','.join(CSV_HEADER)}")

    trials: list[Trial] = []
    seen: dict[tuple, int] = {}
    n_excluded = 0
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise DataError(f"line {line}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        rec = dict(zip(CSV_HEADER, (c.strip() for c in row)))
        rt_crit = _parse_float(rec["rt_crit"], line, "rt_crit")
        rt_spill = _parse_float(rec["rt_spill"], line, "rt_spill")
        for name, rt in (("rt_crit", rt_crit), ("rt_spill", rt_spill)):
            if not (math.isfinite(rt) and rt > 0):
                raise DataError(f"line {line}: {name} must be a positive number")
        if not (RT_MIN_MS <= rt_crit <= RT_MAX_MS and RT_MIN_MS <= rt_spill <= RT_MAX_MS):
            n_excluded += 1
            continue

        out_raw = rec["outcome"].strip().upper()
        if out_raw not in _OUTCOME_SYNONYMS:
            raise DataError(f"line {line}: bad outcome {rec['outcome']!r}")
        try:
            trial = Trial(
                study_id=rec["study_id"],
                participant_id=rec["participant_id"],
                item_id=rec["item_id"],
                paradigm=_parse_enum(Paradigm, rec["paradigm"], line, "paradigm"),
                task=_parse_enum(Task, rec["task"], line, "task"),
                construction=_parse_enum(Construction, rec["construction"], line, "construction"),
                disamb_type=_parse_enum(DisambType, rec["disamb_type"], line, "disamb_type"),
                ambiguity=_parse_enum(Ambiguity, rec["ambiguity"], line, "ambiguity"),
                rt_crit=rt_crit,
                rt_spill=rt_spill,
                regression=_parse_enum(Regression, rec["regression"], line, "regression"),
                outcome=_OUTCOME_SYNONYMS[out_raw],
                len_crit=int(_parse_float(rec["len_crit"], line, "len_crit")),
                len_spill=int(_parse_float(rec["len_spill"], line, "len_spill")),
                surp_crit=_parse_surprisal(rec["surp_crit"], line, "surp_crit", surprisal_units),
                surp_spill=_parse_surprisal(rec["surp_spill"], line, "surp_spill", surprisal_units),
            )
        except DataError as err:
            raise DataError(f"line {line}: {err}") from None
        if trial.key in seen:
            raise DataError(
                f"line {line}: duplicate trial {trial.key} (first seen line {seen[trial.key]})"
            )
        seen[trial.key] = line
        trials.append(trial)
    return TrialSet(trials=tuple(trials), n_excluded=n_excluded)


def read_trials(path, **kwargs) -> TrialSet:
    with open(path, "rb") as fh:
        return parse_trials(fh.read(), **kwargs)


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def trials_to_csv(ts: TrialSet) -> str:
    """Serialize back to the canonical CSV schema."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for t in ts:
        writer.writerow([_fmt(getattr(t, col)) for col in CSV_HEADER])
    return buf.getvalue()


def write_trials(ts: TrialSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trials_to_csv(ts))


@dataclass(frozen=True)
class SurprisalTable:
    """(item, ambiguity, disamb_type) -> region surprisals in nats."""

    rows: dict[tuple[str, Ambiguity, DisambType], tuple[float, float]]

    def __len__(self):
        return len(self.rows)

    def lookup(self, trial: Trial):
        return self.rows.get((trial.item_id, trial.ambiguity, trial.disamb_type))


def parse_surprisal_table(data: bytes | str, *, surprisal_units: str = "nats") -> SurprisalTable:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty surprisal table") from None
    if [h.strip() for h in header] != SURPRISAL_HEADER:
        raise DataError(f"bad surprisal header: expected {','.join(SURPRISAL_HEADER)}")
    rows = {}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(SURPRISAL_HEADER):
            raise DataError(f"line {line}: expected {len(SURPRISAL_HEADER)} fields")
        item, amb_raw, dis_raw, sc_raw, ss_raw = (c.strip() for c in row)
        amb = _parse_enum(Ambiguity, amb_raw, line, "ambiguity")
        dis = _parse_enum(DisambType, dis_raw, line, "disamb_type")
        sc = _parse_surprisal(sc_raw, line, "surp_crit", surprisal_units)
        ss = _parse_surprisal(ss_raw, line, "surp_spill", surprisal_units)
        if sc is None or ss is None:
            raise DataError(f"line {line}: surprisal values required")
        if sc < 0 or ss < 0:
            raise DataError(f"line {line}: surprisal must be >= 0")
        key = (item, amb, dis)
        if key in rows:
            raise DataError(f"line {line}: duplicate surprisal key {key}")
        rows[key] = (sc, ss)
    return SurprisalTable(rows=rows)


def read_surprisal_table(path, **kwargs) -> SurprisalTable:
    with open(path, "rb") as fh:
        return parse_surprisal_table(fh.read(), **kwargs)


def attach_surprisal(ts: TrialSet, st: SurprisalTable, *, strict: bool = True) -> TrialSet:
    """Join region surprisals onto trials, preserving order.

    Under ``strict`` every trial key must resolve; otherwise unmatched
    trials keep their surprisal fields unset.
    """
    out = []
    for t in ts:
        vals = st.lookup(t)
        if vals is None:
            if strict:
                raise DataError(
                    f"no surprisal entry for (item_id={t.item_id!r}, "
                    f"ambiguity={t.ambiguity.value}, disamb_type={t.disamb_type.value})"
                )
            out.append(t)
        else:
            out.append(replace(t, surp_crit=vals[0], surp_spill=vals[1]))
    return ts.with_trials(out)


@dataclass(frozen=True)
class CellSummary:
    study_id: str
    ambiguity: Ambiguity
    n: int
    mean_rt_crit: float
    mean_rt_spill: float
    proportions: dict[str, float]


@dataclass(frozen=True)
class DatasetSummary:
    cells: tuple[CellSummary, ...]
    n_trials: int
    n_participants: int
    n_items: int

    def cell(self, study_id: str, ambiguity: Ambiguity) -> CellSummary:
        for c in self.cells:
            if c.study_id == study_id and c.ambiguity == ambiguity:
                return c
        raise KeyError((study_id, ambiguity))


def summarize_dataset(ts: TrialSet) -> DatasetSummary:
    """Per study x ambiguity cell: counts, mean RTs, trial-type proportions."""
    if len(ts) == 0:
        raise DataError("cannot summarize an empty TrialSet")
    groups: dict[tuple[str, Ambiguity], list[Trial]] = {}
    for t in ts:
        groups.setdefault((t.study_id, t.ambiguity), []).append(t)
    cells = []
    for (study, amb), trials in groups.items():
        labels = category_labels(trials[0].paradigm, trials[0].task)
        counts = dict.fromkeys(labels, 0)
        for t in trials:
            counts[trial_category(t)] += 1
        n = len(trials)
        cells.append(CellSummary(
            study_id=study,
            ambiguity=amb,
            n=n,
            mean_rt_crit=float(np.mean([t.rt_crit for t in trials])),
            mean_rt_spill=float(np.mean([t.rt_spill for t in trials])),
            proportions={k: v / n for k, v in counts.items()},
        ))
    return DatasetSummary(
        cells=tuple(cells),
        n_trials=len(ts),
        n_participants=ts.n_participants,
        n_items=ts.n_items,
    )
