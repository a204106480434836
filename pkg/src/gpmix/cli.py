"""Command-line entry point: simulate / fit / diagnose / loo / compare /
ppc / report, plus a tree-structure debug dump.

Every command writes a JSON run manifest (inputs hash, seed, config,
versions, wall time). Exit codes: 0 ok, 2 data error, 3 sampler error,
4 diagnostic failure under --strict.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import __version__
from .compare import ModelKind, elpd_diff, pointwise_loglik, psis_loo, write_pointwise_delta_csv
from .data import (DataError, Paradigm, Task, attach_surprisal, read_surprisal_table,
                   read_trials, write_trials)
from .hier import PriorConfig
from .ppc import replicate, trial_type_table
from .sampler import Diagnostics, PosteriorDraws, SamplerConfig, SamplerError, diagnostics, run_chains
from .simulate import default_design, default_truth, simulate_recovery_dataset, surprisal_table_from_frames
from .tree import ProcessProbs, tree_to_json

EXIT_OK = 0
EXIT_DATA = 2
EXIT_SAMPLER = 3
EXIT_DIAG = 4

RHAT_LIMIT = 1.05


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace,
                    inputs: list, outputs: list[str], extra: dict, t0: float) -> None:
    manifest = {
        "command": command,
        "package_version": __version__,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": outputs,
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    manifest.update(extra)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def _load_dataset(args):
    ts = read_trials(args.data, surprisal_units="bits" if args.surprisal_bits else "nats")
    if getattr(args, "surprisal", None):
        st = read_surprisal_table(args.surprisal,
                                  surprisal_units="bits" if args.surprisal_bits else "nats")
        ts = attach_surprisal(ts, st, strict=True)
    return ts


def _load_priors(args) -> PriorConfig | None:
    if getattr(args, "priors", None):
        return PriorConfig.from_file(args.priors)
    return None


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# report helpers (Table-1-style back-transformed summaries)

def _quantiles(x: np.ndarray) -> tuple[float, float, float]:
    return (float(np.quantile(x, 0.025)), float(np.quantile(x, 0.5)),
            float(np.quantile(x, 0.975)))


def report_rows(pd: PosteriorDraws) -> list[dict]:
    """Per-parameter 2.5%/50%/97.5% quantiles on interpretable scales."""
    names = set(pd.names)
    col = pd.flat
    rows: list[tuple[str, np.ndarray]] = []
    if "alpha_gp" in names:  # mixture family
        mu = col("mu")
        sigma1 = np.exp(col("log_sigma1"))
        sigma2 = sigma1 + np.exp(col("log_sigma2_inc"))
        att = np.exp(col("log_att_cost"))
        gp = np.exp(col("log_gp_cost"))
        rean = np.exp(col("log_reanalysis_cost"))
        regr = np.exp(col("log_regression_cost"))
        v = 0.5 * sigma2**2
        rows += [
            ("shift_ms", np.exp(col("log_shift"))),
            ("att_cost_ms_mean", np.exp(mu + v) * np.expm1(att)),
            ("gp_cost_ms_mean", np.exp(mu + att + v) * np.expm1(gp)),
            ("reanalysis_cost_ms_mean", np.exp(mu + att + gp + v) * np.expm1(rean)),
            ("regression_cost_ms_mean", np.exp(mu + att + gp + v) * np.expm1(regr)),
            ("att_cost_ms_median", np.exp(mu) * np.expm1(att)),
            ("gp_cost_ms_median", np.exp(mu + att) * np.expm1(gp)),
            ("reanalysis_cost_ms_median", np.exp(mu + att + gp) * np.expm1(rean)),
            ("regression_cost_ms_median", np.exp(mu + att + gp) * np.expm1(regr)),
        ]
        for a in ("attentive", "gp", "overt", "postpone", "success_o", "success_c",
                  "infer", "base_regress"):
            rows.append((f"p_{a}", expit(col(f"alpha_{a}"))))
        a_gp, a_so, a_sc, a_br = (col("alpha_gp"), col("alpha_success_o"),
                                  col("alpha_success_c"), col("alpha_base_regress"))
        b1, b2, b3, b4, b5 = (col("beta1"), col("beta2"), col("beta3"),
                              col("beta4"), col("beta5"))
        rows += [
            ("beta1_prob", expit(a_gp + b1) - expit(a_gp)),
            ("beta2_prob", expit(a_gp + b1 + b2) - expit(a_gp + b1)),
            ("beta3_prob", expit(a_so + b3) - expit(a_so)),
            ("beta4_prob", expit(a_sc + b4) - expit(a_sc)),
            ("beta5_prob", expit(a_br + b5) - expit(a_br)),
            ("mu", mu), ("sigma1", sigma1), ("sigma2", sigma2),
            ("len_slope", col("len_slope")),
            ("et_shift_mult", expit(col("et_shift_logit"))),
            ("et_regr_mult", expit(col("et_regr_logit"))),
            ("et_overt_surplus", np.exp(col("log_et_overt_surplus"))),
        ]
        if "surp_slope" in names:
            rows.append(("surp_slope", col("surp_slope")))
    else:  # regression family
        rows += [
            ("intercept", col("intercept")),
            ("len_slope", col("len_slope")),
            ("sigma", np.exp(col("log_sigma"))),
            ("p_regression", expit(col("reg_intercept"))),
            ("p_good", expit(col("out_intercept"))),
        ]
        for s in ("surp_slope_rt", "surp_slope_reg", "surp_slope_out"):
            if s in names:
                rows.append((s, col(s)))
    out = []
    for name, draws in rows:
        lo, mid, hi = _quantiles(np.asarray(draws))
        out.append({"parameter": name, "q2.5": lo, "median": mid, "q97.5": hi})
    return out


def _write_summary_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("parameter,q2.5,median,q97.5\n")
        for r in rows:
            fh.write(f"{r['parameter']},{r['q2.5']:.17g},{r['median']:.17g},{r['q97.5']:.17g}\n")


def _print_rows(rows: list[dict]) -> None:
    width = max(len(r["parameter"]) for r in rows)
    print(f"{'parameter':<{width}}  {'2.5%':>12} {'median':>12} {'97.5%':>12}")
    for r in rows:
        print(f"{r['parameter']:<{width}}  {r['q2.5']:>12.4f} {r['median']:>12.4f} "
              f"{r['q97.5']:>12.4f}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    out = _out_dir(args)
    truth = default_truth()
    if args.truth:
        for line in Path(args.truth).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            if key.startswith("tau_part_"):
                truth["tau_part"][key.removeprefix("tau_part_")] = float(val)
            elif key.startswith("tau_item_"):
                truth["tau_item"][key.removeprefix("tau_item_")] = float(val)
            elif key in truth:
                truth[key] = float(val)
            else:
                raise DataError(f"unknown truth key {key!r}")
    ts, gt = simulate_recovery_dataset(args.participants, args.items, args.seed, truth)
    write_trials(ts, out / "data.csv")
    ds = default_design(args.participants, args.items, args.seed)
    rng = np.random.default_rng(args.seed)
    from .simulate import design_frames

    frames = design_frames(ds, rng)
    st = surprisal_table_from_frames(frames)
    with open(out / "surprisal.csv", "w", encoding="utf-8") as fh:
        fh.write("item_id,ambiguity,disamb_type,surp_crit,surp_spill\n")
        for (item, amb, dis), (sc, ss) in sorted(st.rows.items()):
            fh.write(f"{item},{amb.value},{dis.value},{sc:.17g},{ss:.17g}\n")
    gt.to_json(out / "ground_truth.json")
    _write_manifest(out, "simulate", args, [], ["data.csv", "surprisal.csv", "ground_truth.json"],
                    {"n_trials": len(ts)}, t0)
    print(f"wrote {len(ts)} trials to {out / 'data.csv'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    t0 = time.monotonic()
    out = _out_dir(args)
    ts = _load_dataset(args)
    kind = ModelKind(args.model)
    priors = _load_priors(args)
    cfg = SamplerConfig(n_chains=args.chains, n_iter=args.iter, n_warmup=args.warmup,
                        seed=args.seed)
    pd = run_chains(cfg, ts, kind, priors=priors, threads=args.threads)
    pd.to_csv(out / "draws.csv")
    diag = diagnostics(pd) if cfg.n_chains >= 2 and cfg.n_kept >= 100 else None
    if diag is not None:
        with open(out / "diagnostics.json", "w", encoding="utf-8") as fh:
            json.dump(diag.to_dict(), fh, indent=2)
    rows = report_rows(pd)
    _write_summary_csv(rows, out / "summary.csv")
    inputs = [args.data] + ([args.surprisal] if args.surprisal else []) \
        + ([args.priors] if args.priors else [])
    summary = {
        "model": kind.value,
        "n_trials": len(ts),
        "n_excluded": ts.n_excluded,
        "diagnostics_summary": None if diag is None else {
            "max_rhat": diag.max_rhat, "min_ess_bulk": diag.min_ess_bulk,
            "divergences": diag.divergences,
        },
    }
    _write_manifest(out, "fit", args, inputs,
                    ["draws.csv", "diagnostics.json", "summary.csv"], summary, t0)
    if diag is not None:
        print(f"max R-hat {diag.max_rhat:.4f}, min bulk ESS {diag.min_ess_bulk:.0f}, "
              f"{diag.divergences} divergences")
    if args.strict and diag is not None and not (diag.max_rhat <= RHAT_LIMIT):
        print(f"strict mode: max R-hat {diag.max_rhat:.4f} exceeds {RHAT_LIMIT}",
              file=sys.stderr)
        return EXIT_DIAG
    return EXIT_OK


def _print_diagnostics(diag: Diagnostics) -> None:
    order = np.argsort(-np.nan_to_num(diag.rhat, nan=-np.inf))
    print(f"{'parameter':<28} {'rhat':>8} {'ess_bulk':>10} {'ess_tail':>10}")
    for k in order[:15]:
        print(f"{diag.names[k]:<28} {diag.rhat[k]:>8.4f} {diag.ess_bulk[k]:>10.0f} "
              f"{diag.ess_tail[k]:>10.0f}")
    print(f"divergences: {diag.divergences}; degenerate parameters: {len(diag.degenerate)}")


def cmd_diagnose(args) -> int:
    pd = PosteriorDraws.from_csv(args.draws)
    diag = diagnostics(pd)
    _print_diagnostics(diag)
    if args.out_dir:
        out = _out_dir(args)
        with open(out / "diagnostics.json", "w", encoding="utf-8") as fh:
            json.dump(diag.to_dict(), fh, indent=2)
    if args.strict and not (diag.max_rhat <= RHAT_LIMIT):
        return EXIT_DIAG
    return EXIT_OK


def cmd_loo(args) -> int:
    t0 = time.monotonic()
    out = _out_dir(args)
    ts = _load_dataset(args)
    kind = ModelKind(args.model)
    pd = PosteriorDraws.from_csv(args.draws)
    ll = pointwise_loglik(pd, ts, kind, priors=_load_priors(args))
    loo = psis_loo(ll)
    loo.to_json(out / "loo.json")
    _write_manifest(out, "loo", args, [args.data, args.draws], ["loo.json"],
                    {"elpd_hat": loo.elpd_hat, "se": loo.se, "n_high_k": loo.n_high_k}, t0)
    print(f"elpd_hat {loo.elpd_hat:.1f} (se {loo.se:.1f}), "
          f"{loo.n_high_k} trials with Pareto k > 0.7")
    return EXIT_OK


def cmd_compare(args) -> int:
    t0 = time.monotonic()
    out = _out_dir(args)
    ts = _load_dataset(args)
    fits = []
    for spec in args.fit:
        if "=" not in spec:
            raise DataError(f"--fit expects model=draws.csv, got {spec!r}")
        model, path = spec.split("=", 1)
        fits.append((ModelKind(model), Path(path)))
    if len(fits) < 2:
        raise DataError("compare needs at least two --fit entries")
    reference = ModelKind(args.reference) if args.reference else fits[0][0]
    loos = {}
    for kind, path in fits:
        pd = PosteriorDraws.from_csv(path)
        loos[kind] = psis_loo(pointwise_loglik(pd, ts, kind, priors=_load_priors(args)))
    if reference not in loos:
        raise DataError(f"reference model {reference.value} has no --fit entry")
    ref = loos[reference]
    lines = ["model,delta_elpd,se_delta,elpd_hat,se,pareto_k_above_0.7"]
    print(f"{'model':<16} {'Δelpd':>10} {'SE':>8}   vs {reference.value}")
    for kind, _ in fits:
        loo = loos[kind]
        d, se = elpd_diff(loo, ref)
        lines.append(f"{kind.value},{d:.17g},{se:.17g},{loo.elpd_hat:.17g},"
                     f"{loo.se:.17g},{loo.n_high_k}")
        print(f"{kind.value:<16} {d:>10.1f} {se:>8.1f}")
        if kind != reference:
            write_pointwise_delta_csv(
                ts, loo, ref, out / f"pointwise_{kind.value}_vs_{reference.value}.csv")
    (out / "compare.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(out, "compare", args, [args.data] + [p for _, p in fits],
                    ["compare.csv"], {"reference": reference.value}, t0)
    return EXIT_OK


def cmd_ppc(args) -> int:
    t0 = time.monotonic()
    out = _out_dir(args)
    ts = _load_dataset(args)
    kind = ModelKind(args.model)
    if not kind.is_mpt_family:
        raise DataError("posterior predictive replication applies to the mixture models")
    pd = PosteriorDraws.from_csv(args.draws)
    reps = replicate(pd, ts, n_reps=args.reps, seed=args.seed,
                     has_surprisal_slope=kind == ModelKind.MPT_PLUS_SURPRISAL)
    table = trial_type_table(reps, ts)
    table.to_csv(out / "ppc.csv")
    _write_manifest(out, "ppc", args, [args.data, args.draws], ["ppc.csv"],
                    {"n_replicates": len(reps), "coverage_95": table.coverage()}, t0)
    print(f"{len(table.cells)} cells, 95% interval coverage {table.coverage():.3f}")
    return EXIT_OK


def cmd_report(args) -> int:
    pd = PosteriorDraws.from_csv(args.draws)
    rows = report_rows(pd)
    _print_rows(rows)
    if args.out_dir:
        out = _out_dir(args)
        _write_summary_csv(rows, out / "summary.csv")
    return EXIT_OK


def cmd_tree(args) -> int:
    pp = None
    if args.prob:
        vals = dict.fromkeys(
            ("p_attentive", "p_gp", "p_overt", "p_postpone", "p_success_o",
             "p_success_c", "p_infer", "p_base_regress"), 0.5)
        paradigm = Paradigm(args.paradigm.upper())
        if not paradigm.allows_regression:
            vals["p_overt"] = vals["p_base_regress"] = 0.0
        for spec in args.prob:
            key, val = spec.split("=", 1)
            if key not in vals:
                raise DataError(f"unknown probability {key!r}")
            vals[key] = float(val)
        pp = ProcessProbs(**vals)
    print(tree_to_json(Paradigm(args.paradigm.upper()), Task(args.task.upper()), pp))
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_common(p, data=True, sampler=False):
    if data:
        p.add_argument("--data", required=True, help="trial CSV")
        p.add_argument("--surprisal", default=None, help="surprisal table CSV to join")
        p.add_argument("--surprisal-bits", action="store_true",
                       help="surprisal inputs are in bits; convert to nats")
    p.add_argument("--priors", default=None, help="prior configuration file")
    if sampler:
        p.add_argument("--model", required=True,
                       choices=[k.value for k in ModelKind])
        p.add_argument("--chains", type=int, default=2)
        p.add_argument("--iter", type=int, default=2000)
        p.add_argument("--warmup", type=int, default=1000)
        p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gpmix", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--participants", type=int, default=50)
    p.add_argument("--items", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", default=None, help="key = value overrides of the default truth")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model with MCMC")
    _add_common(p, sampler=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--strict", action="store_true",
                   help="exit 4 if any R-hat exceeds 1.05")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="convergence diagnostics for a draws file")
    p.add_argument("--draws", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("loo", help="PSIS-LOO for one fit")
    _add_common(p)
    p.add_argument("--model", required=True, choices=[k.value for k in ModelKind])
    p.add_argument("--draws", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_loo)

    p = sub.add_parser("compare", help="elpd differences between fitted models")
    _add_common(p)
    p.add_argument("--fit", action="append", required=True,
                   help="model=draws.csv (repeat; first is the default reference)")
    p.add_argument("--reference", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ppc", help="posterior predictive trial-type table")
    _add_common(p)
    p.add_argument("--model", default="mpt",
                   choices=[ModelKind.MPT.value, ModelKind.MPT_PLUS_SURPRISAL.value])
    p.add_argument("--draws", required=True)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ppc)

    p = sub.add_parser("report", help="back-transformed posterior summaries")
    p.add_argument("--draws", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("tree", help="dump the latent path structure as JSON")
    p.add_argument("--paradigm", required=True,
                   choices=[x.value for x in Paradigm] + [x.value.lower() for x in Paradigm])
    p.add_argument("--task", required=True,
                   choices=[x.value for x in Task] + [x.value.lower() for x in Task])
    p.add_argument("--prob", action="append", default=None,
                   help="name=value process probabilities for numeric output")
    p.set_defaults(func=cmd_tree)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SamplerError as err:
        print(f"sampler error: {err}", file=sys.stderr)
        return EXIT_SAMPLER
    except (DataError, FileNotFoundError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
