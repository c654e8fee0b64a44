"""Command-line entry point: price, statics, fit, placebo, simulate, spread.

Every run resolves its configuration (file plus flag overrides), writes its
outputs atomically, and drops a manifest with the resolved config, seed,
input digests, and output paths next to them.  Exit codes: 0 success,
1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import replace
from typing import Optional

import numpy as np

from . import __version__, dataio, mixture, panel, pricing, statics
from .beliefs import BeliefError, QuadratureError
from .config import (
    DEFAULT_AMBIGUITY_MEASURE,
    RunConfig,
    default_run_config,
    load_run_config,
)
from .design import SingularDesign, build_design, representative_point

_NUMERICAL_ERRORS = (
    pricing.NoSignChange,
    pricing.NonConcaveAtRoot,
    mixture.DegenerateComponent,
    SingularDesign,
    QuadratureError,
    statics.SkewOrderPrecondition,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def _write_manifest(subcommand: str, config: dict, seed: Optional[int],
                    inputs: list, outputs: list) -> None:
    manifest = {
        "subcommand": subcommand,
        "artifact_version": __version__,
        "seed": seed,
        "config": config,
        "input_digests": {p: _digest(p) for p in inputs},
        "outputs": outputs,
    }
    base = outputs[0] if outputs else f"{subcommand}.out"
    path = os.path.splitext(base)[0] + ".manifest.json"
    _atomic_write(path, _json_dumps(manifest))


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if getattr(args, "config", None) else default_run_config()
    overrides = {}
    for name in ("gamma_u", "s0", "kappa", "a_pi", "a_x", "r_star", "rho_pi",
                 "pi_star", "theta", "c", "eta"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        merged = cfg.bank.as_dict()
        merged.update(overrides)
        cfg.bank = cfg.bank.from_dict(merged)
    return cfg


def _add_bank_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file")
    for name in ("gamma_u", "s0", "kappa", "a_pi", "a_x", "r_star", "rho_pi",
                 "pi_star", "theta", "c", "eta"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    p.add_argument("--adverse-macro", action="store_true",
                   help="evaluate under the adverse macro state")


def _parse_grid(text: str) -> list:
    """Parse 'a:b:step' (inclusive of b within tolerance) or 'v1,v2,...'."""
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        if step <= 0 or b < a:
            raise ValueError(f"bad grid spec {text!r}")
        out, v = [], a
        while v <= b + 1e-12:
            out.append(round(v, 12))
            v += step
        return out
    return [float(v) for v in text.split(",")]


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_price(args) -> int:
    cfg = _load_config(args)
    x = 1 if args.adverse_macro else 0
    solver = cfg.solver or pricing.default_solver_config(cfg.bank, x)
    report = pricing.solve_optimal_rate(cfg.measure, cfg.bank, x, solver, args.ambiguity)
    parameters = cfg.as_dict()
    parameters["solver"] = {  # the resolved solver actually used
        "r_lo": solver.bracket[0],
        "r_hi": solver.bracket[1],
        "foc_tol": solver.foc_tol,
        "max_iter": solver.max_iter,
        "quad_nodes": solver.quad_nodes,
    }
    payload = {
        "report": report.as_dict(),
        "macro_state": x,
        "ambiguity": args.ambiguity,
        "parameters": parameters,
    }
    outputs = [args.out]
    _atomic_write(args.out, _json_dumps(payload))
    if args.emit_plot_data:
        lo, hi = solver.bracket
        grid = np.linspace(lo, hi, args.plot_points)
        lines = ["r_l,objective"]
        lines += [
            f"{r!r},{pricing.objective(cfg.measure, cfg.bank, float(r), x, args.ambiguity, solver.quad_nodes)!r}"
            for r in grid
        ]
        plot_path = os.path.splitext(args.out)[0] + ".objective.csv"
        _atomic_write(plot_path, "\n".join(lines) + "\n")
        outputs.append(plot_path)
        sched = pricing.supply_schedule(cfg.measure, cfg.bank, x, grid,
                                        cfg.market, solver.quad_nodes)
        rows = ["r_l,supply,demand,gap"]
        rows += [f"{r!r},{s!r},{d!r},{g!r}" for r, s, d, g in
                 zip(sched.rates, sched.supply, sched.demand, sched.gap)]
        sched_path = os.path.splitext(args.out)[0] + ".schedule.csv"
        _atomic_write(sched_path, "\n".join(rows) + "\n")
        outputs.append(sched_path)
    inputs = [args.config] if args.config else []
    _write_manifest("price", payload["parameters"], None, inputs, outputs)
    print(f"optimal loan rate: {report.r_star_loan:.6f} "
          f"(residual {report.foc_residual:.2e}, {report.iterations} iterations)")
    return 0


def _cmd_statics(args) -> int:
    cfg = _load_config(args)
    x = 1 if args.adverse_macro else 0
    solver = cfg.solver  # None lets each solve derive its own bracket
    measure = cfg.measure
    if args.proposition == "mps":
        grid = _parse_grid(args.grid or "1:2:0.25")
        report = statics.verify_mps_tightening(
            measure, grid, cfg.bank, x, args.ambiguity, solver)
    elif args.proposition == "skew":
        from .beliefs import DiscreteGrid, SecondOrderMeasure

        if not args.config:
            measure = SecondOrderMeasure.point_mass(
                DiscreteGrid((0.0, 0.02, 0.04), (0.25, 0.5, 0.25)))
        grid = _parse_grid(args.grid or "0:0.2:0.1")
        report = statics.verify_skew_tightening(measure, grid, cfg.bank, x, solver)
    elif args.proposition == "rationing":
        report = statics.verify_rationing(
            measure, args.dilation, cfg.bank, x, cfg.market)
    elif args.proposition == "ambiguity":
        if not args.config:
            measure = DEFAULT_AMBIGUITY_MEASURE
        grid = _parse_grid(args.grid or "0,2500,10000,20000")
        report = statics.verify_ambiguity_amplification(
            measure, args.dilation, cfg.bank, x, grid, solver)
    else:  # neutrality
        report = statics.verify_neutrality(measure, cfg.bank, x, cfg=solver)
    payload = {"report": report.as_dict(), "parameters": cfg.as_dict(),
               "macro_state": x}
    _atomic_write(args.out, _json_dumps(payload))
    inputs = [args.config] if args.config else []
    _write_manifest("statics", payload["parameters"], None, inputs, [args.out])
    print(f"{args.proposition}: {report.verdict}")
    return 0


def _cmd_fit(args) -> int:
    df = dataio.load_loans(args.data)
    df, removed = dataio.filter_pd(df, args.pd_cutoff)
    data = build_design(df, args.indicator)
    if ".." in args.components:
        lo, hi = (int(v) for v in args.components.split(".."))
        if lo != 1:
            raise ValueError("component sweeps must start at 1")
        selection = mixture.select_components(
            data, hi, criterion=args.criterion, seed=args.seed)
        model, report = selection.best_model, selection.best_report
        table = selection.table
    else:
        model, report = mixture.em_fit(data, int(args.components), init_seed=args.seed)
        table = None
    levels = df[args.indicator].quantile([0.25, 0.75])
    shift = mixture.quantile_shift(
        model, representative_point(data), args.indicator,
        float(levels.iloc[0]), float(levels.iloc[1]))
    payload = {
        "model": model.to_json_dict(),
        "fit": {
            "final_loglik": report.final_loglik,
            "aic": report.aic,
            "bic": report.bic,
            "n_iterations": report.n_iterations,
            "converged": report.converged,
            "restart_index": report.restart_index,
        },
        "selection_table": table,
        "pd_rows_removed": removed,
        "indicator": args.indicator,
        "mean_shift_bp": shift.mean_shift_bp,
        "right_tail_shift_bp": shift.right_tail_shift_bp,
    }
    _atomic_write(args.out, _json_dumps(payload))
    q_path = os.path.splitext(args.out)[0] + ".quantiles.csv"
    _atomic_write(q_path, "\n".join(",".join(map(str, r)) for r in shift.csv_rows()) + "\n")
    _write_manifest("fit", {"indicator": args.indicator, "components": args.components,
                            "criterion": args.criterion, "pd_cutoff": args.pd_cutoff},
                    args.seed, [args.data], [args.out, q_path])
    print(f"components: {model.n_components}  loglik: {report.final_loglik:.2f}  "
          f"mean shift: {shift.mean_shift_bp:.2f} bp")
    return 0


def _cmd_placebo(args) -> int:
    df = dataio.load_loans(args.data)
    df, _ = dataio.filter_pd(df, args.pd_cutoff)
    study = mixture.placebo_study(
        df, indicator=args.indicator, trials=args.trials, seed=args.seed,
        n_components=args.components)
    _atomic_write(args.out, _json_dumps(study.as_dict()))
    _write_manifest("placebo", {"indicator": args.indicator, "trials": args.trials,
                                "components": args.components},
                    args.seed, [args.data], [args.out])
    print(f"placebo: share |z|<2 = {study.share_within_2se:.2f}, "
          f"max |mean quantile diff| = "
          f"{max(abs(v) for v in study.mean_quantile_diff_bp.values()):.4f} bp")
    return 0


def _cmd_simulate(args) -> int:
    if args.overdrafts:
        cfg = dataio.OverdraftConfig(n=args.n, seed=args.seed,
                                     beta_indicator=args.beta_indicator,
                                     via_composition=args.via_composition)
        df, sidecar = dataio.simulate_overdrafts(cfg)
    else:
        cfg = dataio.GeneratorConfig(n=args.n, seed=args.seed,
                                     indicator_effect_bp=args.effect_bp)
        df, sidecar = dataio.simulate_loans(cfg)
    directory = os.path.dirname(os.path.abspath(args.out)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    os.close(fd)
    try:
        dataio.write_csv(df, tmp)
        os.replace(tmp, args.out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    sidecar_path = os.path.splitext(args.out)[0] + ".truth.json"
    _atomic_write(sidecar_path, _json_dumps(sidecar))
    _write_manifest("simulate",
                    {"n": args.n, "overdrafts": args.overdrafts,
                     "effect_bp": args.effect_bp,
                     "beta_indicator": args.beta_indicator},
                    args.seed, [], [args.out, sidecar_path])
    print(f"wrote {len(df)} rows to {args.out}")
    return 0


def _cmd_spread(args) -> int:
    df = dataio.load_overdrafts(args.data)
    df, rejected = panel.build_spread(df)
    if rejected:
        print(f"dropped {len(rejected)} rows with missing benchmark", file=sys.stderr)
    cluster = args.cluster
    if args.ladder:
        estimates = panel.saturation_ladder(df, args.indicator, cluster)
    else:
        estimates = [panel.fe_within(df, ["gdp_growth", "ecb_dfr", "pd"],
                                     args.indicator, cluster=cluster)]
    lines = ["label,term,estimate,std_error,n_obs,r2_within,cluster_scheme"]
    for est in estimates:
        for name in est.names:
            lines.append(f"{est.label},{name},{est.coefficients[name]!r},"
                         f"{est.std_errors[name]!r},{est.n_obs},{est.r2_within!r},"
                         f"{est.cluster_scheme}")
    _atomic_write(args.out, "\n".join(lines) + "\n")
    _write_manifest("spread", {"indicator": args.indicator, "cluster": cluster,
                               "ladder": args.ladder},
                    None, [args.data], [args.out])
    for est in estimates:
        coef, se = est.row(args.indicator)
        print(f"{est.label or est.cluster_scheme}: {args.indicator} = {coef:.4f} ({se:.4f})")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loanlab",
                     description="Loan pricing under dispersed inflation beliefs")
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("price", parents=[], help="solve the optimal loan rate")
    _add_bank_flags(p)
    p.add_argument("--ambiguity", action="store_true")
    p.add_argument("--out", default="price.json")
    p.add_argument("--emit-plot-data", action="store_true")
    p.add_argument("--plot-points", type=int, default=101)
    p.set_defaults(func=_cmd_price)

    p = sub.add_parser("statics", help="run a comparative-statics verification")
    _add_bank_flags(p)
    p.add_argument("--proposition", required=True,
                   choices=["mps", "skew", "rationing", "ambiguity", "neutrality"])
    p.add_argument("--grid", help="a:b:step or comma list")
    p.add_argument("--dilation", type=float, default=1.5)
    p.add_argument("--ambiguity", action="store_true")
    p.add_argument("--out", default="statics.json")
    p.set_defaults(func=_cmd_statics)

    p = sub.add_parser("fit", help="fit the mixture density regression")
    p.add_argument("--data", required=True)
    p.add_argument("--components", default="1..6",
                   help="fixed count (e.g. 3) or sweep (e.g. 1..8)")
    p.add_argument("--criterion", choices=["aic", "bic"], default="bic")
    p.add_argument("--indicator", default="niu",
                   choices=["niu", "asi", "disagreement"])
    p.add_argument("--pd-cutoff", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("placebo", help="placebo trials with moment-matched noise")
    p.add_argument("--data", required=True)
    p.add_argument("--indicator", default="niu")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--components", type=int, default=3)
    p.add_argument("--pd-cutoff", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="placebo.json")
    p.set_defaults(func=_cmd_placebo)

    p = sub.add_parser("simulate", help="generate a synthetic loan or overdraft panel")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--effect-bp", type=float, default=14.0)
    p.add_argument("--overdrafts", action="store_true")
    p.add_argument("--beta-indicator", type=float, default=0.12)
    p.add_argument("--via-composition", action="store_true")
    p.add_argument("--out", default="loans.csv")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("spread", help="overdraft cost-spread regressions")
    p.add_argument("--data", required=True)
    p.add_argument("--indicator", default="niu")
    p.add_argument("--cluster", choices=["bank", "bank-borrower"], default="bank")
    p.add_argument("--ladder", action="store_true")
    p.add_argument("--out", default="estimates.csv")
    p.set_defaults(func=_cmd_spread)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "subcommand", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, BeliefError, dataio.SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(dispatch(sys.argv[1:]))
