"""Command-line interface.

Exit codes: 0 success, 2 usage or validation error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import roles as roles_io
from .cookbook import CookbookError, run_cookbook, track_over_time
from .dataset import Dataset, DatasetError
from .diagram import DiagramError
from .estimation import EstimationError, EstimatorConfig, bootstrap_ci, estimate_measure
from .fairpred import (
    CausalIFConfig,
    LinearPredictor,
    TransportError,
    audit_predictor,
    causal_if,
    fpt_experiment,
    inproc_fair_fit,
    tv_only_fit,
)
from .oracle import (
    KINDS,
    DegenerateEventError,
    MeasureSpec,
    MeasureSpecError,
    World,
    decompose_tv,
    verify_map_relations,
)
from .report import dumps, envelope, parse_event, rows_to_csv, write_text
from .scm import SCENARIOS, StructuralError, UnknownScenario, builtin_scenario, sample_observational
from .scm import io as scm_io


class ConfigError(ValueError):
    pass


VALIDATION_ERRORS = (ConfigError, UnknownScenario, DatasetError, roles_io.RoleConfigError,
                     MeasureSpecError, StructuralError, CookbookError, DiagramError,
                     EstimationError, FileNotFoundError)

_PARAM_ALIASES = {"lambda": "lam"}


# ------------------------------------------------------------------ helpers
def _scenario(args):
    if getattr(args, "model", None):
        return scm_io.load(args.model)
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[_PARAM_ALIASES.get(k, k)] = float(v) if k not in ("seed", "n_z", "n_w", "t",
                                                                   "dyn_seed") else int(v)
    for k in ("alpha", "beta", "lambda"):
        v = getattr(args, k, None)
        if v is not None:
            params[_PARAM_ALIASES.get(k, k)] = v
    try:
        return builtin_scenario(args.scenario, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for {args.scenario}: {exc}") from None


def _data_roles(args):
    data = Dataset.from_csv(args.data)
    cfg = roles_io.load(args.roles)
    return data, cfg.to_sfm()


def _est_config(args):
    try:
        return EstimatorConfig(method=args.method, folds=args.folds, clip=args.clip,
                               bootstrap=args.bootstrap, ci_level=args.ci, seed=args.seed,
                               nuisance=args.nuisance, threads=args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _spec(args):
    return MeasureSpec(_kind(args.measure), args.x0, args.x1, parse_event(args.event))


def _kind(name):
    lookup = {k.lower(): k for k in KINDS}
    try:
        return lookup[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown measure {name!r}; choose from {', '.join(KINDS)}") from None


def _emit(args, command, params, result, text=None):
    if args.format == "text" and text is not None:
        out = text
    else:
        out = dumps(envelope(command, params, result))
    write_text(out, args.out, sys.stdout)


# ----------------------------------------------------------------- commands
def cmd_simulate(args):
    model = _scenario(args)
    if args.n < 0:
        raise ConfigError("-n must be >= 0")
    data = sample_observational(model, args.n, args.seed, threads=args.threads)
    write_text(data.to_csv(), args.out, sys.stdout)


def cmd_oracle(args):
    model = _scenario(args)
    spec = _spec(args)
    world = World(model, args.n, args.seed, threads=args.threads)
    est = world.measure(spec)
    params = {"scenario": model.name, "measure": spec.kind, "x0": spec.x0, "x1": spec.x1,
              "event": args.event or "", "n": args.n, "seed": args.seed}
    text = f"{spec.describe()}: {est.value:+.6f} (mc stderr {est.mc_stderr:.6f}, " \
           f"n_eff {est.n_effective})\n"
    _emit(args, "oracle", params, est.to_record(spec), text)


def cmd_decompose(args):
    model = _scenario(args)
    world = World(model, args.n, args.seed, threads=args.threads)
    params = {"scenario": model.name, "level": args.level, "n": args.n, "seed": args.seed}
    rep = decompose_tv(model, args.level, world=world)
    result = rep.to_record()
    if args.verify:
        mr = verify_map_relations(model, world=world)
        result["relations"] = [vars(r) for r in mr.relations]
        result["admissibility"] = [vars(c) for c in mr.admissibility]
        result["structural_criteria"] = dict(zip(("DE", "IE", "SE"), mr.criteria))
        result["flags"] = mr.flags
    text = (f"{rep.level}: tv {rep.tv:+.6f} = de {rep.de:+.6f}, ie {rep.ie:+.6f}, "
            f"se {rep.se:+.6f} (residual {rep.residual:.2e})\n{rep.combination}\n")
    _emit(args, "decompose", params, result, text)


def cmd_estimate(args):
    data, sfm = _data_roles(args)
    spec = _spec(args)
    cfg = _est_config(args)
    est = bootstrap_ci(data, sfm, spec, cfg) if args.bootstrap > 1 else \
        estimate_measure(data, sfm, spec, cfg)
    params = {"data": args.data, "measure": spec.kind, "x0": spec.x0, "x1": spec.x1,
              "event": args.event or "", "method": cfg.method, "seed": cfg.seed,
              "bootstrap": cfg.bootstrap}
    text = f"{spec.describe()}: {est.value:+.6f} [{est.ci_lo:+.6f}, {est.ci_hi:+.6f}]\n"
    _emit(args, "estimate", params, est.to_record(), text)


def cmd_cookbook(args):
    data, sfm = _data_roles(args)
    cfg = _est_config(args)
    cells = [parse_event(c) for c in args.z_cell] if args.z_cell else None
    rep = run_cookbook(data, sfm, args.bn, cfg, alpha=args.alpha, bonferroni=args.bonferroni,
                       z_cells=cells)
    params = {"data": args.data, "bn": args.bn, "alpha": args.alpha, "method": cfg.method,
              "bootstrap": cfg.bootstrap, "seed": cfg.seed}
    _emit(args, "cookbook", params, rep.to_record(), rep.summary())


def cmd_fairfit(args):
    data, sfm = _data_roles(args)
    if args.tv_only:
        pred = tv_only_fit(data, sfm)
        effects = ["TV"]
    else:
        effects = [e.strip().upper() for e in args.effects.split(",") if e.strip()]
        try:
            pred = inproc_fair_fit(data, sfm, effects)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if args.predictions_out:
        out = data.with_column(args.prediction_column, pred.predict(data))
        write_text(out.to_csv(), args.predictions_out)
    params = {"data": args.data, "constraints": effects}
    _emit(args, "fairfit", params, pred.to_record())


def cmd_causal_if(args):
    data, sfm = _data_roles(args)
    cfg = CausalIFConfig(n_bins=args.bins, jitter=args.jitter, seed=args.seed,
                         residualize=not args.no_residualize)
    out, tmap = causal_if(data, sfm, args.bn, cfg)
    write_text(out.to_csv(), args.transformed_out)
    params = {"data": args.data, "bn": args.bn, "bins": args.bins, "jitter": args.jitter,
              "seed": args.seed}
    result = {"transformed": args.transformed_out, "fallback_rows": tmap.fallback_rows,
              "maps": tmap.summary()}
    _emit(args, "causal-if", params, result)


def cmd_audit(args):
    data, sfm = _data_roles(args)
    if args.predictor:
        import json

        with open(args.predictor, encoding="utf-8") as fh:
            doc = json.load(fh)
        rec = doc.get("result", doc)
        pred = LinearPredictor.from_record(rec)
    elif args.column:
        pred = args.column
    else:
        raise ConfigError("audit needs --predictor or --column")
    rep = audit_predictor(data, pred, sfm, _est_config(args))
    params = {"data": args.data, "predictor": args.predictor or args.column}
    _emit(args, "audit", params, rep.to_record())


def cmd_fpt(args):
    eps = [float(e) for e in args.eps.split(",")]
    curve = fpt_experiment(args.nz, args.nw, args.scms, args.rows, eps, args.seed,
                           threads=args.threads)
    if args.plot_out:
        write_text(rows_to_csv(["eps", "probability"], curve.plot_rows()), args.plot_out)
    params = {"nz": args.nz, "nw": args.nw, "scms": args.scms, "rows": args.rows,
              "eps": eps, "seed": args.seed}
    text = "".join(f"eps {e:g}: {p:.3f}\n" for e, p in curve.plot_rows())
    _emit(args, "fpt", params, curve.to_record(), text)


def cmd_track(args):
    cfg = roles_io.load(args.roles)
    datasets = [Dataset.from_csv(p) for p in args.data]
    times = [float(t) for t in args.times.split(",")] if args.times else None
    series = track_over_time(datasets, cfg.to_sfm(), _est_config(args), times)
    if args.plot_out:
        write_text(rows_to_csv(["measure", "t", "value", "stderr"], series.plot_rows()),
                   args.plot_out)
    params = {"data": list(args.data), "times": series.times}
    result = series.to_record()
    result["trend_xDEsym"] = series.trend("xDEsym")
    _emit(args, "track", params, result)


# ------------------------------------------------------------------- parser
def _add_common(p):
    p.add_argument("--out", "-o", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="worker cap; results do not depend on it")


def _add_scenario(p):
    p.add_argument("scenario", nargs="?", default=None, help=f"one of: {', '.join(SCENARIOS)}")
    p.add_argument("--model", help="scenario text file instead of a built-in name")
    p.add_argument("--param", action="append", help="scenario parameter key=value")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda", type=float)
    p.add_argument("-n", type=int, default=100000)


def _add_data(p):
    p.add_argument("--data", required=True, help="CSV with a header row")
    p.add_argument("--roles", required=True, help="role-mapping config")


def _add_estimator(p, bootstrap=1):
    p.add_argument("--method", default="DML",
                   choices=("PluginDiscrete", "PluginRegression", "DR", "DML"))
    p.add_argument("--nuisance", default="parametric", choices=("parametric", "saturated"))
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--clip", type=float, default=0.01)
    p.add_argument("--bootstrap", type=int, default=bootstrap)
    p.add_argument("--ci", type=float, default=0.95)


def _add_measure(p):
    p.add_argument("--measure", required=True, help=f"one of: {', '.join(KINDS)}")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--x1", type=float, default=1.0)
    p.add_argument("--event", default=None, help='e.g. "X=0,Z=1" or "W>=20,W<30"')


def build_parser():
    ap = argparse.ArgumentParser(prog="cfakit", description="Causal fairness analysis toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample observational data from a scenario")
    _add_scenario(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="ground-truth measure from a scenario")
    _add_scenario(p)
    _add_measure(p)
    _add_common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("decompose", help="shared-sample TV decomposition")
    _add_scenario(p)
    p.add_argument("--level", default="x-specific",
                   choices=("general", "x-specific", "z-specific"))
    p.add_argument("--verify", action="store_true", help="also check the map relations")
    _add_common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("estimate", help="estimate a measure from data")
    _add_data(p)
    _add_measure(p)
    _add_estimator(p)
    _add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("cookbook", help="disparate treatment / impact test battery")
    _add_data(p)
    p.add_argument("--bn", default="", help="business necessity set: '', Z, W or ZW")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bonferroni", action="store_true")
    p.add_argument("--z-cell", action="append", help="follow-up cell for continuous Z")
    _add_estimator(p, bootstrap=500)
    _add_common(p)
    p.set_defaults(func=cmd_cookbook)

    p = sub.add_parser("fairfit", help="fit a constrained linear predictor")
    _add_data(p)
    p.add_argument("--effects", default="DE,IE,SE")
    p.add_argument("--tv-only", action="store_true")
    p.add_argument("--predictions-out")
    p.add_argument("--prediction-column", default="yhat")
    _add_common(p)
    p.set_defaults(func=cmd_fairfit)

    p = sub.add_parser("causal-if", help="sequential quantile transport of the x0 group")
    _add_data(p)
    p.add_argument("--bn", default="")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--jitter", action="store_true")
    p.add_argument("--no-residualize", action="store_true")
    p.add_argument("--transformed-out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_causal_if)

    p = sub.add_parser("audit", help="decompose the disparity of a predictor")
    _add_data(p)
    p.add_argument("--predictor", help="JSON from `fairfit`")
    p.add_argument("--column", help="prediction column already in the data")
    _add_estimator(p)
    _add_common(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("fpt", help="random-SCM compliance experiment")
    p.add_argument("--nz", type=int, default=5)
    p.add_argument("--nw", type=int, default=5)
    p.add_argument("--scms", type=int, default=500)
    p.add_argument("--rows", type=int, default=100000)
    p.add_argument("--eps", default="0.01")
    p.add_argument("--plot-out")
    _add_common(p)
    p.set_defaults(func=cmd_fpt)

    p = sub.add_parser("track", help="track the cookbook measures over time")
    p.add_argument("--data", nargs="+", required=True, help="CSV files in time order")
    p.add_argument("--roles", required=True)
    p.add_argument("--times", help="comma-separated time labels")
    p.add_argument("--plot-out")
    _add_estimator(p, bootstrap=200)
    _add_common(p)
    p.set_defaults(func=cmd_track)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if hasattr(args, "scenario") and args.scenario is None and not getattr(args, "model", None):
        print("error: a scenario name or --model is required", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateEventError, TransportError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
