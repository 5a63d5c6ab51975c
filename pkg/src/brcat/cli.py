"""Command-line interface: ``brcat {fit,detect,wald,superiority,simulate,logits}``.

Exit codes: 0 on success (including fits with divergence annotations),
2 for input errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__
from .diagnostics import detect_separation, empirical_adjacent_logits
from .exceptions import (BrcatError, ConvergenceError, DataError, ModelError,
                         SingularInformationError, SolverError)
from .fitting import METHODS, FitOptions, fit
from .inference import (parallel_contrast, summary_superiority, superiority,
                        wald_test, z_table)
from .model import Family, ModelSpec, build_model, parse_dataset
from .numdiff import DifferentiationError
from .simulation import BiasStudyConfig, run_bias_study

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("brcat")


class UsageError(Exception):
    """Bad command-line arguments discovered after parsing."""


def _common(parser):
    g = parser.add_argument_group("data and model")
    g.add_argument("--data", required=True, metavar="PATH", help="CSV file")
    g.add_argument("--counts", metavar="COLS",
                   help="comma-separated count columns, one per category in order (wide format)")
    g.add_argument("--response", metavar="COL", help="column of category labels (long format)")
    g.add_argument("--categories", metavar="LABELS",
                   help="ordered category labels for --response (default: sorted unique labels)")
    g.add_argument("--covariates", metavar="COLS", help="comma-separated covariate columns (default: all others)")
    g.add_argument("--family", choices=[f.value for f in Family], default="acl-npo")
    g.add_argument("--method", choices=METHODS, default="mbr")
    g.add_argument("--tol", type=float, default=1e-8, metavar="R")
    g.add_argument("--max-iter", type=int, default=100, metavar="N")
    g.add_argument("--json", metavar="PATH", help="also write a JSON report ('-' for stdout)")
    g.add_argument("--seed", type=int, default=None, metavar="N")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="brcat", description="Bias-reduced estimation for binary, nominal and ordinal logit models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model and print the coefficient table")
    _common(p)

    p = sub.add_parser("detect", help="check the data for separation")
    _common(p)

    p = sub.add_parser("wald", help="Wald test of linear restrictions C theta = 0")
    _common(p)
    p.add_argument("--contrast", required=True, metavar="parallel|FILE",
                   help="'parallel' for equal slopes across logits, or a CSV file holding C")
    p.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("superiority", help="ordinal superiority of one group over another")
    _common(p)
    p.add_argument("--group", required=True, metavar="COL", help="0/1 group covariate")
    where = p.add_mutually_exclusive_group(required=True)
    where.add_argument("--at", action="append", metavar="SETTING",
                       help="covariate setting such as 'temp=0' (repeatable)")
    where.add_argument("--summary", action="store_true", help="average over the observed covariate rows")
    p.add_argument("--corrected", action="store_true", help="subtract the estimated bias (mbr fits only)")

    p = sub.add_parser("simulate", help="Monte Carlo bias and coverage study")
    _common(p)
    p.add_argument("--config", required=True, metavar="PATH", help="JSON study configuration")
    p.add_argument("--n-jobs", type=int, default=1)

    p = sub.add_parser("logits", help="empirical adjacent-category logits (counts + 1/2)")
    _common(p)
    return parser


# helpers ---------------------------------------------------------------------


def _load(args):
    if args.counts is None and args.response is None:
        raise UsageError("give --counts (wide format) or --response (long format)")
    return parse_dataset(args.data, counts=args.counts, covariates=args.covariates,
                         response=args.response, categories=args.categories)


def _model(args, d):
    return build_model(d, ModelSpec(Family(args.family), d.k))


def _fit(args, mm, d):
    return fit(mm, d, FitOptions(method=args.method, tol=args.tol, max_iter=args.max_iter))


def _emit_json(args, payload):
    if not args.json:
        return
    text = json.dumps(payload, indent=2)
    if args.json == "-":
        print(text, file=sys.stdout)
    else:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _floats(a):
    return [float(x) for x in np.ravel(a)]


def fit_payload(res):
    return {
        "family": res.model.spec.family.value,
        "method": res.method,
        "names": list(res.names),
        "parameterization": res.theta.parameterization.value,
        "coef": _floats(res.coef),
        "se": _floats(res.se),
        "vcov": np.asarray(res.vcov).tolist(),
        "z_table": [
            {"name": r.name, "estimate": r.estimate, "se": r.se, "z": r.z, "p_value": r.p_value,
             "divergence": r.divergence}
            for r in z_table(res)
        ],
        "loglik": res.loglik_full,
        "loglik_kernel": res.loglik,
        "objective": res.objective,
        "converged": res.converged,
        "iterations": res.iterations,
        "estimating_fn_norm": res.estimating_fn_norm,
        "divergence_flags": [int(f) for f in res.divergence_flags],
    }


def _print_table(res, out):
    rows = z_table(res)
    width = max(len(r.name) for r in rows)
    print(f"{'':{width}}  {'Estimate':>9} {'Std.Err':>8} {'z':>8} {'p':>7}", file=out)
    for r in rows:
        line = f"{r.name:{width}}  {r.estimate:9.2f} {r.se:8.2f} {r.z:8.2f} {r.p_value:7.3f}"
        if r.annotation:
            line += f"  {r.annotation}"
        print(line, file=out)


def _parse_setting(text):
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"setting {text!r} must look like name=value[,name=value]")
        name, value = part.split("=", 1)
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"setting {text!r}: {value!r} is not a number") from None
    return out


# commands --------------------------------------------------------------------


def cmd_fit(args, out):
    d = _load(args)
    mm = _model(args, d)
    res = _fit(args, mm, d)
    print(f"{res.model.spec.family.value} model, {res.method} fit, {d.n} covariate rows, k = {d.k}", file=out)
    _print_table(res, out)
    print(f"log-likelihood: {res.loglik_full:.4f}", file=out)
    if res.method == "mbr":
        print(f"penalized log-likelihood (kernel + log det(i)/2): {res.objective:.4f}", file=out)
    status = "converged" if res.converged else "stopped"
    print(f"{status} after {res.iterations} iterations; "
          f"estimating function sup-norm {res.estimating_fn_norm:.2e}", file=out)
    _emit_json(args, fit_payload(res))
    return EXIT_OK


def cmd_detect(args, out):
    d = _load(args)
    mm = _model(args, d)
    rep = detect_separation(mm, d)
    print(rep.describe(), file=out)
    _emit_json(args, {
        "status": rep.status.value,
        "names": list(rep.names),
        "infinite_components": [int(s) for s in rep.infinite_components],
        "separating_direction": None if rep.separating_direction is None else _floats(rep.separating_direction),
    })
    return EXIT_OK


def _contrast(args, res):
    if args.contrast == "parallel":
        if res.model.spec.family.proportional or res.model.spec.family is Family.LOGIT:
            raise UsageError("the parallel contrast needs a non-proportional model (acl-npo or bcl)")
        return parallel_contrast(res.model.k, res.model.p)
    try:
        C = np.loadtxt(args.contrast, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read contrast file {args.contrast!r}: {exc}") from None
    return C


def cmd_wald(args, out):
    d = _load(args)
    mm = _model(args, d)
    res = _fit(args, mm, d)
    rep = wald_test(res, _contrast(args, res), level=args.level)
    print(f"Wald statistic W = {rep.statistic:.4f} on {rep.df} df, p = {rep.p_value:.4f}", file=out)
    print(f"chi-squared {rep.df} df {rep.level:.0%} quantile: {rep.critical_value:.4f}", file=out)
    _emit_json(args, {"statistic": rep.statistic, "df": rep.df, "p_value": rep.p_value,
                      "critical_value": rep.critical_value, "level": rep.level,
                      "contrast": rep.contrast.tolist(), "method": res.method})
    return EXIT_OK


def cmd_superiority(args, out):
    d = _load(args)
    mm = _model(args, d)
    if args.group not in d.covariate_names:
        raise UsageError(f"group column {args.group!r} is not a covariate")
    if args.corrected and args.method != "mbr":
        raise UsageError("--corrected needs --method mbr")
    res = _fit(args, mm, d)
    if args.summary:
        results = [("summary", summary_superiority(res, args.group, corrected=args.corrected))]
    else:
        results = []
        for text in args.at:
            w = _parse_setting(text)
            results.append((text, superiority(res, w, args.group, corrected=args.corrected)))
    width = max(len(label) for label, _ in results)
    print(f"{'setting':{width}}  {'Delta':>7} {'gamma':>7} {'B*':>8} {'Delta*':>7} {'gamma*':>7} {'se(gamma)':>9}",
          file=out)
    for label, r in results:
        print(f"{label:{width}}  {r.delta:7.3f} {r.gamma:7.3f} {r.B_star:8.4f} "
              f"{r.delta_corrected:7.3f} {r.gamma_corrected:7.3f} {r.se_gamma:9.3f}", file=out)
    _emit_json(args, [
        {"setting": label, "w": r.w, "delta": r.delta, "gamma": r.gamma, "B_star": r.B_star,
         "delta_corrected": r.delta_corrected, "gamma_corrected": r.gamma_corrected,
         "se_delta": r.se_delta, "se_gamma": r.se_gamma, "corrected": r.corrected}
        for label, r in results
    ])
    return EXIT_OK


def cmd_simulate(args, out):
    d = _load(args)
    mm = _model(args, d)
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from None
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("tol", args.tol)
    cfg.setdefault("max_iter", args.max_iter)
    try:
        cfg = BiasStudyConfig.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid study configuration: {exc}") from None
    if len(cfg.true_theta) != mm.dim:
        raise UsageError(f"true_theta has {len(cfg.true_theta)} values, model has {mm.dim} parameters")
    rep = run_bias_study(cfg, mm, d, n_jobs=args.n_jobs)
    print(f"{rep.replications} replications, seed {rep.seed}; failed fits: {rep.failures}", file=out)
    print(f"{'method':6} {'target':18} {'used':>5} {'rel.bias%':>10} {'(mcse)':>7} {'under%':>7} {'cover%':>7}",
          file=out)
    for s in rep.summaries:
        print(f"{s.method:6} {s.target:18} {s.n_used:5d} {s.relative_bias:10.2f} ({s.relative_bias_mcse:5.2f}) "
              f"{s.underestimation:7.2f} {s.coverage:7.2f}", file=out)
    _emit_json(args, rep.to_dict())
    return EXIT_OK


def cmd_logits(args, out):
    d = _load(args)
    L = empirical_adjacent_logits(d.Y)
    names = d.covariate_names
    labels = d.category_labels
    heads = [f"{labels[j]}/{labels[j + 1]}" for j in range(d.k - 1)]
    print("  ".join(f"{n:>8}" for n in names) + "  " + "  ".join(f"{h:>8}" for h in heads), file=out)
    for x, row in zip(d.X, L):
        print("  ".join(f"{v:8g}" for v in x) + "  " + "  ".join(f"{v:8.3f}" for v in row), file=out)
    _emit_json(args, {"covariates": list(names), "X": d.X.tolist(), "logits": L.tolist(), "columns": heads})
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit, "detect": cmd_detect, "wald": cmd_wald,
    "superiority": cmd_superiority, "simulate": cmd_simulate, "logits": cmd_logits,
}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, DataError, ModelError, KeyError, OSError) as exc:
        print(f"brcat: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, SingularInformationError, SolverError, DifferentiationError) as exc:
        print(f"brcat: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrcatError as exc:
        print(f"brcat: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main_entry():
    sys.exit(main())
