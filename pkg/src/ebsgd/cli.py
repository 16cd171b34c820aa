"""Command-line interface.

Exit status: 0 on success, 2 for usage or configuration errors, 3 for
unusable input data. Every subcommand accepts ``--seed``, ``--out`` and
``--config FILE``, where FILE holds ``key = value`` lines or a JSON object
whose keys are option names (dashes or underscores). Options given on the
command line override the file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .batching import EbsTracker, IbsTracker, ibs_boundaries
from .covariance import CovEstimate, Kind, ebs2b_estimate, ebs_estimate, ibs_estimate, lugsail_estimate, psd_project
from .datasets import DataError, csv_stream, read_labeled_csv, read_matrix_csv
from .experiments import (
    ClassificationConfig,
    ConfigError,
    ExperimentConfig,
    classification_experiment,
    mean_model_bias_oracle,
    qq_data,
    rows_to_csv,
    run_replications,
    synthetic_classification_data,
    write_outputs,
)
from .models import Model, logistic_mle, make_oracle
from .regions import (
    bonferroni_region,
    classify_conservative,
    classify_plain,
    ellipsoid_region,
    marginal_cis,
    normal_quantile,
    predict_prob_interval,
    simultaneous_region,
    volume_ratio,
)
from .sgd import ArrayStream, LearningRateSchedule, run_asgd

ESTIMATOR_CHOICES = ("EBS", "EBS2B", "LUGSAIL", "IBS")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.replace(",", " ").split()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from err


def _ints(text: str) -> list[int]:
    try:
        return [int(float(s)) for s in text.replace(",", " ").split()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from err


def _names(text: str) -> list[str]:
    return [s for s in text.replace(",", " ").split() if s]


def load_config_file(path) -> dict:
    """Parse a JSON object or ``key = value`` lines (``#`` starts a comment)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON ({err})") from err
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return {k.replace("-", "_"): v for k, v in obj.items()}
    out = {}
    for num, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--config", help="config file: key = value lines or a JSON object")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ebsgd", description="Online covariance estimation and inference for averaged SGD.")
    parser.add_argument("--version", action="version", version=f"ebsgd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="Monte Carlo study of the estimators; long-form metrics CSV")
    _common(p)
    p.add_argument("--model", default="linear", choices=[m.value for m in Model])
    p.add_argument("--design", default="identity", choices=["identity", "toeplitz", "equicorr"])
    p.add_argument("--d", type=int, default=5, help="dimension")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--eta0", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.51)
    p.add_argument("--beta", type=float, default=None, help="batch-size exponent (default (1+alpha)/2)")
    p.add_argument("--c", type=float, default=0.1, help="batch-size constant")
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--n", type=int, default=100_000, help="total averaged iterates per chain")
    p.add_argument("--checkpoints", type=_ints, default=None, help="comma-separated n values (default: --n)")
    p.add_argument("--reps", type=int, default=10, help="replications")
    p.add_argument("--estimators", type=_names, default=["EBS", "LUGSAIL", "IBS"])
    p.add_argument("--p", type=float, default=0.05, help="1 - confidence level")
    p.add_argument("--ibs-scale", type=float, default=64.0)
    p.add_argument("--intercept", type=float, default=None, help="logistic model intercept")
    p.add_argument("--no-true", action="store_true", help="omit the known-covariance baseline")
    p.add_argument("--group-size", type=int, default=50, help="chains simulated together")
    p.add_argument("--workers", type=int, default=None, help="processes (default EBSGD_WORKERS or 1)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="covariance estimate (JSON) from iterates or from data")
    _common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--iterates", help="CSV of iterates, one row per step")
    src.add_argument("--data", help="CSV of observations to fit by ASGD")
    p.add_argument("--estimator", default="LUGSAIL", type=str.upper, choices=ESTIMATOR_CHOICES)
    p.add_argument("--batch-size", type=int, default=None, help="fixed batch size (default: EBS law)")
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.51)
    p.add_argument("--eta0", type=float, default=0.5)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--model", default="linear", choices=["linear", "lad", "logistic"])
    p.add_argument("--response", default="y", help="response column of --data")
    p.add_argument("--features", type=_names, default=None, help="feature columns (default: all others)")
    p.add_argument("--intercept", action="store_true", help="add a constant feature")
    p.add_argument("--warm-start", type=int, default=0, help="logistic: rows for the MLE starting point")
    p.add_argument("--ibs-scale", type=float, default=64.0)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("regions", help="ellipsoid and rectangles from a saved estimate")
    _common(p)
    p.add_argument("--estimate", required=True, help="JSON written by 'estimate'")
    p.add_argument("--theta", type=_floats, default=None, help="center (default: theta_hat in the file)")
    p.add_argument("--n", type=int, default=None, help="iterates averaged (default: n in the file)")
    p.add_argument("--p", type=float, default=0.05)
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("predict", help="probability intervals and classifications for CSV rows")
    _common(p)
    p.add_argument("--estimate", required=True, help="JSON from 'estimate --model logistic'")
    p.add_argument("--data", required=True, help="CSV of covariates")
    p.add_argument("--features", type=_names, default=None)
    p.add_argument("--response", default=None, help="optional response column for error rates")
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--cutoff", type=float, default=0.5)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("classify", help="plain vs conservative misclassification over cutoffs")
    _common(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV with a binary response")
    src.add_argument("--synthetic", action="store_true", help="simulated logistic data")
    p.add_argument("--response", default="y")
    p.add_argument("--features", type=_names, default=None)
    p.add_argument("--split", type=float, default=0.5, help="training fraction")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--n-train", type=int, default=50_000)
    p.add_argument("--n-test", type=int, default=10_000)
    p.add_argument("--intercept", type=float, default=-3.0, help="synthetic intercept")
    p.add_argument("--cutoffs", type=_floats, default=[0.1, 0.2, 0.3, 0.4, 0.5])
    p.add_argument("--eta0", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=0.51)
    p.add_argument("--warm-start", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=5_000)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bias-oracle", help="leading-order mean-model bias of EBS and lugsail")
    _common(p)
    p.add_argument("--n", type=_ints, required=True, help="comma-separated sample sizes")
    p.add_argument("--alpha", type=float, default=0.51)
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--C1", type=float, default=1.0, dest="C1")
    p.add_argument("--sigma", type=float, default=None, help="include the centering term for this variance")
    p.set_defaults(func=cmd_bias_oracle)

    p = sub.add_parser("qq", help="normal QQ table of standardized batch means")
    _common(p)
    p.add_argument("--iterates", required=True)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.755)
    p.add_argument("--theta-star", type=_floats, default=None)
    p.set_defaults(func=cmd_qq)
    return parser


# -- output helpers ------------------------------------------------------

def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# -- commands ------------------------------------------------------------

def cmd_simulate(args) -> int:
    config = ExperimentConfig(
        model=args.model, design=args.design, d=args.d, rho=args.rho, eta0=args.eta0,
        alpha=args.alpha, beta=args.beta, c=args.c, burn_in=args.burn_in, n_max=args.n,
        checkpoints=tuple(args.checkpoints or ()), replications=args.reps, seed=args.seed,
        estimators=tuple(args.estimators), p=args.p, ibs_scale=args.ibs_scale,
        include_true=not args.no_true, intercept=args.intercept, group_size=args.group_size,
    )
    rows = run_replications(config, workers=args.workers)
    if args.out:
        write_outputs(rows, config, args.out)
    else:
        sys.stdout.write(rows_to_csv(rows))
    return 0


def _estimate_from(kind: str, tracker: EbsTracker | None, ibs: IbsTracker | None) -> CovEstimate:
    if kind == "IBS":
        return ibs_estimate(*ibs.finalize())
    bm = tracker.finalize()
    return {"EBS": ebs_estimate, "EBS2B": ebs2b_estimate, "LUGSAIL": lugsail_estimate}[kind](bm)


def _trackers(args, d, n):
    beta = (1 + args.alpha) / 2 if args.beta is None else args.beta
    if args.estimator == "IBS":
        return None, IbsTracker(ibs_boundaries(n, args.alpha, args.ibs_scale), d)
    return EbsTracker(args.c, beta, d, batch_size=args.batch_size), None


def cmd_estimate(args) -> int:
    if args.iterates:
        chain = read_matrix_csv(args.iterates)
        n, d = chain.shape
        ebs, ibs = _trackers(args, d, n)
        target = ibs if ebs is None else ebs
        for row in chain:
            target.push(row)
        theta_hat = chain.mean(axis=0)
    else:
        model = Model(args.model)
        table = read_labeled_csv(args.data, args.response, args.features, args.intercept,
                                 binary=model is Model.LOGISTIC)
        x, y = table.x, table.y
        d = x.shape[1]
        w = args.warm_start
        theta0 = np.zeros(d)
        if w:
            if model is not Model.LOGISTIC:
                raise ConfigError("--warm-start applies to the logistic model")
            theta0 = logistic_mle(x[:w], y[:w])
        n = len(y) - w - args.burn_in
        if n < 2:
            raise DataError(f"not enough rows ({len(y)}) after warm start and burn-in")
        ebs, ibs = _trackers(args, d, n)
        theta_hat, _, _ = run_asgd(
            make_oracle(model, d), ArrayStream(x[w:], y[w:]),
            LearningRateSchedule(args.eta0, args.alpha), theta0, args.burn_in, n,
            tracker=ibs if ebs is None else ebs,
        )
    try:
        est = _estimate_from(args.estimator, ebs, ibs)
    except ValueError as err:
        raise DataError(str(err)) from err
    if args.format == "csv":
        _emit(est.to_csv(), args.out)
        return 0
    obj = est.to_dict()
    obj["theta_hat"] = np.asarray(theta_hat).tolist()
    _emit(_json(obj), args.out)
    return 0


def _load_estimate(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
        est = CovEstimate.from_dict(obj)
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from err
    except (ValueError, KeyError, TypeError) as err:
        raise DataError(f"{path}: not a covariance estimate ({err})") from err
    return est, obj.get("theta_hat")


def cmd_regions(args) -> int:
    est, theta = _load_estimate(args.estimate)
    theta = args.theta if args.theta is not None else theta
    d = est.dimension
    if theta is None:
        theta = [0.0] * d
    if len(theta) != d:
        raise DataError(f"center has length {len(theta)}, estimate has dimension {d}")
    n = args.n or est.n
    if n < 1:
        raise DataError("the number of iterates n must be positive")
    sigma = psd_project(est)
    ell = ellipsoid_region(theta, sigma.matrix, n, args.p)
    marg = marginal_cis(theta, sigma.matrix, n, args.p)
    bonf = bonferroni_region(theta, sigma.matrix, n, args.p)
    simul = simultaneous_region(theta, sigma.matrix, n, args.p, seed=args.seed)
    out = {
        "p": args.p,
        "n": int(n),
        "projected": sigma.projected,
        "ellipsoid": ell.to_dict(),
        "uncorrected": marg.to_dict(),
        "bonferroni": bonf.to_dict(),
        "simultaneous": simul.to_dict(),
        "z_star": simul.z,
        "volume_ratio": {
            "uncorrected": volume_ratio(marg, ell),
            "bonferroni": volume_ratio(bonf, ell),
            "simultaneous": volume_ratio(simul, ell),
        },
    }
    _emit(_json(out), args.out)
    return 0


def cmd_predict(args) -> int:
    est, theta = _load_estimate(args.estimate)
    if theta is None:
        raise DataError(f"{args.estimate} has no theta_hat")
    if args.response:
        table = read_labeled_csv(args.data, args.response, args.features, args.intercept)
        x, y = table.x, table.y
    else:
        x = read_matrix_csv(args.data)
        if args.intercept:
            x = np.column_stack([np.ones(len(x)), x])
        y = None
    if x.shape[1] != len(theta):
        raise DataError(f"data have {x.shape[1]} features, the fit has {len(theta)}")
    sigma = psd_project(est)
    pi = predict_prob_interval(x, theta, sigma.matrix, est.n, args.level)
    z = normal_quantile(0.5 + args.level / 2)
    plain = classify_plain(pi.p_hat, args.cutoff)
    cons = classify_conservative(pi.p_hat, pi.se, args.cutoff, z)
    header = ["row", "p_hat", "se", "lower", "upper", "plain", "conservative"]
    cols = [np.arange(len(x)), pi.p_hat, pi.se, pi.lower, pi.upper, plain, cons]
    if y is not None:
        header.append("y")
        cols.append(y.astype(int))
    rows = [[int(c[i]) if c.dtype.kind in "iu" else c[i] for c in cols] for i in range(len(x))]
    _emit(_table(header, rows), args.out)
    if y is not None:
        sys.stderr.write(
            f"misclassification: plain {np.mean(plain != y):.6f}, conservative {np.mean(cons != y):.6f}\n"
        )
    return 0


def cmd_classify(args) -> int:
    config = ClassificationConfig(eta0=args.eta0, alpha=args.alpha, warm_start=args.warm_start,
                                  burn_in=args.burn_in)
    if args.synthetic:
        train, test, _ = synthetic_classification_data(args.seed, args.d, args.n_train, args.n_test,
                                                       args.intercept)
    else:
        split = csv_stream(args.data, args.response, args.features, args.split, args.seed, intercept=True)
        if args.out:
            split.write_manifest(args.out + ".split.json")
        train, test = split.train, split.test
        if split.n_skipped:
            sys.stderr.write(f"skipped {split.n_skipped} malformed rows\n")
    try:
        res = classification_experiment(train, test, config, args.cutoffs)
    except ValueError as err:
        raise DataError(str(err)) from err
    rows = [[r["q"], r["plain"], r["conservative"]] for r in res.table()]
    _emit(_table(["q", "plain", "conservative"], rows), args.out)
    return 0


def cmd_bias_oracle(args) -> int:
    rows = []
    for n in args.n:
        r = mean_model_bias_oracle(n, args.alpha, args.c, args.beta, args.C1, args.sigma)
        rows.append([r.n, r.batch_size, r.n_batches, r.ebs, r.lugsail])
    _emit(_table(["n", "batch_size", "n_batches", "ebs_bias", "lugsail_bias"], rows), args.out)
    return 0


def cmd_qq(args) -> int:
    chain = read_matrix_csv(args.iterates)
    tracker = EbsTracker(args.c, args.beta, chain.shape[1], batch_size=args.batch_size)
    for row in chain:
        tracker.push(row)
    try:
        table = qq_data(tracker.finalize(), args.theta_star)
    except ValueError as err:
        raise DataError(str(err)) from err
    _emit(_table(["empirical", "theoretical"], table.tolist()), args.out)
    return 0


# -- entry point ---------------------------------------------------------

def _apply_config(parser, argv):
    """Re-parse with config-file values installed as defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = load_config_file(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        if key not in dests or key in ("config", "help"):
            raise ConfigError(f"unknown config key {key!r} for '{args.command}'")
        action = dests[key]
        if isinstance(value, str):
            if isinstance(action, argparse._StoreTrueAction):
                value = value.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                try:
                    value = action.type(value)
                except (ValueError, argparse.ArgumentTypeError) as err:
                    raise ConfigError(f"config key {key!r}: {err}") from err
        elif isinstance(value, list) and action.type in (_floats, _ints, _names):
            value = action.type(",".join(map(str, value)))
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
        defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except _UsageError as err:
        sys.stderr.write(f"{err}\n")
        return 2
    except SystemExit as err:  # --help / --version
        return int(err.code or 0)
    except ConfigError as err:
        sys.stderr.write(f"config error: {err}\n")
        return 2
    except DataError as err:
        sys.stderr.write(f"data error: {err}\n")
        return 3
    except FileNotFoundError as err:
        sys.stderr.write(f"data error: {err}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
