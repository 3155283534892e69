"""Command-line interface: ``bbis weights``, ``bbis experiment`` and ``bbis eval``.

Exit codes: 0 on success, 2 on parse or input errors, 3 on numerical failure.
Errors are reported on stderr as ``bbis: <stage>: <message>``.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidInputError, NumericalError
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    RecordWriter,
    default_threads,
    format_value,
    run_experiment,
    write_summary,
)
from .kde import kde_weights, rot_bandwidth
from .ksd import ksd_weights
from .med import MedConfig, med_weights
from .metrics import (
    WeightedSampleSet,
    energy_distance_full,
    energy_distance_simplified,
    weighted_moment_errors,
)
from .simplex import QPConfig
from .targets import (
    gaussian_target,
    load_logistic_csv,
    logistic_target,
    mixture_target,
    random_mixture_centers,
)

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
TARGETS = ("gaussian", "mixture", "logistic")


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(str(exc))
        self.stage = stage
        self.exc = exc


class _Stage:
    """Context manager that tags package and I/O errors with a pipeline stage."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, (InvalidInputError, NumericalError, OSError, ValueError, KeyError)):
            raise StageError(self.name, exc) from exc
        return False


# ---------------------------------------------------------------------------
# file formats


def read_samples_csv(path):
    """Parse ``x1,...,xp[,logdensity][,weight]`` with a header row.

    Returns ``(samples, log_density or None, weights or None)``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    known = {"logdensity", "weight"}
    xcols = [i for i, h in enumerate(header) if h not in known]
    if not xcols:
        raise InvalidInputError(f"{path}: no sample columns")
    bad = [header[i] for i in xcols if not (header[i].startswith("x") and header[i][1:].isdigit())]
    if bad:
        raise InvalidInputError(f"{path}: unexpected columns {bad}")
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    if any(len(r) != len(header) for r in rows):
        raise InvalidInputError(f"{path}: rows do not match the header width")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    x = data[:, xcols]
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{path}: non-finite sample values")
    lg = data[:, header.index("logdensity")] if "logdensity" in header else None
    w = data[:, header.index("weight")] if "weight" in header else None
    return x, lg, w


def write_weights_csv(path, weights):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "weight"])
        for i, v in enumerate(weights):
            w.writerow([i, format_value(v)])


def _dump_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_cli_target(args, dim):
    """Built-in target named by ``--target``, checked against the sample dimension."""
    name = args.target
    if name == "gaussian":
        target = gaussian_target(args.dim or dim, args.tau)
    elif name == "mixture":
        p = args.dim or dim
        rng = np.random.default_rng(_seed(args))
        target = mixture_target(random_mixture_centers(args.K, p, rng))
    elif name == "logistic":
        if not args.dataset:
            raise InvalidInputError("--target logistic requires --dataset")
        X, y = load_logistic_csv(args.dataset)
        target = logistic_target(X, y, args.prior_var)
    else:
        raise InvalidInputError(f"unknown target {name!r}")
    if target.dim != dim:
        raise InvalidInputError(f"target dimension {target.dim} does not match samples dimension {dim}")
    return target


def _seed(args):
    return getattr(args, "seed", 0)


# ---------------------------------------------------------------------------
# subcommands


def _load_config(path):
    with open(path) as fh:
        d = json.load(fh)
    if not isinstance(d, dict):
        raise InvalidInputError("config file must hold a JSON object")
    return d


def _apply_config(args, choices=None):
    """Override parsed flags in place with keys from ``--config``."""
    if not getattr(args, "config", None):
        return
    with _Stage("config"):
        for key, value in _load_config(args.config).items():
            dest = key.replace("-", "_")
            if dest in ("func", "command", "config") or not hasattr(args, dest):
                raise InvalidInputError(f"unknown config key {key!r}")
            if choices and dest in choices and value not in choices[dest]:
                raise InvalidInputError(f"invalid value {value!r} for {key!r}")
            setattr(args, dest, value)


def cmd_weights(args):
    _apply_config(args, {"method": ("med", "ksd", "kde"), "target": TARGETS + (None,),
                         "step_rule": ("fixed", "backtracking")})
    with _Stage("parse"):
        x, lg, _ = read_samples_csv(args.samples)
    target = None
    with _Stage("target"):
        if args.target:
            target = build_cli_target(args, x.shape[1])
            lg = target.log_density(x)
        elif args.method == "ksd":
            raise InvalidInputError("ksd needs a built-in --target with a score function")
        elif lg is None:
            raise InvalidInputError("samples have no logdensity column; pass --target")
        if args.method == "ksd" and target.score is None:
            raise InvalidInputError(f"target {target.name!r} has no score function")

    qp = QPConfig(max_iters=args.max_iters, tol=args.tol, step_rule=args.step_rule)
    diag = {"method": args.method, "n": int(x.shape[0]), "p": int(x.shape[1])}
    with _Stage("weights"):
        if args.method == "med":
            cfg = MedConfig(k=args.k, delta=args.delta, qp=qp, filter_enabled=not args.no_filter)
            res = med_weights(x, lg, cfg)
            w = res.weights
            d = res.diagnostics
            diag.update(
                k=d["k"], delta=d["delta"], nu=d["nu"], active_count=d["active"],
                iterations=d["iterations"], objective=d["objective"], converged=d["converged"],
                jitter=d["jitter"],
            )
        elif args.method == "ksd":
            res = ksd_weights(x, target.score, qp)
            w = res.weights
            diag.update(bandwidth=res.bandwidth, iterations=res.qp.iterations,
                        objective=res.qp.objective, converged=res.qp.converged)
        else:
            h = args.bandwidth if args.bandwidth else rot_bandwidth(x)
            w = kde_weights(x, lg, h)
            diag.update(bandwidth=h)

    out = Path(args.out or "weights.csv")
    with _Stage("write"):
        write_weights_csv(out, w)
        _dump_json(out.with_suffix(".json"), diag)
    return 0


def _experiment_config(args):
    d = {}
    for key in ("experiment", "methods", "K", "reps", "ref_size", "dataset", "n_data", "prior_var"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    for key in ("n", "p", "tau"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v if len(v) > 1 else v[0]
    if args.full_energy:
        d["full_energy"] = True
    med = {}
    if args.k is not None:
        med["k"] = args.k
    if args.delta is not None:
        med["delta"] = args.delta
    if med:
        d["med"] = med
    d["seed"] = _seed(args)
    d["threads"] = getattr(args, "threads", None) or default_threads()
    if getattr(args, "config", None):
        d.update(_load_config(args.config))
    return ExperimentConfig.from_dict(d)


def cmd_experiment(args):
    with _Stage("config"):
        cfg = _experiment_config(args)
        out = Path(args.out or "results")
        out.mkdir(parents=True, exist_ok=True)
    writer = RecordWriter(out / "results.csv", out / "timings.csv")
    try:
        with _Stage("experiment"):
            result = run_experiment(cfg, on_record=writer.write)
    finally:
        writer.close()
    with _Stage("write"):
        write_summary(out / "summary.json", result)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return 0


def cmd_eval(args):
    _apply_config(args, {"estimator": ("v", "u"), "target": TARGETS + (None,)})
    with _Stage("parse"):
        x, _, w = read_samples_csv(args.weighted)
        ref, _, _ = read_samples_csv(args.reference)
        if w is None:
            print(f"bbis: warning: {args.weighted}: no weight column; using uniform weights", file=sys.stderr)
            ws = WeightedSampleSet.uniform(x)
        else:
            ws = WeightedSampleSet(x, w)
        if ref.shape[1] != x.shape[1]:
            raise InvalidInputError(f"dimension mismatch: weighted set has {x.shape[1]}, reference has {ref.shape[1]}")
    metrics = {}
    with _Stage("eval"):
        metrics["energy_distance"] = energy_distance_simplified(ws, ref)
        if args.full:
            metrics["energy_distance_full"] = energy_distance_full(ws, ref, args.estimator, seed=_seed(args))
        if args.target:
            target = build_cli_target(args, x.shape[1])
            if target.moments is None:
                raise InvalidInputError(f"target {target.name!r} has no known moments")
            e = weighted_moment_errors(ws, target.moments)
            metrics.update(mse_mean=e.mean, mse_second=e.second, mse_sin=e.sin_sum)
    text = json.dumps(metrics, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with _Stage("write"):
            Path(args.out).write_text(text + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _float_list(s):
    return [float(v) for v in s.split(",")]


def _int_list(s):
    return [int(v) for v in s.split(",")]


def _global_options(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON file whose keys override flags")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0, help="random seed (default 0)")
    parser.add_argument("--out", default=default, help="output path (file for weights/eval, directory for experiment)")
    parser.add_argument("--threads", type=int, default=default,
                        help="worker threads for replicates (default: $BBIS_THREADS or 1)")


def _target_options(parser):
    parser.add_argument("--target", choices=TARGETS, help="built-in target for log densities, scores or moments")
    parser.add_argument("--dim", type=int, help="target dimension (defaults to the samples dimension)")
    parser.add_argument("--tau", type=float, default=0.0, help="gaussian correlation parameter")
    parser.add_argument("--K", type=int, default=20, help="mixture components (centers seeded by --seed)")
    parser.add_argument("--dataset", help="logistic regression CSV with a label column")
    parser.add_argument("--prior-var", dest="prior_var", type=float, default=0.1)


def build_parser():
    parser = argparse.ArgumentParser(prog="bbis", description="Black-box importance weights for simulated samples.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)

    pw = sub.add_parser("weights", parents=[common], help="compute weights for a samples file")
    pw.add_argument("samples", help="CSV with columns x1..xp[,logdensity]")
    pw.add_argument("--method", choices=("med", "ksd", "kde"), default="med")
    _target_options(pw)
    pw.add_argument("--k", type=float, default=1.0)
    pw.add_argument("--delta", type=float, default=0.01)
    pw.add_argument("--no-filter", action="store_true", help="disable the low-density filter")
    pw.add_argument("--max-iters", dest="max_iters", type=int, default=5000)
    pw.add_argument("--tol", type=float, default=1e-8)
    pw.add_argument("--step-rule", dest="step_rule", choices=("fixed", "backtracking"), default="fixed")
    pw.add_argument("--bandwidth", type=float, help="KDE bandwidth (default: rule of thumb)")
    pw.set_defaults(func=cmd_weights)

    pe = sub.add_parser("experiment", parents=[common], help="run a seeded comparison experiment")
    pe.add_argument("--experiment", choices=EXPERIMENTS)
    pe.add_argument("--methods", help="comma-separated subset of med,ksd,kde,baseline-mcmc,baseline-mc")
    pe.add_argument("--n", type=_int_list, help="sample size(s), comma-separated")
    pe.add_argument("--p", type=_int_list, help="dimension(s), comma-separated")
    pe.add_argument("--tau", type=_float_list, help="correlation(s), comma-separated")
    pe.add_argument("--K", type=int)
    pe.add_argument("--reps", type=int)
    pe.add_argument("--ref-size", dest="ref_size", type=int)
    pe.add_argument("--full-energy", dest="full_energy", action="store_true")
    pe.add_argument("--k", type=float)
    pe.add_argument("--delta", type=float)
    pe.add_argument("--dataset")
    pe.add_argument("--n-data", dest="n_data", type=int)
    pe.add_argument("--prior-var", dest="prior_var", type=float)
    pe.set_defaults(func=cmd_experiment)

    pv = sub.add_parser("eval", parents=[common], help="evaluate a weighted sample set")
    pv.add_argument("weighted", help="CSV with columns x1..xp[,weight]")
    pv.add_argument("reference", help="CSV with columns x1..xp")
    pv.add_argument("--full", action="store_true", help="also report the full energy distance")
    pv.add_argument("--estimator", choices=("v", "u"), default="v", help="reference pair-term estimator")
    _target_options(pv)
    pv.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    threads = getattr(args, "threads", None)
    if threads is not None and threads < 1:
        print("bbis: parse: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except StageError as err:
        code = EXIT_NUMERICAL if isinstance(err.exc, NumericalError) else EXIT_INPUT
        print(f"bbis: {err.stage}: {err}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
