"""Command line entry point.

Subcommands: ``estimate``, ``sweep``, ``constants``, ``tail-check`` and
``compare-phd``. Exit status is 0 on success, 2 for bad input or
configuration and 3 for numerical failures.
"""

import argparse
import json
import sys

import numpy as np

from .errors import ConfigError, InputError, NumericalError
from .estimator import (
    MomentSpec,
    SampleSet,
    estimate_moments,
    linear_estimate,
    rank_r_truncate,
    sparse_truncate,
    whiten,
)
from .harness import emit, load_config, run_experiment
from .io import read_matrix_csv, read_vector_csv, write_matrix_csv
from .metrics import link_constants_mc
from .synthetic import LINK_KINDS, LinkModel, check_light_tail

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _load_moments(path):
    try:
        raw = json.loads(open(path).read())
        return MomentSpec(**{k: np.asarray(raw[k], dtype=float) for k in ("mean1", "mean2", "cov1", "cov2")})
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read moments from {path}: {exc}") from exc


def _parse_grid(text):
    """``"0,0.5,1"`` or ``"start:stop:num"`` (inclusive, evenly spaced)."""
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            return np.linspace(float(start), float(stop), int(num))
        return np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError as exc:
        raise InputError(f"cannot parse grid {text!r}: {exc}") from exc


def _print_json(obj):
    print(json.dumps(obj, indent=2))


def cmd_estimate(args):
    samples = SampleSet(read_matrix_csv(args.a), read_matrix_csv(args.b), read_vector_csv(args.y))
    if args.whiten == "given":
        if not args.moments:
            raise InputError("--whiten given needs --moments")
        samples = whiten(samples, _load_moments(args.moments))
    elif args.whiten == "sample":
        samples = whiten(samples, estimate_moments(samples))
    x_lin = linear_estimate(samples).x_lin
    if (args.s1 is None) != (args.s2 is None):
        raise InputError("--s1 and --s2 must be given together")
    if args.s1 is None:
        est = rank_r_truncate(x_lin, args.r)
    else:
        est = sparse_truncate(x_lin, args.s1, args.s2, args.r)
    out = {
        "m": samples.m,
        "n1": samples.n1,
        "n2": samples.n2,
        "r": args.r,
        "whiten": args.whiten,
        "sigma_hat": est.sigma_hat.tolist(),
    }
    if est.support_rows is not None:
        out["support_rows"] = [int(i) for i in est.support_rows]
        out["support_cols"] = [int(i) for i in est.support_cols]
    if args.out:
        write_matrix_csv(f"{args.out}_u.csv", est.u_hat)
        write_matrix_csv(f"{args.out}_v.csv", est.v_hat)
        out["files"] = [f"{args.out}_u.csv", f"{args.out}_v.csv"]
    else:
        out["u_hat"] = est.u_hat.tolist()
        out["v_hat"] = est.v_hat.tolist()
    _print_json(out)


def _run_and_emit(args, config):
    result = run_experiment(config, threads=args.threads)
    if args.out:
        emit(result, args.out, args.format)
    summary = {
        "family": result.family,
        "grid_param": result.grid_param,
        "grid_values": result.grid_values,
        "partial": result.partial,
        "errors": result.errors,
        "series": {},
    }
    for name in result.series:
        fit = result.slopes.get(name)
        summary["series"][name] = {
            "mean_nsee": [float(v) for v in result.mean_nsee(name)],
            "slope": None if fit is None else fit.slope,
            "r2": None if fit is None else fit.r2,
        }
    _print_json(summary)
    return EXIT_NUMERICAL if result.partial else EXIT_OK


def cmd_sweep(args):
    return _run_and_emit(args, load_config(args.config))


def cmd_compare_phd(args):
    config = load_config(args.config)
    if config.family != "phd_compare":
        raise ConfigError(f"compare-phd needs a phd_compare config, got family {config.family!r}")
    return _run_and_emit(args, config)


def cmd_constants(args):
    link = LinkModel(args.link, args.r, sigma_z=args.sigma_z, epsilon=args.epsilon)
    consts = link_constants_mc(link, args.r, args.nmc, seed=args.seed)
    _print_json({"link": link.to_dict(), "seed": args.seed, **consts.to_dict()})


def cmd_tail_check(args):
    report = check_light_tail(read_vector_csv(args.y), _parse_grid(args.grid))
    _print_json({k: (v.item() if isinstance(v, np.generic) else v) for k, v in vars(report).items()})


def build_parser():
    parser = argparse.ArgumentParser(prog="jointdr", description="Joint dimensionality reduction tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate embeddings from CSV samples")
    p.add_argument("--a", required=True, help="m x n1 CSV of first features")
    p.add_argument("--b", required=True, help="m x n2 CSV of second features")
    p.add_argument("--y", required=True, help="CSV of m responses")
    p.add_argument("--r", required=True, type=int)
    p.add_argument("--s1", type=int)
    p.add_argument("--s2", type=int)
    p.add_argument("--whiten", choices=("none", "given", "sample"), default="none")
    p.add_argument("--moments", help="JSON with mean1, mean2, cov1, cov2 for --whiten given")
    p.add_argument("--out", help="write <out>_u.csv and <out>_v.csv instead of inlining them")
    p.set_defaults(func=cmd_estimate)

    for name, func, text in (
        ("sweep", cmd_sweep, "run a scaling experiment"),
        ("compare-phd", cmd_compare_phd, "run our estimator and pHd on shared samples"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", help="output file")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--threads", type=int, help="worker threads (capped by JOINTDR_THREADS)")
        p.set_defaults(func=func)

    p = sub.add_parser("constants", help="Monte Carlo link constants")
    p.add_argument("--link", required=True, choices=LINK_KINDS)
    p.add_argument("--r", required=True, type=int)
    p.add_argument("--nmc", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma-z", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("tail-check", help="light-tail diagnostic of responses")
    p.add_argument("--y", required=True, help="CSV of responses")
    p.add_argument("--grid", required=True, help="thresholds: 'a,b,c' or 'start:stop:num'")
    p.set_defaults(func=cmd_tail_check)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        code = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
