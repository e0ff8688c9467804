"""Command-line front end.

Subcommands: classify, simulate, check {stationary|height|lifetime|
growth|pure-birth}, multiclass, schemes {ite|ite1|rec|ld}.  Every run
prints a JSON summary with keys verdict/metrics/comparisons/meta (and
writes it to --out-json when given).  Exit codes: 0 success, 1 config
error, 2 numeric failure, 3 statistical-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, DomainError, RandTreeError
from .harness import ExperimentConfig, run
from .multiclass import RateMatrices

_CHECK_KINDS = {
    "stationary": "stationary_check",
    "height": "height_check",
    "lifetime": "lifetime_check",
    "growth": "growth_check",
    "pure-birth": "pure_birth_check",
}


def _add_rate_args(p: argparse.ArgumentParser, need_mu: bool = True) -> None:
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="birth rate per vertex")
    p.add_argument("--mu", type=float, required=need_mu, default=None, help="death rate per leaf")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t-max", type=float, default=100.0)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-vertices", type=int, default=10_000_000)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--out-json", default=None, help="JSON summary path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randtree", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="regime verdict and the associated roots")
    _add_rate_args(p)
    p.add_argument("--out-json", default=None)

    p = sub.add_parser("simulate", help="sampled trajectories to CSV")
    _add_rate_args(p)
    _add_run_args(p)
    p.add_argument("--samples", type=int, default=200, help="sample times per trajectory")

    p = sub.add_parser("check", help="theory-vs-simulation checks")
    p.add_argument("what", choices=sorted(_CHECK_KINDS))
    _add_rate_args(p)
    _add_run_args(p)
    p.add_argument("--burn-in", type=float, default=None)
    p.add_argument("--t-cap", type=float, default=50.0)
    p.add_argument("--lifetime-samples", type=int, default=100_000)
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.add_argument("--grid-horizon", type=float, default=50.0)

    p = sub.add_parser("multiclass", help="multiclass classification and checks")
    p.add_argument("--rates", required=True, help="JSON file with classes/lambda/mu")
    _add_run_args(p)
    p.add_argument("--burn-in", type=float, default=None)

    p = sub.add_parser("schemes", help="dump an iterative scheme to CSV")
    p.add_argument("scheme", choices=["ite", "ite1", "rec", "ld"])
    _add_rate_args(p)
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.add_argument("--grid-horizon", type=float, default=50.0)
    p.add_argument("--out", default=None)
    p.add_argument("--out-json", default=None)
    return ap


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    common = dict(
        seed=getattr(args, "seed", 0),
        replicas=getattr(args, "replicas", 1),
        t_max=getattr(args, "t_max", 100.0),
        max_vertices=getattr(args, "max_vertices", 10_000_000),
        workers=getattr(args, "workers", 4),
        out=getattr(args, "out", None),
    )
    if args.command == "classify":
        return ExperimentConfig(kind="classify", lam=args.lam, mu=args.mu)
    if args.command == "simulate":
        return ExperimentConfig(
            kind="simulate", lam=args.lam, mu=args.mu,
            n_sample_times=args.samples, **common,
        )
    if args.command == "check":
        kind = _CHECK_KINDS[args.what]
        return ExperimentConfig(
            kind=kind, lam=args.lam, mu=args.mu,
            burn_in=args.burn_in, t_cap=args.t_cap,
            n_lifetime_samples=args.lifetime_samples,
            grid_step=args.grid_step, grid_horizon=args.grid_horizon,
            **common,
        )
    if args.command == "multiclass":
        rates = RateMatrices.from_json(args.rates)
        return ExperimentConfig(
            kind="multiclass_check", rates=rates, burn_in=args.burn_in, **common
        )
    if args.command == "schemes":
        return ExperimentConfig(
            kind="schemes_dump", scheme=args.scheme, lam=args.lam, mu=args.mu,
            grid_step=args.grid_step, grid_horizon=args.grid_horizon,
            out=getattr(args, "out", None),
        )
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
    except (ConfigError, DomainError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        result = run(config)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RandTreeError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    doc = result.to_json_dict()
    print(json.dumps(doc, indent=2, sort_keys=True))
    out_json = getattr(args, "out_json", None)
    if out_json:
        result.write_json(out_json)
    if result.verdict == "fail":
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
