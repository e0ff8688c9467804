#!/usr/bin/env python3
"""Long-run stationary sweep: compare occupation-time laws against the
closed forms over a range of subcritical intensities and write one JSON
summary per rho value."""

import argparse
import json
import pathlib

from randtree.harness import ExperimentConfig, run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rhos", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3])
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--t-max", type=float, default=200_000.0)
    ap.add_argument("--replicas", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default="results/stationary")
    args = ap.parse_args()

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for rho in args.rhos:
        cfg = ExperimentConfig(
            kind="stationary_check",
            lam=rho * args.mu,
            mu=args.mu,
            replicas=args.replicas,
            seed=args.seed,
            t_max=args.t_max,
            max_vertices=100_000,
        )
        res = run(cfg)
        path = out_dir / f"rho_{rho:g}.json"
        res.write_json(path)
        tv = res.distributions["tv_N"]
        print(f"rho={rho:g}: {res.verdict}  tv_N={tv:.5f}  -> {path}")
        print(json.dumps(res.to_json_dict()["comparisons"], indent=2))


if __name__ == "__main__":
    main()
