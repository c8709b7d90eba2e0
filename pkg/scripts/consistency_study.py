#!/usr/bin/env python3
"""RMSE of each estimator versus sample size, against the CLT rate for x0.

    python scripts/consistency_study.py --replications 200 --sizes 100,1000,10000 --workers 4
"""

import argparse
import math

from ouest.experiments import REFERENCE_PARAMS, REFERENCE_TIME, ExperimentConfig, run_consistency
from ouest.gauss_sim import GaussianDriver
from ouest.ou_model import transition_variance


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,1000,10000")
    ap.add_argument("--replications", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--sampler", choices=("exact", "fourier"), default="exact")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = ExperimentConfig(
        sample_sizes=tuple(int(s) for s in args.sizes.split(",")),
        replications=args.replications,
        driver=GaussianDriver.prng(args.seed),
        sampler=args.sampler,
    )
    report = run_consistency(cfg, workers=args.workers)
    var = transition_variance(REFERENCE_PARAMS, REFERENCE_TIME)
    growth = math.exp(REFERENCE_PARAMS.theta * REFERENCE_TIME)
    print(f"config {report.config_hash}")
    print(f"{'estimator':>9} {'n':>7} {'rmse':>10} {'mae':>10} {'fail':>5} {'x0 CLT':>10}")
    for row in report.rows:
        clt = growth * math.sqrt(var / row.n) if row.estimator == "x0" else float("nan")
        print(f"{row.estimator:>9} {row.n:>7} {row.rmse:>10.5f} {row.mean_abs_error:>10.5f} "
              f"{row.failures:>5} {clt:>10.5f}")


if __name__ == "__main__":
    main()
