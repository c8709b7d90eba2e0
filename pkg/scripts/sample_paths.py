#!/usr/bin/env python3
"""Write plot-ready CSV of a few OU paths (path_id,t,x) on a fine grid."""

import argparse
import sys

import numpy as np

from ouest.gauss_sim import GaussianDriver, TrajectoryGrid, simulate_paths
from ouest.ou_model import OuParams

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--paths", type=int, default=2)
ap.add_argument("--horizon", type=float, default=5.0)
ap.add_argument("--steps", type=int, default=500)
ap.add_argument("--seed", type=int, default=1)
args = ap.parse_args()

p = OuParams(theta=0.5, mu=-3.0, sigma=1.0, x0=3.0)
grid = TrajectoryGrid(tuple(np.linspace(0.0, args.horizon, args.steps + 1)))
x = simulate_paths(p, grid, args.paths, GaussianDriver.prng(args.seed))
out = sys.stdout
out.write("path_id,t,x\n")
for i, row in enumerate(x, start=1):
    for t, v in zip(grid.times, row):
        out.write(f"{i},{t!r},{float(v)!r}\n")
