#!/usr/bin/env python3
"""Horizon sweep on a problem file (or the built-in instance).

Emits the per-step distance CSVs, the counter/bound table, and the
stationary reference used by the plotting frontend.
"""

import argparse
import sys

from stochturnpike.cli import ExperimentConfig, cmd_stationary, cmd_sweep, cmd_paths


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--problem", default=None, help="problem JSON (omit for built-in)")
    parser.add_argument("--out", default="out")
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--samples", type=int, default=10_000)
    parser.add_argument("--horizons", type=int, nargs="+",
                        default=[20, 30, 40, 50, 60, 70, 80])
    parser.add_argument("--noise", choices=("gaussian", "uniform"), default="gaussian")
    parser.add_argument("--paths", action="store_true", help="also emit fixed-noise paths")
    args = parser.parse_args()
    config = ExperimentConfig(
        problem=args.problem,
        horizons=tuple(sorted(args.horizons)),
        mc_samples=args.samples,
        seed=args.seed,
        output_dir=args.out,
        noise=args.noise,
    )
    cmd_stationary(config)
    cmd_sweep(config)
    if args.paths:
        cmd_paths(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
