#!/usr/bin/env python3
"""Run the full built-in reference study and print the check summary.

Equivalent to ``stochturnpike reproduce-paper``; kept as a script so the
study can be launched (and tweaked) without the console entry point.
"""

import argparse
import sys

from stochturnpike.cli import cmd_reproduce_paper


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--samples", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=1234)
    args = parser.parse_args()
    return cmd_reproduce_paper(args.out, args.samples, args.seed)


if __name__ == "__main__":
    sys.exit(main())
