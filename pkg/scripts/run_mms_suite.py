#!/usr/bin/env python3
"""Run the manufactured-solution convergence suite for all five solvers and
print the fitted orders.

Usage: python scripts/run_mms_suite.py [--out out/mms]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from parax.cli import MMS_TARGETS  # noqa: E402
from parax.config import RunConfig  # noqa: E402
from parax.cli import run_command  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/mms")
    args = ap.parse_args()

    status = 0
    for target in MMS_TARGETS:
        cfg = RunConfig()
        cfg.study.target = target
        cfg.study.grids = "17,33,65"
        code = run_command("mms", cfg, out_dir=os.path.join(args.out, target))
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
