#!/usr/bin/env python3
"""Transport a cold centered bunch under its own fields and print how the
beam radius evolves (the zeroth-order self-field defocuses it).

Usage: python scripts/run_pic_demo.py [--steps 20] [--n 2000]
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from parax.hierarchy import ExternalField  # noqa: E402
from parax.mesh import build_mesh  # noqa: E402
from parax.pic import run_pic, sample_initial_distribution  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--beta", type=float, default=0.5)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--order", type=int, default=1)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    mesh = build_mesh(2.0, 2.0, 2.0, 33, 33, 17, x0=-1.0, y0=-1.0)
    particles = sample_initial_distribution(
        mesh, "cold", args.n, seed=args.seed, radius=0.25, center=(0.0, 0.0),
        zeta_width=0.8, total_weight=5.0,
    )

    def on_step(step, parts, hierarchy, record):
        r = float(np.hypot(parts.x, parts.y).mean()) if len(parts) else float("nan")
        cc = record.charge_conservation
        cc_txt = f" dQ-balance {cc['l2']:.2e}" if cc else ""
        print(f"step {step:3d}: {len(parts):5d} particles  <r> = {r:.4f}"
              f"  absorbed {record.absorbed_total}{cc_txt}")

    run_pic(mesh, args.beta, args.eta, particles, n_max=args.order,
            dt=0.05, steps=args.steps, external=ExternalField(bz=0.0),
            on_step=on_step)
    return 0


if __name__ == "__main__":
    sys.exit(main())
