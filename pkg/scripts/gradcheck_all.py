"""Finite-difference gradient check of every kernel preset on a small synthetic batch."""

import argparse
import time

from brepnet.data import Batch, generate_synthetic
from brepnet.model import ArchitectureConfig, BRepNetModel, gradient_check
from brepnet.walks import KERNELS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--hidden", type=int, default=4)
    ap.add_argument("-T", "--num-units", type=int, default=2)
    ap.add_argument("--step", type=float, default=1e-6)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    batch = Batch([generate_synthetic("n_prism", {"n": 6}, seed=1), generate_synthetic("box_with_hole", seed=3)])
    worst = 0.0
    for name in KERNELS:
        t0 = time.perf_counter()
        model = BRepNetModel.initialize(
            ArchitectureConfig(kernel=name, hidden=args.hidden, num_units=args.num_units, seed=args.seed)
        )
        err = gradient_check(model, batch, h=args.step)["max_rel_error"]
        worst = max(worst, err)
        print(f"{name:24s} rel err {err:.2e}  ({time.perf_counter() - t0:.1f}s)")
    print(f"worst {worst:.2e}")


if __name__ == "__main__":
    main()
