"""Train every kernel preset on one synthetic dataset and compare held-out IoU.

Widths follow the parameter-matched table in param_table.py unless --hidden is given.
"""

import argparse
import json

from brepnet import metrics
from brepnet.data import split, synthetic_dataset
from brepnet.training import RunConfig, evaluate, train
from brepnet.walks import KERNELS

from param_table import WIDTHS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--solids", type=int, default=200)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--hidden", type=int)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    args = ap.parse_args()
    rows = []
    for seed in args.seeds:
        tr, va, te = split(synthetic_dataset(args.solids, seed=seed), seed=seed)
        for name in KERNELS:
            cfg = RunConfig(kernel=name, hidden=args.hidden or WIDTHS[name], epochs=args.epochs, seed=seed)
            model, _ = train(cfg, tr, va)
            res = evaluate(model, te)
            row = {"kernel": name, "seed": seed, "accuracy": metrics.accuracy(res.tally), "iou": metrics.iou(res.tally)[1]}
            rows.append(row)
            print(json.dumps(row))


if __name__ == "__main__":
    main()
