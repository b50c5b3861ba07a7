"""Overfit a small synthetic set and report when training accuracy first reaches 100%."""

import argparse
import time

from brepnet import metrics
from brepnet.data import synthetic_dataset
from brepnet.training import RunConfig, evaluate, train, write_history


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--solids", type=int, default=20)
    ap.add_argument("--kernel", default="winged_edge")
    ap.add_argument("--hidden", type=int, default=16)
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--output", help="directory for train_log.jsonl and curves.svg")
    args = ap.parse_args()

    solids = synthetic_dataset(args.solids, seed=args.seed)
    cfg = RunConfig(kernel=args.kernel, hidden=args.hidden, epochs=args.epochs, seed=args.seed)
    perfect = []

    def watch(stats, model):
        acc = metrics.accuracy(evaluate(model, solids).tally)
        if acc == 1.0 and not perfect:
            perfect.append(stats.epoch)
        if stats.epoch % 25 == 0 or stats.epoch == 1:
            print(f"epoch {stats.epoch:4d} loss {stats.train_loss:.5f} acc {acc:.3f}")

    t0 = time.perf_counter()
    _, history = train(cfg, solids, on_epoch=watch)
    print(f"first 100% epoch: {perfect[0] if perfect else 'never'}")
    if len(history) >= 50:
        print(f"loss ratio epoch50/epoch1: {history[49].train_loss / history[0].train_loss:.4f}")
    print(f"wall time {time.perf_counter() - t0:.1f}s")
    if args.output:
        write_history(history, args.output)


if __name__ == "__main__":
    main()
