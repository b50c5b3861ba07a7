"""Command line entry point: ``brepnet <command> ...``.

Failures exit nonzero and print a JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import metrics
from .data import SYNTHETIC_KINDS, Batch, ReadReport, generate_synthetic, read_dataset, split, write_dataset
from .model import ArchitectureConfig, BRepNetModel, classify_faces, gradient_check, load_model, loss_and_grads
from .topology import decompose_loops
from .training import RunConfig, class_names, evaluate, train, write_history
from .walks import KERNELS, compile_walk, kernel_preset, parse_walk

log = logging.getLogger("brepnet")


class CommandError(RuntimeError):
    pass


def _load(path):
    report = ReadReport()
    records = read_dataset(path, report)
    for f, why in report.skipped:
        log.warning("skipped %s: %s", f, why.splitlines()[0])
    if not records:
        raise CommandError(f"no valid solids under {path}")
    return records, report


def _emit(obj, output_dir=None, name=None):
    text = json.dumps(obj, indent=2)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")
    print(text)


def _run_config(args) -> RunConfig:
    merged = {}
    if getattr(args, "config", None):
        merged.update(json.loads(Path(args.config).read_text()))
    for key in RunConfig.__dataclass_fields__:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return RunConfig.from_dict(merged)


def cmd_train(args):
    cfg = _run_config(args)
    if cfg.dataset is None:
        raise CommandError("train needs --dataset (or 'dataset' in the config file)")
    records, _ = _load(cfg.dataset)
    train_set, val_set, test_set = split(records, cfg.split_ratios, cfg.seed, cfg.split_file)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(asdict(cfg), indent=2) + "\n")
    (out / "split.json").write_text(
        json.dumps({k: [r.id for r in v] for k, v in zip(("train", "validation", "test"), (train_set, val_set, test_set))}, indent=1)
        + "\n"
    )
    _, history = train(cfg, train_set, val_set, output=out)
    write_history(history, out)
    summary = {
        "model": str(out / "model.brn"),
        "epochs": len(history),
        "train_solids": len(train_set),
        "validation_solids": len(val_set),
        "best_val_loss": min((h.val_loss for h in history if h.val_loss is not None), default=None),
    }
    _emit(summary)
    return 0


def _select(records, args):
    if args.split == "all":
        return records
    if args.split_file:
        parts = split(records, split_file=args.split_file)
    else:
        parts = split(records, tuple(args.ratios), args.seed)
    return dict(zip(("train", "validation", "test"), parts))[args.split]


def cmd_eval(args):
    model = load_model(args.model)
    records, _ = _load(args.dataset)
    chosen = _select(records, args)
    if not chosen:
        raise CommandError(f"split {args.split!r} is empty")
    res = evaluate(model, chosen, args.face_budget, args.threads)
    rep = metrics.report(res.tally, class_names(model.config.num_classes))
    rep["loss"] = res.loss
    rep["solids"] = len(chosen)
    _emit(rep, args.output, "eval_report.json")
    return 0


def cmd_predict(args):
    model = load_model(args.model)
    records, _ = _load(args.dataset)
    names = class_names(model.config.num_classes)
    res_preds = {}
    for batch_records in [records[i : i + 64] for i in range(0, len(records), 64)]:
        batch = Batch(batch_records)
        pred = metrics.predict(classify_faces(model, batch))
        for rid, sl in zip(batch.ids, batch.face_slices()):
            res_preds[rid] = [names[k] for k in pred[sl]]
    _emit({"predictions": res_preds}, args.output, "predictions.json")
    return 0


def _corrupted(model, batch):
    loss, grads, scores = loss_and_grads(model, batch)
    grads = [g.copy() for g in grads]
    grads[0] *= 1.01
    return loss, grads, scores


def cmd_gradcheck(args):
    config = ArchitectureConfig(kernel=args.kernel, hidden=args.hidden, num_units=args.num_units, seed=args.seed)
    model = BRepNetModel.initialize(config)
    if args.dataset:
        records, _ = _load(args.dataset)
        records = records[: args.max_solids]
    else:
        # six-sided prism: 8 faces
        records = [generate_synthetic("n_prism", {"n": 6}, seed=args.seed)]
    batch = Batch(records)
    if batch.labels is None:
        batch.labels = np.zeros(batch.num_faces, dtype=np.int64)
    result = gradient_check(model, batch, h=args.step, grad_fn=_corrupted if args.corrupt_backward else None)
    result["tolerance"] = args.tolerance
    result["passed"] = result["max_rel_error"] < args.tolerance
    result["parameters"] = model.num_parameters()
    _emit(result, args.output, "gradcheck.json")
    if not result["passed"]:
        print(json.dumps({"error": "GradientCheckFailed", "max_rel_error": result["max_rel_error"]}), file=sys.stderr)
        return 1
    return 0


def cmd_inspect(args):
    records, report = _load(args.dataset)
    if args.walk:
        parse_walk(args.walk)
    out = {"solids": [], "skipped": [f for f, _ in report.skipped]}
    for r in records:
        t = r.topology
        loops = decompose_loops(t)
        entry = {
            "id": r.id,
            "faces": t.num_faces,
            "edges": t.num_edges,
            "coedges": t.num_coedges,
            "loop_lengths": dict(sorted(Counter(len(l) for l in loops.loops).items())),
            "loops_per_face": dict(sorted(Counter(loops.loop_counts().tolist()).items())),
        }
        if args.walk:
            wm = compile_walk(t, args.walk)
            coedges = range(t.num_coedges) if args.coedge is None else [args.coedge]
            entry["walk"] = {"text": args.walk, "kind": wm.kind, "dest": {int(i): int(wm.dest[i]) for i in coedges}}
        out["solids"].append(entry)
    _emit(out, args.output, "inspect.json")
    return 0


def cmd_compile_walks(args):
    records, _ = _load(args.dataset)
    if args.walks:
        walks = args.walks
    else:
        k = kernel_preset(args.kernel)
        walks = list(k.face_walks + k.edge_walks + k.coedge_walks)
    for w in walks:
        parse_walk(w)
    out = {}
    for r in records:
        out[r.id] = {}
        for w in walks:
            wm = compile_walk(r.topology, w)
            out[r.id][w] = {"kind": wm.kind, "dest": wm.dest.tolist()}
    _emit(out, args.output, "walks.json")
    return 0


def cmd_synth(args):
    kinds = args.kind or list(SYNTHETIC_KINDS)
    records = []
    for i in range(args.count):
        kind = kinds[i % len(kinds)]
        seed = args.seed + i
        params = json.loads(args.params) if args.params else {}
        params.setdefault("id", f"{kind}-{seed}")
        records.append(generate_synthetic(kind, params, seed))
    paths = write_dataset(records, args.output)
    _emit({"written": len(paths), "directory": str(args.output)})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="brepnet", description="Topological message passing on B-rep solids")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a segmentation model")
    t.add_argument("--config", help="JSON run configuration; flags override it")
    t.add_argument("--dataset")
    t.add_argument("--kernel", choices=sorted(KERNELS))
    t.add_argument("--hidden", "-s", type=int)
    t.add_argument("--num-units", "-T", dest="num_units", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--face-budget", dest="face_budget", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--betas", type=float, nargs=2)
    t.add_argument("--seed", type=int)
    t.add_argument("--output", "-o")
    t.add_argument("--split-file", dest="split_file")
    t.add_argument("--threads", type=int)
    t.set_defaults(func=cmd_train)

    def split_args(q):
        q.add_argument("--split", choices=["train", "validation", "test", "all"], default="test")
        q.add_argument("--split-file")
        q.add_argument("--ratios", type=float, nargs=3, default=[0.7, 0.15, 0.15])
        q.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("eval", help="accuracy and part IoU of a trained model")
    e.add_argument("--model", required=True)
    e.add_argument("--dataset", required=True)
    split_args(e)
    e.add_argument("--face-budget", type=int, default=1000)
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--output", "-o")
    e.set_defaults(func=cmd_eval)

    pr = sub.add_parser("predict", help="per-face labels for every solid")
    pr.add_argument("--model", required=True)
    pr.add_argument("--dataset", required=True)
    pr.add_argument("--output", "-o")
    pr.set_defaults(func=cmd_predict)

    g = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    g.add_argument("--kernel", choices=sorted(KERNELS), default="winged_edge")
    g.add_argument("--hidden", "-s", type=int, default=4)
    g.add_argument("--num-units", "-T", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--dataset")
    g.add_argument("--max-solids", type=int, default=2)
    g.add_argument("--step", type=float, default=1e-6)
    g.add_argument("--tolerance", type=float, default=1e-5)
    g.add_argument("--corrupt-backward", action="store_true", help=argparse.SUPPRESS)
    g.add_argument("--output", "-o")
    g.set_defaults(func=cmd_gradcheck)

    i = sub.add_parser("inspect", help="topology summary and walk destinations")
    i.add_argument("dataset")
    i.add_argument("--walk")
    i.add_argument("--coedge", type=int)
    i.add_argument("--output", "-o")
    i.set_defaults(func=cmd_inspect)

    c = sub.add_parser("compile-walks", help="destination arrays of walks on each solid")
    c.add_argument("dataset")
    c.add_argument("--kernel", choices=sorted(KERNELS), default="winged_edge")
    c.add_argument("--walks", nargs="+")
    c.add_argument("--output", "-o")
    c.set_defaults(func=cmd_compile_walks)

    s = sub.add_parser("synth", help="write synthetic labelled solids")
    s.add_argument("--kind", choices=SYNTHETIC_KINDS, action="append")
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--params", help="JSON object of generator parameters")
    s.add_argument("--output", "-o", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        record = {"error": type(exc).__name__, "message": str(exc)}
        if hasattr(exc, "position"):
            record["column"] = exc.position
        print(json.dumps(record), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
