"""Exit criteria. Each test prints one PASS/FAIL line with its measured value."""

import time

import numpy as np
import pytest

from brepnet import metrics
from brepnet.data import SYNTHETIC_KINDS, Batch, generate_synthetic, synthetic_dataset
from brepnet.features import fit_scaler
from brepnet.model import ArchitectureConfig, BRepNetModel, classify_faces, forward, gradient_check, parameter_count
from brepnet.topology import decompose_loops
from brepnet.training import RunConfig, evaluate, train
from brepnet.walks import KERNELS, compile_walk
from oracles import confusion_recount, random_walks


@pytest.fixture
def verdict(capsys):
    def emit(number, name, passed, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if passed else 'FAIL'} {name}: {detail}")
        assert passed, detail

    return emit


FIGURE_TABLE = {
    "simple_edge": (120, 359),
    "asymmetric": (120, 359),
    "asymmetric_plus": (113, 358),
    "asymmetric_plus_plus": (107, 359),
    "winged_edge": (84, 359),
    "winged_edge_plus": (75, 357),
    "winged_edge_plus_plus": (63, 358),
}


def test_1_parameter_counts(verdict):
    t0 = time.perf_counter()
    counts = {k: parameter_count(ArchitectureConfig(kernel=k, hidden=s)) for k, (s, _) in FIGURE_TABLE.items()}
    rounded_ok = all(round(counts[k] / 1000) == thousands for k, (_, thousands) in FIGURE_TABLE.items())
    exact = counts["winged_edge"] == 359_100
    elapsed = time.perf_counter() - t0
    verdict(1, "parameter counts", exact and rounded_ok and elapsed < 1.0, f"{counts} in {elapsed:.3f}s")


def _pointer_oracle(topo):
    n = topo.num_coedges
    nxt = [int(x) for x in topo.coedge_next]
    prev = [None] * n
    for i in range(n):
        prev[i] = next(j for j in range(n) if nxt[j] == i)
    mate = [int(x) for x in topo.coedge_mate]
    edge = [int(x) for x in topo.coedge_edge]
    face = [int(x) for x in topo.coedge_face]

    def walk(w, i):
        if w == "I":
            return i
        for ch in w:
            if ch == "N":
                i = nxt[i]
            elif ch == "P":
                i = prev[i]
            elif ch == "M":
                i = mate[i]
            elif ch == "E":
                return edge[i]
            else:
                return face[i]
        return i

    return walk


def test_2_walk_compiler_oracle(verdict):
    rng = np.random.default_rng(2024)
    mismatches, checked = 0, 0
    for s in range(100):
        topo = generate_synthetic(SYNTHETIC_KINDS[s % 4], seed=10_000 + s).topology
        walk = _pointer_oracle(topo)
        for w in random_walks(rng, 100):
            dest = compile_walk(topo, w).dest
            mismatches += sum(int(dest[i]) != walk(w, i) for i in range(topo.num_coedges))
            checked += 1
        ident = np.arange(topo.num_coedges)
        for w in ("NP", "PN", "MM"):
            mismatches += int(not np.array_equal(compile_walk(topo, w).dest, ident))
    verdict(2, "walk compiler oracle", mismatches == 0, f"{checked} walks on 100 solids, {mismatches} mismatches")


def test_3_gradient_verification(verdict):
    batch = Batch([generate_synthetic("n_prism", {"n": 6}, seed=1), generate_synthetic("box_with_hole", seed=3)])
    t0 = time.perf_counter()
    errors = {}
    for name in KERNELS:
        model = BRepNetModel.initialize(ArchitectureConfig(kernel=name, hidden=4, num_units=2, seed=7))
        errors[name] = gradient_check(model, batch, h=1e-6)["max_rel_error"]
    elapsed = time.perf_counter() - t0
    worst = max(errors.values())
    verdict(3, "gradient check", worst < 1e-5 and elapsed < 120, f"max rel err {worst:.2e} in {elapsed:.1f}s")


def test_4_batching_equivalence(verdict):
    rng = np.random.default_rng(4)
    model = BRepNetModel.initialize(ArchitectureConfig(kernel="winged_edge", hidden=8, num_units=2, seed=4))
    worst = 0.0
    for b in range(50):
        k = int(rng.integers(2, 7))
        solids = [generate_synthetic(SYNTHETIC_KINDS[rng.integers(4)], seed=int(rng.integers(1e6))) for _ in range(k)]
        batched = classify_faces(model, Batch(solids))
        single = np.concatenate([classify_faces(model, Batch([s])) for s in solids])
        worst = max(worst, float(np.abs(batched - single).max()))
    verdict(4, "batching equivalence", worst <= 1e-10, f"max |diff| {worst:.1e} over 50 batches")


def _next_mate_closure(t, start):
    reach, frontier = set(), [start]
    while frontier:
        i = frontier.pop()
        if i not in reach:
            reach.add(i)
            frontier += [int(t.coedge_next[i]), int(t.coedge_mate[i])]
    return reach


def _outer_change(pooling):
    rec = generate_synthetic("box_with_hole", {"hole_sides": 4, "round_hole": False}, seed=0)
    t = rec.topology
    model = BRepNetModel.initialize(ArchitectureConfig(hidden=16, num_units=2, pooling=pooling, seed=1))
    b = Batch([rec])
    ck = b.compiled(model.kernel)
    loops = decompose_loops(t)
    face = int(np.flatnonzero(loops.loop_counts() == 2)[0])
    first, second = loops.loops_of_face(face)
    # the hole walls and inner loops are closed under next/mate steps
    reach = _next_mate_closure(t, second[0])
    if first[0] in reach:
        first, second = second, first
        reach = _next_mate_closure(t, second[0])
    assert not reach.intersection(first)
    _, base = forward(model, ck, b.Xf, b.Xe, b.Xc, keep_cache=True)
    Xc = b.Xc.copy()
    Xc[second[0]] += 5.0
    _, moved = forward(model, ck, b.Xf, b.Xe, Xc, keep_cache=True)
    outer = np.array(first)
    return float(np.abs(moved["states"][2][2][outer] - base["states"][2][2][outer]).max())


def test_5_multi_loop_information_flow(verdict):
    with_pool, without = _outer_change(True), _outer_change(False)
    verdict(
        5, "multi-loop flow", with_pool > 0 and without == 0,
        f"outer-loop change after 2 units: pooled {with_pool:.3e}, no pooling {without:.1e}",
    )


def test_6_desk_scale_learning(verdict):
    solids = synthetic_dataset(20, seed=0)
    first_perfect = []

    def watch(stats, model):
        if not first_perfect and metrics.accuracy(evaluate(model, solids).tally) == 1.0:
            first_perfect.append(stats.epoch)

    t0 = time.perf_counter()
    _, hist = train(RunConfig(kernel="winged_edge", hidden=16, epochs=300, seed=0), solids, on_epoch=watch)
    elapsed = time.perf_counter() - t0
    ratio = hist[49].train_loss / hist[0].train_loss
    ok = bool(first_perfect) and ratio < 0.1 and elapsed < 300
    verdict(
        6, "desk-scale learning", ok,
        f"100% at epoch {first_perfect[0] if first_perfect else None}, loss50/loss1 {ratio:.3f}, {elapsed:.1f}s",
    )


def test_7_metric_oracle(verdict):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        u = int(rng.integers(2, 9))
        n = int(rng.integers(1, 60))
        labels = rng.integers(0, u, n)
        logits = rng.normal(size=(n, u))
        tally = metrics.accumulate(metrics.ConfusionTally(u), logits, labels)
        predicted = [int(np.argmax(row)) for row in logits]
        acc, ious, mean = confusion_recount(predicted, labels.tolist(), u)
        per_class, m = metrics.iou(tally)
        worst = max(worst, abs(metrics.accuracy(tally) - acc), abs(m - mean))
        for a, b in zip(per_class, ious):
            worst = max(worst, 0.0 if (b is None and np.isnan(a)) else abs(a - b))
    half = metrics.accumulate_predictions(metrics.ConfusionTally(2), [0, 0, 0, 0, 1, 1], [0, 0, 0, 1, 0, 0])
    exact = metrics.iou(half)[0][0] == 0.5
    verdict(7, "metric oracle", worst < 1e-12 and exact, f"max deviation {worst:.1e}; TP3/FP1/FN2 IoU = 0.5: {exact}")


def test_8_standardization(verdict):
    records = synthetic_dataset(40, seed=8)
    train_set, val_set = records[:30], records[30:]
    scaler = fit_scaler(*zip(*(r.features() for r in train_set)))
    worst = 0.0
    uses_train = True
    for k, std in enumerate((scaler.face, scaler.edge, scaler.coedge)):
        X = np.concatenate([r.features()[k] for r in train_set])
        out = std.apply(X)[:, std.active]
        worst = max(worst, np.abs(out.mean(axis=0)).max(initial=0), np.abs(out.std(axis=0) - 1).max(initial=0))
        V = np.concatenate([r.features()[k] for r in val_set])
        on = std.active
        expected = (V[:, on] - X[:, on].mean(axis=0)) / X[:, on].std(axis=0)
        uses_train &= np.allclose(std.apply(V)[:, on], expected, rtol=0, atol=1e-12)
    verdict(8, "standardization", worst < 1e-9 and uses_train, f"max moment error {worst:.1e}; validation uses train stats: {uses_train}")


@pytest.mark.skip(reason="needs the external published dataset and multi-hour CPU training; not a gate")
def test_9_full_dataset_reproduction():
    pass
