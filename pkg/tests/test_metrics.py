import numpy as np
import pytest
from hypothesis import given, strategies as st

from brepnet.metrics import ConfusionTally, accumulate, accumulate_predictions, accuracy, iou, report
from oracles import confusion_recount


def _onehot(pred, u):
    z = np.zeros((len(pred), u))
    z[np.arange(len(pred)), pred] = 1.0
    return z


def test_perfect_predictions_fill_diagonal():
    labels = np.array([0, 1, 2, 2, 1])
    t = accumulate(ConfusionTally(3), _onehot(labels, 3), labels)
    assert np.array_equal(t.counts, np.diag(np.bincount(labels, minlength=3)))
    assert accuracy(t) == 1.0 and iou(t)[1] == 1.0


def test_five_of_six():
    labels = np.array([0, 0, 1, 1, 2, 2])
    pred = np.array([0, 0, 1, 1, 2, 0])
    t = accumulate(ConfusionTally(8), _onehot(pred, 8), labels)
    assert accuracy(t) == 5 / 6


def test_tally_additivity():
    rng = np.random.default_rng(0)
    a_l, b_l = rng.integers(0, 4, 10), rng.integers(0, 4, 7)
    a_p, b_p = rng.normal(size=(10, 4)), rng.normal(size=(7, 4))
    split = accumulate(accumulate(ConfusionTally(4), a_p, a_l), b_p, b_l)
    joint = accumulate(ConfusionTally(4), np.vstack([a_p, b_p]), np.concatenate([a_l, b_l]))
    assert np.array_equal(split.counts, joint.counts)
    merged = accumulate(ConfusionTally(4), a_p, a_l) + accumulate(ConfusionTally(4), b_p, b_l)
    assert np.array_equal(merged.counts, joint.counts)


def test_iou_half():
    # class 0: TP=3, FP=1, FN=2
    pred = [0, 0, 0, 0, 1, 1]
    labels = [0, 0, 0, 1, 0, 0]
    t = accumulate_predictions(ConfusionTally(2), pred, labels)
    assert iou(t)[0][0] == 0.5


def test_ties_pick_lowest_class():
    t = accumulate(ConfusionTally(3), np.array([[1.0, 1.0, 0.0]]), [1])
    assert t.counts[1, 0] == 1


def test_absent_class_excluded():
    t = accumulate_predictions(ConfusionTally(8), [0, 1], [0, 1])
    per_class, mean = iou(t)
    assert np.isnan(per_class[5]) and mean == 1.0
    rep = report(t)
    assert rep["per_class_iou"]["5"] is None and len(rep["per_class_iou"]) == 8


def test_errors():
    with pytest.raises(ValueError):
        accuracy(ConfusionTally(3))
    with pytest.raises(ValueError):
        accumulate(ConfusionTally(3), np.zeros((1, 3)), [3])


def test_hand_built_three_class():
    labels = [0, 0, 1, 1, 1, 2, 2, 2, 2]
    pred = [0, 1, 1, 1, 2, 2, 2, 0, 2]
    t = accumulate_predictions(ConfusionTally(3), pred, labels)
    acc, ious, mean = confusion_recount(pred, labels, 3)
    assert accuracy(t) == acc
    assert np.allclose(iou(t)[0], ious) and iou(t)[1] == pytest.approx(mean, abs=1e-15)


@given(st.integers(1, 8), st.integers(2, 8), st.integers(0, 2**31))
def test_order_invariance(n_solids, u, seed):
    rng = np.random.default_rng(seed)
    solids = [(rng.normal(size=(k, u)), rng.integers(0, u, k)) for k in rng.integers(1, 20, n_solids)]
    fwd = ConfusionTally(u)
    for s, l in solids:
        accumulate(fwd, s, l)
    rev = ConfusionTally(u)
    for s, l in solids[::-1]:
        accumulate(rev, s, l)
    assert np.array_equal(fwd.counts, rev.counts)
    assert accuracy(fwd) == np.trace(fwd.counts) / fwd.total
    assert np.all((iou(fwd)[0][~np.isnan(iou(fwd)[0])] >= 0) & (iou(fwd)[0][~np.isnan(iou(fwd)[0])] <= 1))
