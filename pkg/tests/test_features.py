import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from brepnet.features import (
    CONVEXITIES,
    CURVE_TYPES,
    SURFACE_TYPES,
    CoedgeAttributes,
    EdgeAttributes,
    FaceAttributes,
    encode_coedges,
    encode_edges,
    encode_faces,
    fit_scaler,
    fit_standardizer,
)
from brepnet.walks import kernel_preset


@pytest.mark.parametrize(
    "surface, area, row",
    [
        ("plane", 1.5, [1, 0, 0, 0, 0, 0, 1.5]),
        ("nonrational_bspline", 2.0, [0, 0, 0, 0, 0, 0, 2.0]),
        ("rational_bspline", 0.0, [0, 0, 0, 0, 0, 1, 0]),
        ("torus", 3.0, [0, 0, 0, 0, 1, 0, 3.0]),
    ],
)
def test_encode_faces(surface, area, row):
    assert encode_faces([FaceAttributes(surface, area)]).tolist() == [row]


@pytest.mark.parametrize(
    "attrs, row",
    [
        (("line", "convex", False, 2.0), [1, 0, 0, 0, 0, 0, 1, 0, 0, 2.0]),
        (("circle", "smooth", True, 6.283), [0, 1, 0, 0, 0, 0, 0, 1, 1, 6.283]),
        (("intersection_curve", "concave", False, 0.1), [0, 0, 0, 0, 1, 1, 0, 0, 0, 0.1]),
    ],
)
def test_encode_edges(attrs, row):
    assert encode_edges([EdgeAttributes(*attrs)]).tolist() == [row]


def test_encode_coedges():
    X = encode_coedges([CoedgeAttributes(True), CoedgeAttributes(False), CoedgeAttributes(True)])
    assert X.tolist() == [[1.0], [0.0], [1.0]]


def test_bad_attributes_rejected():
    with pytest.raises(ValueError):
        FaceAttributes("nurbs", 1.0)
    with pytest.raises(ValueError):
        EdgeAttributes("line", "flat", False, 1.0)
    with pytest.raises(ValueError):
        FaceAttributes("plane", -1.0)


@given(
    st.lists(st.tuples(st.sampled_from(CURVE_TYPES), st.sampled_from(CONVEXITIES), st.booleans()), min_size=1),
    st.lists(st.sampled_from(SURFACE_TYPES), min_size=1),
)
def test_one_hot_blocks(edges, faces):
    Xe = encode_edges([EdgeAttributes(c, v, cl, 1.0) for c, v, cl in edges])
    assert np.all(Xe[:, :5].sum(axis=1) == 1)
    assert np.all(Xe[:, 5:8].sum(axis=1) == 1)
    Xf = encode_faces([FaceAttributes(s, 1.0) for s in faces])
    assert np.all(Xf[:, :6].sum(axis=1) <= 1)


def test_winged_edge_psi_width():
    assert kernel_preset("winged_edge").input_width(7, 10, 1) == 2 * 7 + 5 * 10 + 6 * 1 == 70


def test_two_point_column():
    s = fit_standardizer(np.array([[1.0], [3.0]]))
    assert s.mean.tolist() == [2.0] and s.std.tolist() == [1.0]
    assert s.apply(np.array([[1.0], [3.0]])).ravel().tolist() == [-1.0, 1.0]


def test_constant_column_passes_through():
    X = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
    s = fit_standardizer(X)
    out = s.apply(X)
    assert out[:, 0].tolist() == [5.0, 5.0, 5.0]


def test_uses_training_statistics():
    rng = np.random.default_rng(1)
    train = rng.normal(3.0, 2.0, size=(50, 2))
    val = rng.normal(-1.0, 0.5, size=(20, 2))
    s = fit_standardizer(train)
    expected = (val - train.mean(axis=0)) / train.std(axis=0)
    assert np.allclose(s.apply(val), expected, rtol=0, atol=1e-12)
    own = fit_standardizer(val).apply(val)
    assert not np.allclose(s.apply(val), own)


def test_empty_training_set():
    with pytest.raises(ValueError):
        fit_standardizer([])


def test_split_fit_equals_stacked_fit():
    rng = np.random.default_rng(2)
    parts = [rng.normal(size=(k, 3)) for k in (3, 7, 11)]
    a = fit_standardizer(parts)
    b = fit_standardizer(np.concatenate(parts))
    assert np.allclose(a.mean, b.mean, atol=1e-15) and np.allclose(a.std, b.std, atol=1e-15)


def test_onehot_switch():
    Xf = encode_faces([FaceAttributes("plane", 1.0), FaceAttributes("cylinder", 3.0)])
    Xe = encode_edges([EdgeAttributes("line", "convex", False, 1.0)] * 2)
    Xc = encode_coedges([CoedgeAttributes(True), CoedgeAttributes(False)])
    raw = fit_scaler([Xf], [Xe], [Xc], standardize_onehot=False)
    f, _, c = raw(Xf, Xe, Xc)
    assert f[:, :6].tolist() == Xf[:, :6].tolist()
    assert f[:, 6].tolist() == [-1.0, 1.0]
    assert c.tolist() == Xc.tolist()
    full = fit_scaler([Xf], [Xe], [Xc])
    f, _, c = full(Xf, Xe, Xc)
    assert f[:, 0].tolist() == [1.0, -1.0]


@given(arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 5)), elements=st.floats(-1e3, 1e3)))
def test_standardized_moments(X):
    # a spread many orders below the magnitude cannot be standardized to 1e-9 in float64
    assume(np.all((X.std(axis=0) < 1e-8) | (X.std(axis=0) > 1e-6 * np.abs(X).max(axis=0))))
    s = fit_standardizer(X)
    out = s.apply(X)
    on = s.active
    assert np.all(np.abs(out[:, on].mean(axis=0)) < 1e-9)
    assert np.all(np.abs(out[:, on].std(axis=0) - 1) < 1e-9)
