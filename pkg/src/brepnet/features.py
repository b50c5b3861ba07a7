"""Coordinate-free input features for faces, edges and coedges."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SURFACE_TYPES = ("plane", "cylinder", "cone", "sphere", "torus", "rational_bspline", "nonrational_bspline")
CURVE_TYPES = ("line", "circle", "ellipse", "helix", "intersection_curve")
CONVEXITIES = ("concave", "convex", "smooth")

# non-rational B-splines have no flag column of their own
_SURFACE_COLUMNS = SURFACE_TYPES[:6]

FACE_COLUMNS = _SURFACE_COLUMNS + ("area",)
EDGE_COLUMNS = CURVE_TYPES + CONVEXITIES + ("closed", "length")
COEDGE_COLUMNS = ("forward",)

FACE_WIDTH = len(FACE_COLUMNS)  # 7
EDGE_WIDTH = len(EDGE_COLUMNS)  # 10
COEDGE_WIDTH = len(COEDGE_COLUMNS)  # 1


@dataclass(frozen=True)
class FaceAttributes:
    surface_type: str
    area: float

    def __post_init__(self):
        if self.surface_type not in SURFACE_TYPES:
            raise ValueError(f"unknown surface type {self.surface_type!r}")
        if not self.area >= 0:
            raise ValueError("face area must be non-negative")


@dataclass(frozen=True)
class EdgeAttributes:
    curve_type: str
    convexity: str
    closed: bool
    length: float

    def __post_init__(self):
        if self.curve_type not in CURVE_TYPES:
            raise ValueError(f"unknown curve type {self.curve_type!r}")
        if self.convexity not in CONVEXITIES:
            raise ValueError(f"unknown convexity {self.convexity!r}")
        if not self.length >= 0:
            raise ValueError("edge length must be non-negative")


@dataclass(frozen=True)
class CoedgeAttributes:
    forward: bool


def encode_faces(attrs) -> np.ndarray:
    attrs = list(attrs)
    X = np.zeros((len(attrs), FACE_WIDTH))
    for row, a in enumerate(attrs):
        if a.surface_type in _SURFACE_COLUMNS:
            X[row, _SURFACE_COLUMNS.index(a.surface_type)] = 1.0
        X[row, -1] = a.area
    return X


def encode_edges(attrs) -> np.ndarray:
    attrs = list(attrs)
    X = np.zeros((len(attrs), EDGE_WIDTH))
    nc = len(CURVE_TYPES)
    for row, a in enumerate(attrs):
        X[row, CURVE_TYPES.index(a.curve_type)] = 1.0
        X[row, nc + CONVEXITIES.index(a.convexity)] = 1.0
        X[row, nc + 3] = float(bool(a.closed))
        X[row, nc + 4] = a.length
    return X


def encode_coedges(attrs) -> np.ndarray:
    return np.array([[float(bool(a.forward))] for a in attrs]).reshape(-1, COEDGE_WIDTH)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-column ``(x - mean) / std`` with statistics frozen at fit time.

    Columns whose deviation falls below ``guard`` (or that are excluded via
    ``mask``) pass through untouched.
    """

    mean: np.ndarray
    std: np.ndarray
    guard: float = 1e-8
    mask: np.ndarray | None = None

    @property
    def active(self) -> np.ndarray:
        on = self.std >= self.guard
        if self.mask is not None:
            on &= np.asarray(self.mask, dtype=bool)
        return on

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != len(self.mean):
            raise ValueError(f"expected {len(self.mean)} columns, got {X.shape[1]}")
        on = self.active
        out = X.copy()
        out[:, on] = (X[:, on] - self.mean[on]) / self.std[on]
        return out

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "guard": self.guard,
            "mask": None if self.mask is None else np.asarray(self.mask, dtype=bool).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        mask = d.get("mask")
        return cls(
            np.asarray(d["mean"], dtype=np.float64),
            np.asarray(d["std"], dtype=np.float64),
            float(d.get("guard", 1e-8)),
            None if mask is None else np.asarray(mask, dtype=bool),
        )

    @classmethod
    def identity(cls, width: int) -> "Standardizer":
        return cls(np.zeros(width), np.ones(width), mask=np.zeros(width, dtype=bool))


def fit_standardizer(matrices, guard: float = 1e-8, mask=None) -> Standardizer:
    """Fit column statistics on training matrices (population deviation)."""
    if isinstance(matrices, np.ndarray):
        matrices = [matrices]
    matrices = [np.asarray(m, dtype=np.float64) for m in matrices]
    if not matrices or sum(m.shape[0] for m in matrices) == 0:
        raise ValueError("cannot fit a standardizer on an empty training set")
    X = np.concatenate(matrices, axis=0)
    return Standardizer(X.mean(axis=0), X.std(axis=0), guard, None if mask is None else np.asarray(mask, dtype=bool))


def apply(standardizer: Standardizer, X: np.ndarray) -> np.ndarray:
    return standardizer.apply(X)


def continuous_only_mask(kind: str) -> np.ndarray:
    """Column mask that standardizes only area/length, leaving flags as 0/1."""
    cols = {"face": FACE_COLUMNS, "edge": EDGE_COLUMNS, "coedge": COEDGE_COLUMNS}[kind]
    return np.array([c in ("area", "length") for c in cols])


@dataclass(frozen=True)
class FeatureScaler:
    """The three standardizers used by a model, one per entity type."""

    face: Standardizer
    edge: Standardizer
    coedge: Standardizer

    def __call__(self, Xf, Xe, Xc):
        return self.face.apply(Xf), self.edge.apply(Xe), self.coedge.apply(Xc)

    def to_dict(self):
        return {"face": self.face.to_dict(), "edge": self.edge.to_dict(), "coedge": self.coedge.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(*(Standardizer.from_dict(d[k]) for k in ("face", "edge", "coedge")))

    @classmethod
    def identity(cls):
        return cls(
            Standardizer.identity(FACE_WIDTH),
            Standardizer.identity(EDGE_WIDTH),
            Standardizer.identity(COEDGE_WIDTH),
        )


def fit_scaler(face_mats, edge_mats, coedge_mats, standardize_onehot: bool = True) -> FeatureScaler:
    masks = {k: None if standardize_onehot else continuous_only_mask(k) for k in ("face", "edge", "coedge")}
    return FeatureScaler(
        fit_standardizer(face_mats, mask=masks["face"]),
        fit_standardizer(edge_mats, mask=masks["edge"]),
        fit_standardizer(coedge_mats, mask=masks["coedge"]),
    )
