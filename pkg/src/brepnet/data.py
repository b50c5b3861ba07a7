"""Solid documents, dataset splits, minibatching and synthetic solids.

A solid document is a JSON object::

    {
      "id": "box-0",
      "coedges": [{"next": 1, "mate": 7, "edge": 0, "face": 0, "forward": true}, ...],
      "faces":   [{"surface_type": "plane", "area": 1.0, "label": 1}, ...],
      "edges":   [{"curve_type": "line", "convexity": "convex", "closed": false, "length": 1.0}, ...]
    }

Indices are zero based. Labels index :data:`LABELS`.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .features import (
    CONVEXITIES,
    CURVE_TYPES,
    SURFACE_TYPES,
    CoedgeAttributes,
    EdgeAttributes,
    FaceAttributes,
    encode_coedges,
    encode_edges,
    encode_faces,
)
from .topology import SolidTopology, concatenate, validate
from .walks import compile_kernel

log = logging.getLogger(__name__)

LABELS = (
    "ExtrudeSide",
    "ExtrudeEnd",
    "CutSide",
    "CutEnd",
    "Fillet",
    "Chamfer",
    "RevolveSide",
    "RevolveEnd",
)
EXTRUDE_SIDE, EXTRUDE_END, CUT_SIDE, CUT_END, FILLET, CHAMFER, REVOLVE_SIDE, REVOLVE_END = range(8)

_INDEX = {"type": "integer", "minimum": 0}
SOLID_SCHEMA = {
    "type": "object",
    "required": ["id", "coedges", "faces", "edges"],
    "properties": {
        "id": {"type": ["string", "integer"]},
        "coedges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["next", "mate", "edge", "face", "forward"],
                "properties": {
                    "next": _INDEX,
                    "mate": _INDEX,
                    "edge": _INDEX,
                    "face": _INDEX,
                    "forward": {"type": "boolean"},
                },
            },
        },
        "faces": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["surface_type", "area"],
                "properties": {
                    "surface_type": {"enum": list(SURFACE_TYPES)},
                    "area": {"type": "number", "minimum": 0},
                    "label": {"type": "integer", "minimum": 0, "maximum": len(LABELS) - 1},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["curve_type", "convexity", "closed", "length"],
                "properties": {
                    "curve_type": {"enum": list(CURVE_TYPES)},
                    "convexity": {"enum": list(CONVEXITIES)},
                    "closed": {"type": "boolean"},
                    "length": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}


class DatasetError(ValueError):
    pass


@dataclass
class SolidRecord:
    id: str
    topology: SolidTopology
    faces: list[FaceAttributes]
    edges: list[EdgeAttributes]
    coedges: list[CoedgeAttributes]
    labels: np.ndarray | None = None
    num_vertices: int | None = None  # known for generated solids only

    def __post_init__(self):
        t = self.topology
        if len(self.faces) != t.num_faces or len(self.edges) != t.num_edges or len(self.coedges) != t.num_coedges:
            raise DatasetError(f"{self.id}: attribute counts do not match the topology")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (t.num_faces,):
                raise DatasetError(f"{self.id}: need one label per face")

    @property
    def num_faces(self):
        return self.topology.num_faces

    def features(self):
        return encode_faces(self.faces), encode_edges(self.edges), encode_coedges(self.coedges)

    def to_document(self) -> dict:
        t = self.topology
        faces = []
        for i, f in enumerate(self.faces):
            d = {"surface_type": f.surface_type, "area": float(f.area)}
            if self.labels is not None:
                d["label"] = int(self.labels[i])
            faces.append(d)
        return {
            "id": self.id,
            "coedges": [
                {
                    "next": int(t.coedge_next[i]),
                    "mate": int(t.coedge_mate[i]),
                    "edge": int(t.coedge_edge[i]),
                    "face": int(t.coedge_face[i]),
                    "forward": bool(c.forward),
                }
                for i, c in enumerate(self.coedges)
            ],
            "faces": faces,
            "edges": [
                {"curve_type": e.curve_type, "convexity": e.convexity, "closed": bool(e.closed), "length": float(e.length)}
                for e in self.edges
            ],
        }


def record_from_document(doc: dict) -> SolidRecord:
    """Build a record from a parsed document; raises on schema or topology errors."""
    try:
        jsonschema.validate(doc, SOLID_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise DatasetError(f"schema violation at {list(exc.absolute_path)}: {exc.message}") from None
    co = doc["coedges"]
    topo = SolidTopology(
        [c["next"] for c in co],
        [c["mate"] for c in co],
        [c["edge"] for c in co],
        [c["face"] for c in co],
        num_faces=len(doc["faces"]),
        num_edges=len(doc["edges"]),
    )
    report = validate(topo)
    if not report.ok:
        raise DatasetError(f"invalid topology:\n{report}")
    labelled = ["label" in f for f in doc["faces"]]
    if any(labelled) and not all(labelled):
        raise DatasetError("either every face or no face carries a label")
    return SolidRecord(
        id=str(doc["id"]),
        topology=topo,
        faces=[FaceAttributes(f["surface_type"], f["area"]) for f in doc["faces"]],
        edges=[EdgeAttributes(e["curve_type"], e["convexity"], e["closed"], e["length"]) for e in doc["edges"]],
        coedges=[CoedgeAttributes(c["forward"]) for c in co],
        labels=[f["label"] for f in doc["faces"]] if all(labelled) and labelled else None,
    )


def write_record(record: SolidRecord, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(record.to_document(), indent=1))
    return path


def write_dataset(records, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [write_record(r, directory / f"{r.id}.json") for r in records]


@dataclass
class ReadReport:
    loaded: int = 0
    skipped: list[tuple[str, str]] = field(default_factory=list)


def read_dataset(path, report: ReadReport | None = None) -> list[SolidRecord]:
    """Load every ``*.json`` document under ``path`` (a directory or one file).

    Documents that fail to parse, violate the schema or hold an invalid
    topology are logged and skipped; ``report`` collects them.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    files = sorted(path.rglob("*.json")) if path.is_dir() else [path]
    report = report if report is not None else ReadReport()
    records = []
    for f in files:
        try:
            doc = json.loads(f.read_text())
            records.append(record_from_document(doc))
        except (OSError, json.JSONDecodeError, DatasetError) as exc:
            log.warning("skipping %s: %s", f, exc)
            report.skipped.append((str(f), str(exc)))
    report.loaded = len(records)
    return records


def split(records, ratios=(0.7, 0.15, 0.15), seed=0, split_file=None):
    """Deterministic train/validation/test split.

    A split file (JSON with ``train``, ``validation`` and ``test`` id lists)
    takes precedence over ``ratios``.
    """
    records = list(records)
    if split_file is not None:
        spec = json.loads(Path(split_file).read_text())
        by_id = {r.id: r for r in records}
        out = []
        for key in ("train", "validation", "test"):
            missing = [i for i in spec.get(key, []) if i not in by_id]
            if missing:
                raise DatasetError(f"split file names unknown ids: {missing[:5]}")
            out.append([by_id[i] for i in spec.get(key, [])])
        return tuple(out)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    order = np.random.default_rng(seed).permutation(len(records))
    n_train = int(round(ratios[0] * len(records)))
    n_val = int(round(ratios[1] * len(records)))
    n_val = min(n_val, len(records) - n_train)
    train = [records[i] for i in order[:n_train]]
    val = [records[i] for i in order[n_train : n_train + n_val]]
    test = [records[i] for i in order[n_train + n_val :]]
    return train, val, test


class Batch:
    """Several solids packed into one disjoint topology.

    Feature matrices are stacked row-wise; the combined pointer arrays are
    the block-diagonal concatenation of the per-solid operators.
    """

    def __init__(self, records):
        self.records = list(records)
        self.topology, self.offsets = concatenate(r.topology for r in self.records)
        feats = [r.features() for r in self.records]
        self.Xf = np.concatenate([f[0] for f in feats])
        self.Xe = np.concatenate([f[1] for f in feats])
        self.Xc = np.concatenate([f[2] for f in feats])
        if all(r.labels is not None for r in self.records):
            self.labels = np.concatenate([r.labels for r in self.records])
        else:
            self.labels = None
        self._compiled = {}

    @property
    def ids(self):
        return [r.id for r in self.records]

    @property
    def num_faces(self):
        return self.topology.num_faces

    def compiled(self, kernel):
        if kernel.name not in self._compiled:
            self._compiled[kernel.name] = compile_kernel(kernel, self.topology)
        return self._compiled[kernel.name]

    def face_slices(self):
        fo = self.offsets["face"]
        return [slice(a, b) for a, b in zip(fo[:-1], fo[1:])]


def make_batches(records, face_budget=1000, seed=0, shuffle=True) -> list[Batch]:
    """Greedily fill batches of at most ``face_budget`` faces in shuffled order.

    A solid larger than the budget gets a batch of its own.
    """
    records = list(records)
    order = np.random.default_rng(seed).permutation(len(records)) if shuffle else np.arange(len(records))
    batches, current, faces = [], [], 0
    for i in order:
        r = records[i]
        if current and faces + r.num_faces > face_budget:
            batches.append(Batch(current))
            current, faces = [], 0
        current.append(r)
        faces += r.num_faces
    if current:
        batches.append(Batch(current))
    return batches


# ------------------------------------------------------------ synthetic solids


def _assemble(sid, face_loops, face_attrs, labels, edge_attr):
    """Build a record from faces given as loops of vertex ids.

    Loops run counter-clockwise seen from outside the solid, so each directed
    vertex pair appears once and its reverse is the mate. ``edge_attr`` maps
    an unordered vertex pair to its :class:`EdgeAttributes`.
    """
    coedge_of = {}
    nxt, face_of, ends = [], [], []
    for f, loops in enumerate(face_loops):
        for loop in loops:
            start = len(ends)
            k = len(loop)
            for j in range(k):
                a, b = loop[j], loop[(j + 1) % k]
                if (a, b) in coedge_of:
                    raise ValueError(f"directed edge {(a, b)} used twice")
                coedge_of[(a, b)] = len(ends)
                ends.append((a, b))
                face_of.append(f)
                nxt.append(start + (j + 1) % k)
    edge_ids, edges = {}, []
    mate, edge_of, forward = [], [], []
    for a, b in ends:
        key = (min(a, b), max(a, b))
        if key not in edge_ids:
            edge_ids[key] = len(edges)
            edges.append(edge_attr[key])
        edge_of.append(edge_ids[key])
        mate.append(coedge_of[(b, a)])
        forward.append(CoedgeAttributes(a < b))
    vertices = {v for pair in ends for v in pair}
    topo = SolidTopology(nxt, mate, edge_of, face_of, len(face_loops), len(edges))
    return SolidRecord(sid, topo, face_attrs, edges, forward, np.array(labels), num_vertices=len(vertices))


def _rounded_polygon(corners, modify, radius):
    """Profile segments of a convex polygon with some corners filleted or chamfered.

    Returns ``(points, segments)``; segment ``j`` joins point ``j`` to ``j+1``
    and is a dict with ``kind`` (``line``/``fillet``/``chamfer``) and length.
    """
    pts, segs = [], []
    n = len(corners)
    for i in range(n):
        p = np.asarray(corners[i], dtype=float)
        if modify[i] is None:
            pts.append((p, "corner"))
            continue
        a = np.asarray(corners[i - 1], dtype=float)
        c = np.asarray(corners[(i + 1) % n], dtype=float)
        u, w = (a - p) / np.linalg.norm(a - p), (c - p) / np.linalg.norm(c - p)
        turn = math.pi - math.acos(float(np.clip(u @ w, -1, 1)))  # exterior angle
        setback = radius * math.tan(turn / 2)
        pts.append((p + setback * u, "start"))
        pts.append((p + setback * w, modify[i]))
    points = [q for q, _ in pts]
    for j in range(len(pts)):
        q0, q1 = points[j], points[(j + 1) % len(pts)]
        kind = pts[(j + 1) % len(pts)][1]
        if kind in ("fillet", "chamfer"):
            turn = _exterior_angle(points, j)
            length = radius * turn if kind == "fillet" else float(np.linalg.norm(q1 - q0))
            segs.append({"kind": kind, "length": length, "turn": turn})
        else:
            segs.append({"kind": "line", "length": float(np.linalg.norm(q1 - q0))})
    return points, segs


def _exterior_angle(points, j):
    n = len(points)
    d0 = points[j] - points[j - 1]
    d1 = points[(j + 2) % n] - points[(j + 1) % n]
    cosang = float(d0 @ d1 / (np.linalg.norm(d0) * np.linalg.norm(d1)))
    return math.acos(float(np.clip(cosang, -1, 1)))


def _shoelace(points):
    x = np.array([p[0] for p in points])
    y = np.array([p[1] for p in points])
    return 0.5 * abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1)))


def _profile_area(points, segs, radius):
    area = _shoelace(points)
    for s in segs:
        if s["kind"] == "fillet":
            # circular segment between the chord and the arc
            t = s["turn"]
            area += 0.5 * radius**2 * (t - math.sin(t))
    return area


def _extrusion(sid, points, segs, height, holes=(), side_label=EXTRUDE_SIDE):
    """Extrude a closed profile, optionally pierced by through holes.

    ``holes`` is a list of ``(points, round)`` profiles (counter-clockwise);
    round holes get cylindrical walls joined by smooth edges, polygonal
    holes get planar walls joined by concave edges.
    """
    n = len(points)
    bottom = list(range(n))
    top = [n + i for i in range(n)]
    next_vertex = 2 * n
    face_loops = [[bottom[::-1]], [top]]
    profile_area = _shoelace(points)
    edge_attr = {}
    face_attrs, labels = [], [EXTRUDE_END, EXTRUDE_END]

    def put(a, b, attr):
        edge_attr[(min(a, b), max(a, b))] = attr

    for i, s in enumerate(segs):
        j = (i + 1) % n
        face_loops.append([[bottom[i], bottom[j], top[j], top[i]]])
        curve = "circle" if s["kind"] == "fillet" else "line"
        put(bottom[i], bottom[j], EdgeAttributes(curve, "convex", False, s["length"]))
        put(top[i], top[j], EdgeAttributes(curve, "convex", False, s["length"]))
        face_attrs.append(FaceAttributes("cylinder" if s["kind"] == "fillet" else "plane", s["length"] * height))
        labels.append({"line": side_label, "fillet": FILLET, "chamfer": CHAMFER}[s["kind"]])
    for i in range(n):
        before, after = segs[i - 1]["kind"], segs[i]["kind"]
        smooth = "fillet" in (before, after)
        put(bottom[i], top[i], EdgeAttributes("line", "smooth" if smooth else "convex", False, height))

    hole_area = 0.0
    for hpoints, is_round in holes:
        k = len(hpoints)
        hb = [next_vertex + i for i in range(k)]
        ht = [next_vertex + k + i for i in range(k)]
        next_vertex += 2 * k
        face_loops[0].append(hb)
        face_loops[1].append(ht[::-1])
        if is_round:
            r = float(np.linalg.norm(np.asarray(hpoints[0]) - np.mean(hpoints, axis=0)))
            seg_len = 2 * math.pi * r / k
            hole_area += math.pi * r**2
        else:
            hole_area += _shoelace(hpoints)
        for i in range(k):
            j = (i + 1) % k
            if not is_round:
                seg_len = float(np.linalg.norm(np.asarray(hpoints[j]) - np.asarray(hpoints[i])))
            face_loops.append([[hb[j], hb[i], ht[i], ht[j]]])
            face_attrs.append(FaceAttributes("cylinder" if is_round else "plane", seg_len * height))
            labels.append(CUT_SIDE)
            curve = "circle" if is_round else "line"
            put(hb[i], hb[j], EdgeAttributes(curve, "convex", False, seg_len))
            put(ht[i], ht[j], EdgeAttributes(curve, "convex", False, seg_len))
            put(hb[i], ht[i], EdgeAttributes("line", "smooth" if is_round else "concave", False, height))

    cap = max(profile_area - hole_area, 0.0)
    face_attrs = [FaceAttributes("plane", cap), FaceAttributes("plane", cap)] + face_attrs
    return _assemble(sid, face_loops, face_attrs, labels, edge_attr)


def _regular_polygon(n, radius, phase=0.0, center=(0.0, 0.0)):
    return [
        (center[0] + radius * math.cos(phase + 2 * math.pi * i / n), center[1] + radius * math.sin(phase + 2 * math.pi * i / n))
        for i in range(n)
    ]


SYNTHETIC_KINDS = ("box", "n_prism", "box_with_hole", "filleted_box")


def generate_synthetic(kind: str, params: dict | None = None, seed: int = 0) -> SolidRecord:
    """Make a labelled synthetic solid.

    ``box``: ``width``, ``depth``, ``height``.
    ``n_prism``: ``n`` (>= 3), ``radius``, ``height``.
    ``box_with_hole``: box parameters plus ``hole_sides`` (>= 3) and
    ``round_hole``.
    ``filleted_box``: box parameters plus ``corners`` (how many vertical
    edges to blend, 1-4), ``radius`` and ``chamfer``.
    Missing parameters are drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    p = dict(params or {})
    w = float(p.get("width", rng.uniform(1.0, 3.0)))
    d = float(p.get("depth", rng.uniform(1.0, 3.0)))
    h = float(p.get("height", rng.uniform(0.5, 2.0)))
    sid = str(p.get("id", f"{kind}-{seed}"))
    rect = [(0.0, 0.0), (w, 0.0), (w, d), (0.0, d)]

    def straight(points):
        n = len(points)
        return [
            {"kind": "line", "length": float(np.linalg.norm(np.subtract(points[(i + 1) % n], points[i])))}
            for i in range(n)
        ]

    if kind == "box":
        return _extrusion(sid, rect, straight(rect), h)
    if kind == "n_prism":
        n = int(p.get("n", rng.integers(3, 9)))
        if n < 3:
            raise ValueError("a prism needs n >= 3")
        pts = _regular_polygon(n, float(p.get("radius", rng.uniform(0.5, 1.5))))
        return _extrusion(sid, pts, straight(pts), h)
    if kind == "box_with_hole":
        k = int(p.get("hole_sides", rng.integers(3, 7)))
        if k < 3:
            raise ValueError("a hole needs at least 3 sides")
        round_hole = bool(p.get("round_hole", rng.random() < 0.5))
        r = 0.3 * min(w, d) * float(p.get("hole_scale", rng.uniform(0.5, 1.0)))
        hole = _regular_polygon(k, r, rng.uniform(0, math.pi), (w / 2, d / 2))
        return _extrusion(sid, rect, straight(rect), h, holes=[(hole, round_hole)])
    if kind == "filleted_box":
        count = int(p.get("corners", rng.integers(1, 5)))
        if not 1 <= count <= 4:
            raise ValueError("corners must be between 1 and 4")
        chamfer = bool(p.get("chamfer", rng.random() < 0.3))
        radius = float(p.get("radius", 0.2 * min(w, d)))
        chosen = set(rng.choice(4, size=count, replace=False).tolist()) if "which" not in p else set(p["which"])
        modify = [("chamfer" if chamfer else "fillet") if i in chosen else None for i in range(4)]
        points, segs = _rounded_polygon(rect, modify, radius)
        area = _profile_area(points, segs, radius)
        record = _extrusion(sid, points, segs, h)
        record.faces[0] = record.faces[1] = FaceAttributes("plane", area)
        return record
    raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTHETIC_KINDS}")


def synthetic_dataset(count: int, seed: int = 0, kinds=SYNTHETIC_KINDS) -> list[SolidRecord]:
    """``count`` solids cycling through ``kinds`` with per-solid seeds."""
    out = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        s = seed * 100_003 + i
        rec = generate_synthetic(kind, {"id": f"{kind}-{s}"}, seed=s)
        out.append(rec)
    return out
