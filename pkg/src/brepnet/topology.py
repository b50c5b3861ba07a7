"""Closed manifold B-rep topology stored as coedge pointer arrays.

Every coedge keeps four integers: the next coedge around its loop, its
mating coedge on the neighbouring face, its parent edge and its parent
face.  The previous pointer is never stored; it is the inverse of ``next``.
Vertices are not represented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TopologyError(ValueError):
    """Raised when an operation needs a valid topology and did not get one."""


def _as_index_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SolidTopology:
    coedge_next: np.ndarray
    coedge_mate: np.ndarray
    coedge_edge: np.ndarray
    coedge_face: np.ndarray
    num_faces: int
    num_edges: int

    def __post_init__(self):
        for name in ("coedge_next", "coedge_mate", "coedge_edge", "coedge_face"):
            object.__setattr__(self, name, _as_index_array(getattr(self, name)))
        object.__setattr__(self, "num_faces", int(self.num_faces))
        object.__setattr__(self, "num_edges", int(self.num_edges))

    @property
    def num_coedges(self) -> int:
        return len(self.coedge_next)

    @property
    def coedge_prev(self) -> np.ndarray:
        prev = np.empty_like(self.coedge_next)
        prev[self.coedge_next] = np.arange(self.num_coedges)
        return prev

    def __eq__(self, other):
        if not isinstance(other, SolidTopology):
            return NotImplemented
        return (
            self.num_faces == other.num_faces
            and self.num_edges == other.num_edges
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("coedge_next", "coedge_mate", "coedge_edge", "coedge_face")
            )
        )

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    indices: tuple[int, ...] = ()


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self):
        # truthy when the topology is clean, so ``if validate(t):`` reads naturally
        return not self.violations

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def add(self, kind, message, indices=()):
        self.violations.append(Violation(kind, message, tuple(int(i) for i in indices)))

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(f"[{v.kind}] {v.message}" for v in self.violations)


@dataclass(frozen=True)
class LoopDecomposition:
    loops: list[list[int]]
    loop_face: list[int]

    def loops_of_face(self, face: int) -> list[list[int]]:
        return [loop for loop, f in zip(self.loops, self.loop_face) if f == face]

    def loop_counts(self) -> np.ndarray:
        """Number of loops owned by each face."""
        n = max(self.loop_face, default=-1) + 1
        return np.bincount(np.asarray(self.loop_face, dtype=np.int64), minlength=n)


def validate(topo: SolidTopology) -> ValidationReport:
    """Check every structural invariant and collect all violations.

    Out-of-range indices are reported as ``structural`` entries; checks that
    would need those indices are skipped instead of crashing.
    """
    report = ValidationReport()
    n = topo.num_coedges
    arrays = {
        "coedge_next": (topo.coedge_next, n),
        "coedge_mate": (topo.coedge_mate, n),
        "coedge_edge": (topo.coedge_edge, topo.num_edges),
        "coedge_face": (topo.coedge_face, topo.num_faces),
    }
    in_range = {}
    for name, (arr, bound) in arrays.items():
        if len(arr) != n:
            report.add("structural", f"{name} has length {len(arr)}, expected {n}")
            in_range[name] = False
            continue
        bad = np.flatnonzero((arr < 0) | (arr >= bound))
        if bad.size:
            report.add("structural", f"{name} holds indices outside [0, {bound})", bad)
        in_range[name] = bad.size == 0

    if n != 2 * topo.num_edges:
        report.add("counts", f"|c| = {n} but 2|e| = {2 * topo.num_edges}")

    if in_range["coedge_next"]:
        counts = np.bincount(topo.coedge_next, minlength=n)
        bad = np.flatnonzero(counts != 1)
        if bad.size:
            report.add("next_permutation", "coedge_next is not a permutation", bad)

    if in_range["coedge_mate"]:
        mate = topo.coedge_mate
        fixed = np.flatnonzero(mate == np.arange(n))
        if fixed.size:
            report.add("mate_involution", "coedges are their own mate", fixed)
        bad = np.flatnonzero(mate[mate] != np.arange(n))
        if bad.size:
            report.add("mate_involution", "mate(mate(i)) != i", bad)

    if in_range["coedge_edge"]:
        owners = np.bincount(topo.coedge_edge, minlength=topo.num_edges)
        bad = np.flatnonzero(owners != 2)
        if bad.size:
            report.add("manifold_edge", "edges not owned by exactly two coedges", bad)
        if in_range["coedge_mate"] and len(topo.coedge_mate) == n:
            bad = np.flatnonzero(topo.coedge_edge[topo.coedge_mate] != topo.coedge_edge)
            if bad.size:
                report.add("mate_edge", "mating coedges disagree on parent edge", bad)

    if in_range["coedge_face"]:
        owners = np.bincount(topo.coedge_face, minlength=topo.num_faces)
        bad = np.flatnonzero(owners == 0)
        if bad.size:
            report.add("empty_face", "faces own no coedges", bad)
        if in_range["coedge_next"] and "next_permutation" not in report.kinds():
            bad = np.flatnonzero(topo.coedge_face[topo.coedge_next] != topo.coedge_face)
            if bad.size:
                report.add("loop_face", "loop crosses between faces", bad)
    return report


def check(topo: SolidTopology) -> SolidTopology:
    report = validate(topo)
    if not report.ok:
        raise TopologyError(str(report))
    return topo


def prev_of(topo: SolidTopology, i: int) -> int:
    return int(topo.coedge_prev[i])


def next_of(topo: SolidTopology, i: int) -> int:
    return int(topo.coedge_next[i])


def decompose_loops(topo: SolidTopology) -> LoopDecomposition:
    """Split the coedges into the cycles of ``coedge_next``.

    Loops are ordered by their smallest coedge and each loop starts at it.
    """
    n = topo.num_coedges
    nxt = topo.coedge_next
    if len(nxt) != n or np.any((nxt < 0) | (nxt >= n)) or np.bincount(nxt, minlength=n).max(initial=1) != 1:
        raise TopologyError("coedge_next is not a permutation")
    seen = np.zeros(n, dtype=bool)
    loops, loop_face = [], []
    for start in range(n):
        if seen[start]:
            continue
        loop = []
        i = start
        while not seen[i]:
            seen[i] = True
            loop.append(i)
            i = int(nxt[i])
        loops.append(loop)
        loop_face.append(int(topo.coedge_face[start]))
    return LoopDecomposition(loops, loop_face)


def concatenate(topologies) -> tuple[SolidTopology, dict[str, np.ndarray]]:
    """Disjoint union of solids, i.e. diagonal concatenation of the operators.

    Returns the combined topology and the start offsets of each solid's
    faces, edges and coedges (one extra trailing entry holds the totals).
    """
    topologies = list(topologies)
    fo, eo, co = [0], [0], [0]
    for t in topologies:
        fo.append(fo[-1] + t.num_faces)
        eo.append(eo[-1] + t.num_edges)
        co.append(co[-1] + t.num_coedges)

    def cat(name, offsets):
        parts = [getattr(t, name) + off for t, off in zip(topologies, offsets)]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    combined = SolidTopology(
        coedge_next=cat("coedge_next", co),
        coedge_mate=cat("coedge_mate", co),
        coedge_edge=cat("coedge_edge", eo),
        coedge_face=cat("coedge_face", fo),
        num_faces=fo[-1],
        num_edges=eo[-1],
    )
    offsets = {"face": np.array(fo), "edge": np.array(eo), "coedge": np.array(co)}
    return combined, offsets


def permute(topo: SolidTopology, coedge_perm, face_perm=None, edge_perm=None) -> SolidTopology:
    """Relabel entities: old coedge ``i`` becomes ``coedge_perm[i]``, and so on."""
    cp = np.asarray(coedge_perm)
    fp = np.arange(topo.num_faces) if face_perm is None else np.asarray(face_perm)
    ep = np.arange(topo.num_edges) if edge_perm is None else np.asarray(edge_perm)
    n = topo.num_coedges
    nxt, mate, edge, face = (np.empty(n, dtype=np.int64) for _ in range(4))
    nxt[cp] = cp[topo.coedge_next]
    mate[cp] = cp[topo.coedge_mate]
    edge[cp] = ep[topo.coedge_edge]
    face[cp] = fp[topo.coedge_face]
    return SolidTopology(nxt, mate, edge, face, topo.num_faces, topo.num_edges)
