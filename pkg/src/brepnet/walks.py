"""Topological walks compiled to index arrays.

The next/previous/mate operators are permutations of the coedges and the
face/edge operators are incidence maps with one nonzero per row, so every
product of them is fully described by one destination index per coedge.
Multiplying operators becomes index composition and applying the product
to a hidden-state matrix becomes a row gather.

Walk strings use one letter per instruction, executed left to right::

    I  identity (only valid on its own)
    N  next coedge in the loop
    P  previous coedge in the loop
    M  mating coedge
    E  parent edge   (terminal)
    F  parent face   (terminal)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import SolidTopology, check

COEDGE, FACE, EDGE = "coedge", "face", "edge"

_HOPS = {"N": "next", "P": "previous", "M": "mate"}
_TERMINALS = {"E": "edge", "F": "face"}


class WalkParseError(ValueError):
    def __init__(self, message: str, walk: str, position: int):
        super().__init__(f"{message} at column {position} in walk {walk!r}")
        self.walk = walk
        self.position = position


def parse_walk(text: str) -> list[str]:
    """Turn a walk string into a list of instruction names.

    >>> parse_walk("MNE")
    ['mate', 'next', 'edge']
    >>> parse_walk("I")
    []
    """
    if not isinstance(text, str) or not text:
        raise WalkParseError("empty walk", str(text), 0)
    if text == "I":
        return []
    out = []
    for pos, ch in enumerate(text):
        if ch in _HOPS:
            out.append(_HOPS[ch])
        elif ch in _TERMINALS:
            if pos != len(text) - 1:
                raise WalkParseError(f"terminal instruction {ch!r} before end of walk", text, pos)
            out.append(_TERMINALS[ch])
        elif ch == "I":
            raise WalkParseError("'I' must appear on its own", text, pos)
        else:
            raise WalkParseError(f"illegal character {ch!r}", text, pos)
    return out


def walk_kind(text: str) -> str:
    """Entity type a walk terminates on."""
    instructions = parse_walk(text)
    if instructions and instructions[-1] in (FACE, EDGE):
        return instructions[-1]
    return COEDGE


@dataclass(frozen=True, eq=False)
class WalkMatrix:
    """One walk as a row-gather: row ``i`` of the product selects ``dest[i]``."""

    kind: str
    dest: np.ndarray
    num_targets: int

    def __post_init__(self):
        d = np.asarray(self.dest, dtype=np.int64)
        d.setflags(write=False)
        object.__setattr__(self, "dest", d)

    @property
    def num_coedges(self) -> int:
        return len(self.dest)

    def then(self, other: "WalkMatrix") -> "WalkMatrix":
        """Matrix product ``self @ other``: walk ``self`` first, then ``other``."""
        if self.kind != COEDGE:
            raise ValueError("cannot continue a walk after it reached a face or edge")
        if other.num_coedges != self.num_targets:
            raise ValueError("operator sizes do not chain")
        return WalkMatrix(other.kind, other.dest[self.dest], other.num_targets)

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.num_coedges, self.num_targets))
        m[np.arange(self.num_coedges), self.dest] = 1.0
        return m


def build_operators(topo: SolidTopology) -> dict[str, WalkMatrix]:
    check(topo)
    n = topo.num_coedges
    return {
        "I": WalkMatrix(COEDGE, np.arange(n), n),
        "N": WalkMatrix(COEDGE, topo.coedge_next, n),
        "P": WalkMatrix(COEDGE, topo.coedge_prev, n),
        "M": WalkMatrix(COEDGE, topo.coedge_mate, n),
        "E": WalkMatrix(EDGE, topo.coedge_edge, topo.num_edges),
        "F": WalkMatrix(FACE, topo.coedge_face, topo.num_faces),
    }


def compile_walk(topo: SolidTopology, walk, operators=None) -> WalkMatrix:
    """Compile a walk (string or parsed instruction list) for one topology."""
    instructions = parse_walk(walk) if isinstance(walk, str) else list(walk)
    ops = operators if operators is not None else build_operators(topo)
    letters = {"next": "N", "previous": "P", "mate": "M", "edge": "E", "face": "F"}
    result = ops["I"]
    for ins in instructions:
        result = result.then(ops[letters[ins]])
    return result


def gather(matrix: WalkMatrix, H: np.ndarray) -> np.ndarray:
    """Row ``i`` of the output is ``H[matrix.dest[i]]``; repeats are kept."""
    H = np.asarray(H)
    if H.shape[0] != matrix.num_targets:
        raise ValueError(
            f"walk of kind {matrix.kind} targets {matrix.num_targets} rows, got {H.shape[0]}"
        )
    return H[matrix.dest]


def scatter_add(matrix: WalkMatrix, G: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`gather` (multiplication by the transposed operator)."""
    G = np.asarray(G)
    if G.shape[0] != matrix.num_coedges:
        raise ValueError(f"expected {matrix.num_coedges} rows, got {G.shape[0]}")
    out = np.zeros((matrix.num_targets,) + G.shape[1:], dtype=G.dtype)
    np.add.at(out, matrix.dest, G)
    return out


@dataclass(frozen=True)
class KernelSpec:
    name: str
    face_walks: tuple[str, ...]
    edge_walks: tuple[str, ...]
    coedge_walks: tuple[str, ...]

    def __post_init__(self):
        for attr in ("face_walks", "edge_walks", "coedge_walks"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        for attr, kind in (("face_walks", FACE), ("edge_walks", EDGE), ("coedge_walks", COEDGE)):
            walks = getattr(self, attr)
            if not walks:
                raise ValueError(f"kernel {self.name!r}: {attr} is empty")
            for w in walks:
                if walk_kind(w) != kind:
                    raise ValueError(f"kernel {self.name!r}: walk {w!r} in {attr} does not end on a {kind}")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.face_walks), len(self.edge_walks), len(self.coedge_walks)

    def input_width(self, face_width: int, edge_width: int, coedge_width: int) -> int:
        nf, ne, nc = self.sizes
        return nf * face_width + ne * edge_width + nc * coedge_width


_FACES = ("F", "MF")
_WINGED_EDGES = ("E", "NE", "PE", "MNE", "MPE")

KERNELS = {
    "simple_edge": KernelSpec("simple_edge", _FACES, ("E",), ("I", "M")),
    "asymmetric": KernelSpec("asymmetric", _FACES, ("E",), ("I", "N")),
    "asymmetric_plus": KernelSpec("asymmetric_plus", _FACES, ("E",), ("I", "M", "N")),
    "asymmetric_plus_plus": KernelSpec("asymmetric_plus_plus", _FACES, ("E", "NE"), ("I", "M", "N")),
    "winged_edge": KernelSpec("winged_edge", _FACES, _WINGED_EDGES, ("I", "M", "N", "P", "MN", "MP")),
    "winged_edge_plus": KernelSpec(
        "winged_edge_plus",
        _FACES,
        _WINGED_EDGES,
        ("I", "M", "N", "NM", "P", "PM", "MN", "MNM", "MP", "MPM"),
    ),
    "winged_edge_plus_plus": KernelSpec(
        "winged_edge_plus_plus",
        _FACES,
        _WINGED_EDGES + ("NMNE", "PMPE", "MPMPE", "MNMNE"),
        ("I", "M", "N", "NM", "P", "PM", "MN", "MNM", "MP", "MPM", "NMN", "PMP", "MPMP", "MNMN"),
    ),
}


def kernel_preset(name: str) -> KernelSpec:
    try:
        return KERNELS[name]
    except KeyError:
        raise KeyError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


@dataclass(frozen=True)
class CompiledKernel:
    """A kernel's walks compiled against one topology."""

    kernel: KernelSpec
    face: tuple[WalkMatrix, ...]
    edge: tuple[WalkMatrix, ...]
    coedge: tuple[WalkMatrix, ...]
    topology: SolidTopology


def compile_kernel(kernel: KernelSpec, topo: SolidTopology) -> CompiledKernel:
    ops = build_operators(topo)
    return CompiledKernel(
        kernel,
        tuple(compile_walk(topo, w, ops) for w in kernel.face_walks),
        tuple(compile_walk(topo, w, ops) for w in kernel.edge_walks),
        tuple(compile_walk(topo, w, ops) for w in kernel.coedge_walks),
        topo,
    )
