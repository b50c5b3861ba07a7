"""Topological message passing on B-rep coedges, in numpy."""

from .topology import SolidTopology, decompose_loops, prev_of, validate
from .walks import KERNELS, compile_walk, gather, kernel_preset, parse_walk
from .model import ArchitectureConfig, BRepNetModel, classify_faces, parameter_count

__all__ = [
    "SolidTopology",
    "validate",
    "prev_of",
    "decompose_loops",
    "KERNELS",
    "parse_walk",
    "compile_walk",
    "gather",
    "kernel_preset",
    "ArchitectureConfig",
    "BRepNetModel",
    "classify_faces",
    "parameter_count",
]
