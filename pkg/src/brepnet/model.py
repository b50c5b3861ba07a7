"""The BRepNet stack: T hidden convolution units plus a face-only output unit."""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import nn
from .features import COEDGE_WIDTH, EDGE_WIDTH, FACE_WIDTH, FeatureScaler
from .walks import CompiledKernel, gather, kernel_preset, scatter_add


@dataclass(frozen=True)
class ArchitectureConfig:
    kernel: str = "winged_edge"
    hidden: int = 84  # s
    num_units: int = 1  # T, hidden convolution units before the output unit
    num_classes: int = 8  # u
    mlp_depth: int = 2
    final_bias: bool = False
    pooling: bool = True
    dtype: str = "float64"
    seed: int = 0

    def __post_init__(self):
        kernel_preset(self.kernel)
        if self.hidden < 1:
            raise ValueError("hidden width s must be >= 1")
        if self.num_units < 0:
            raise ValueError("T must be >= 0")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if self.mlp_depth < 1:
            raise ValueError("MLP depth must be >= 1")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def unit_widths(config: ArchitectureConfig) -> list[list[int]]:
    """Layer widths of every unit's MLP, output unit last."""
    k = kernel_preset(config.kernel)
    s = config.hidden
    hidden = [3 * s] * (config.mlp_depth - 1)
    first_in = k.input_width(FACE_WIDTH, EDGE_WIDTH, COEDGE_WIDTH)
    later_in = sum(k.sizes) * s
    widths = []
    for t in range(config.num_units):
        widths.append([first_in if t == 0 else later_in] + hidden + [3 * s])
    widths.append([first_in if config.num_units == 0 else later_in] + hidden + [config.num_classes])
    return widths


def parameter_count(config: ArchitectureConfig) -> int:
    total = 0
    for u, widths in enumerate(unit_widths(config)):
        final_unit = u == config.num_units
        for j, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            last_layer = j == len(widths) - 2
            bias = not (final_unit and last_layer and not config.final_bias)
            total += a * b + (b if bias else 0)
    return total


@dataclass
class BRepNetModel:
    config: ArchitectureConfig
    units: list[nn.MlpParams]
    scaler: FeatureScaler = field(default_factory=FeatureScaler.identity)

    @classmethod
    def initialize(cls, config: ArchitectureConfig, scaler: FeatureScaler | None = None) -> "BRepNetModel":
        rng = np.random.default_rng(config.seed)
        units = []
        all_widths = unit_widths(config)
        for u, widths in enumerate(all_widths):
            final_unit = u == len(all_widths) - 1
            units.append(
                nn.init_mlp(widths, rng, final_bias=config.final_bias or not final_unit, dtype=np.dtype(config.dtype))
            )
        return cls(config, units, scaler or FeatureScaler.identity())

    @property
    def kernel(self):
        return kernel_preset(self.config.kernel)

    def parameters(self) -> list[np.ndarray]:
        return [a for unit in self.units for a in unit.arrays()]

    def parameter_names(self) -> list[str]:
        names = []
        for u, unit in enumerate(self.units):
            tag = "out" if u == len(self.units) - 1 else f"unit{u}"
            names.extend(unit.array_names(f"{tag}."))
        return names

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "BRepNetModel":
        units = [
            nn.MlpParams([nn.Layer(l.W.copy(), None if l.b is None else l.b.copy()) for l in unit.layers])
            for unit in self.units
        ]
        return BRepNetModel(self.config, units, self.scaler)


def conv_unit_forward(params: nn.MlpParams, Hf, He, Hc, ck: CompiledKernel, s: int, final=False, pooling=True):
    """One convolution unit.

    Returns ``((Hf', He', Hc'), cache)``; the output unit returns
    ``(scores, None, None)``.
    """
    topo = ck.topology
    blocks = [gather(w, Hf) for w in ck.face] + [gather(w, He) for w in ck.edge] + [gather(w, Hc) for w in ck.coedge]
    psi = np.concatenate(blocks, axis=1)
    Z, mlp_cache = nn.mlp_forward(params, psi)
    cache = {"mlp": mlp_cache, "widths": (Hf.shape[1], He.shape[1], Hc.shape[1]), "final": final, "pooling": pooling}
    if final:
        scores, arg_f = nn.segment_max_pool(Z, topo.coedge_face, topo.num_faces)
        cache["arg_f"] = arg_f
        cache["rows"] = Z.shape[0]
        return (scores, None, None), cache
    if Z.shape[1] != 3 * s:
        raise ValueError(f"hidden unit output width {Z.shape[1]} != 3s = {3 * s}")
    Hc_new, Zf, Ze = Z[:, :s], Z[:, s : 2 * s], Z[:, 2 * s :]
    if pooling:
        Hf_new, arg_f = nn.segment_max_pool(Zf, topo.coedge_face, topo.num_faces)
        He_new, arg_e = nn.segment_max_pool(Ze, topo.coedge_edge, topo.num_edges)
        cache["arg_f"], cache["arg_e"] = arg_f, arg_e
    else:
        # ablation: only the coedge states carry information forward
        Hf_new = np.zeros((topo.num_faces, s), dtype=Z.dtype)
        He_new = np.zeros((topo.num_edges, s), dtype=Z.dtype)
    cache["rows"] = Z.shape[0]
    return (Hf_new, He_new, Hc_new), cache


def conv_unit_backward(params: nn.MlpParams, ck: CompiledKernel, cache, dHf, dHe=None, dHc=None):
    """Reverse pass of :func:`conv_unit_forward`.

    Returns ``((dHf_in, dHe_in, dHc_in), param_grads)``.
    """
    rows = cache["rows"]
    if cache["final"]:
        dZ = nn.segment_max_pool_backward(dHf, cache["arg_f"], rows)
    else:
        parts = [dHc]
        if cache["pooling"]:
            parts.append(nn.segment_max_pool_backward(dHf, cache["arg_f"], rows))
            parts.append(nn.segment_max_pool_backward(dHe, cache["arg_e"], rows))
        else:
            s = dHc.shape[1]
            parts.extend([np.zeros((rows, s), dtype=dHc.dtype)] * 2)
        dZ = np.concatenate(parts, axis=1)
    dpsi, grads = nn.mlp_backward(params, cache["mlp"], dZ)
    wf, we, wc = cache["widths"]
    dHf_in = np.zeros((ck.topology.num_faces, wf), dtype=dpsi.dtype)
    dHe_in = np.zeros((ck.topology.num_edges, we), dtype=dpsi.dtype)
    dHc_in = np.zeros((ck.topology.num_coedges, wc), dtype=dpsi.dtype)
    col = 0
    for walks, width, target in ((ck.face, wf, dHf_in), (ck.edge, we, dHe_in), (ck.coedge, wc, dHc_in)):
        for w in walks:
            target += scatter_add(w, dpsi[:, col : col + width])
            col += width
    return (dHf_in, dHe_in, dHc_in), grads


def forward(model: BRepNetModel, ck: CompiledKernel, Xf, Xe, Xc, standardize=True, keep_cache=False):
    """Face scores ``|f| x u``; with ``keep_cache`` also the per-unit caches and states."""
    if ck.kernel != model.kernel:
        raise ValueError(f"inputs compiled for kernel {ck.kernel.name!r}, model uses {model.config.kernel!r}")
    widths = (FACE_WIDTH, EDGE_WIDTH, COEDGE_WIDTH)
    for X, w, name in zip((Xf, Xe, Xc), widths, ("face", "edge", "coedge")):
        if X.shape[1] != w:
            raise ValueError(f"{name} features have width {X.shape[1]}, model expects {w}")
    if standardize:
        Xf, Xe, Xc = model.scaler(Xf, Xe, Xc)
    dtype = np.dtype(model.config.dtype)
    H = (Xf.astype(dtype), Xe.astype(dtype), Xc.astype(dtype))
    caches, states = [], [H]
    s = model.config.hidden
    T = model.config.num_units
    for t in range(T):
        H, cache = conv_unit_forward(model.units[t], *H, ck, s, pooling=model.config.pooling)
        caches.append(cache)
        states.append(H)
    (scores, _, _), cache = conv_unit_forward(model.units[T], *H, ck, s, final=True)
    caches.append(cache)
    if keep_cache:
        return scores, {"caches": caches, "states": states}
    return scores


def backward(model: BRepNetModel, ck: CompiledKernel, tape, dscores) -> list[np.ndarray]:
    """Gradients for every parameter array, in ``model.parameters()`` order."""
    if tape is None or "caches" not in tape:
        raise ValueError("backward needs the cache from forward(..., keep_cache=True)")
    caches = tape["caches"]
    T = model.config.num_units
    per_unit = [None] * (T + 1)
    (dHf, dHe, dHc), per_unit[T] = conv_unit_backward(model.units[T], ck, caches[T], dscores)
    for t in range(T - 1, -1, -1):
        (dHf, dHe, dHc), per_unit[t] = conv_unit_backward(model.units[t], ck, caches[t], dHf, dHe, dHc)
    return [g for grads in per_unit for g in grads]


def loss_and_grads(model: BRepNetModel, batch, loss_scale: float = 1.0):
    ck = batch.compiled(model.kernel)
    scores, tape = forward(model, ck, batch.Xf, batch.Xe, batch.Xc, keep_cache=True)
    loss, dscores = nn.cross_entropy(scores, batch.labels)
    grads = backward(model, ck, tape, dscores * loss_scale)
    return loss * loss_scale, grads, scores


def classify_faces(model: BRepNetModel, batch) -> np.ndarray:
    """Per-face class scores for a batch (or anything with the same fields)."""
    return forward(model, batch.compiled(model.kernel), batch.Xf, batch.Xe, batch.Xc)


def gradient_check(model: BRepNetModel, batch, h: float = 1e-6, grad_fn=None) -> dict:
    """Compare analytic gradients with central finite differences.

    The error of each parameter block is ``||g - g_fd|| / max(||g||, ||g_fd||)``.
    ``grad_fn`` replaces the analytic gradient (used to test the checker).
    """
    model = model.copy()
    if np.dtype(model.config.dtype) != np.float64:
        raise ValueError("gradient checks need double precision")
    _, analytic, _ = (grad_fn or loss_and_grads)(model, batch)
    ck = batch.compiled(model.kernel)

    def loss_at():
        scores = forward(model, ck, batch.Xf, batch.Xe, batch.Xc)
        return nn.cross_entropy(scores, batch.labels)[0]

    blocks = {}
    for name, p, g in zip(model.parameter_names(), model.parameters(), analytic):
        numeric = np.zeros_like(p)
        flat, nflat = p.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss_at()
            flat[i] = old - h
            down = loss_at()
            flat[i] = old
            nflat[i] = (up - down) / (2 * h)
        denom = max(np.linalg.norm(g), np.linalg.norm(numeric))
        blocks[name] = 0.0 if denom == 0 else float(np.linalg.norm(g - numeric) / denom)
    worst = max(blocks.values())
    return {"max_rel_error": worst, "blocks": blocks}


# ---------------------------------------------------------------- model files

MAGIC = b"BRNMODEL"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sHQ")  # magic, version, header length
_DIGEST = 32


class ModelFormatError(ValueError):
    pass


class ModelVersionError(ModelFormatError):
    pass


class CorruptModelError(ModelFormatError):
    pass


class ChecksumError(CorruptModelError):
    pass


def save_model(model: BRepNetModel, path) -> Path:
    """Write ``magic | version | header length | JSON header | payload | sha256``.

    Arrays are stored column-major in the model dtype, in parameter order.
    """
    dtype = np.dtype(model.config.dtype).newbyteorder("<")
    arrays = model.parameters()
    header = {
        "format_version": FORMAT_VERSION,
        "config": asdict(model.config),
        "scaler": model.scaler.to_dict(),
        "init": "glorot_uniform",
        "dtype": dtype.str,
        "layout": "column-major",
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in zip(model.parameter_names(), arrays)],
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(hbytes)))
    buf.write(hbytes)
    for a in arrays:
        buf.write(np.asarray(a, dtype=dtype).tobytes(order="F"))
    body = buf.getvalue()
    path = Path(path)
    path.write_bytes(body + hashlib.sha256(body).digest())
    return path


def load_model(path) -> BRepNetModel:
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise CorruptModelError("file too short to be a model")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CorruptModelError("not a model file (bad magic)")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model format version {version}, this build reads {FORMAT_VERSION}")
    start = _PREFIX.size
    if len(data) < start + hlen + _DIGEST:
        raise CorruptModelError("truncated header")
    try:
        header = json.loads(data[start : start + hlen])
        config = ArchitectureConfig.from_dict(header["config"])
        scaler = FeatureScaler.from_dict(header["scaler"])
        dtype = np.dtype(header["dtype"])
        shapes = [tuple(a["shape"]) for a in header["arrays"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptModelError(f"unreadable header: {exc}") from exc
    payload_len = sum(int(np.prod(s)) for s in shapes) * dtype.itemsize
    end = start + hlen + payload_len
    if len(data) != end + _DIGEST:
        raise CorruptModelError(f"payload has {len(data) - start - hlen - _DIGEST} bytes, expected {payload_len}")
    if hashlib.sha256(data[:end]).digest() != data[end:]:
        raise ChecksumError("checksum mismatch")

    model = BRepNetModel.initialize(replace(config), scaler)
    params = model.parameters()
    if [p.shape for p in params] != shapes:
        raise CorruptModelError("stored array shapes do not match the architecture")
    offset = start + hlen
    for p, shape in zip(params, shapes):
        n = int(np.prod(shape)) * dtype.itemsize
        arr = np.frombuffer(data[offset : offset + n], dtype=dtype).reshape(shape, order="F")
        p[...] = arr
        offset += n
    return model
