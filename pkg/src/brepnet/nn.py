"""Dense numpy building blocks with hand-written reverse passes.

Only five operation types appear in the network (gather, concatenate,
MLP, segment max-pool, softmax cross-entropy), so each has an explicit
backward function instead of a general autodiff tape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Layer:
    W: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray | None = None

    @property
    def shape(self):
        return self.W.shape


@dataclass
class MlpParams:
    layers: list[Layer]

    @property
    def in_width(self) -> int:
        return self.layers[0].W.shape[0]

    @property
    def out_width(self) -> int:
        return self.layers[-1].W.shape[1]

    def arrays(self):
        """Parameter arrays in a fixed order (W0, b0, W1, ...)."""
        out = []
        for layer in self.layers:
            out.append(layer.W)
            if layer.b is not None:
                out.append(layer.b)
        return out

    def array_names(self, prefix=""):
        names = []
        for k, layer in enumerate(self.layers):
            names.append(f"{prefix}W{k}")
            if layer.b is not None:
                names.append(f"{prefix}b{k}")
        return names

    def count(self) -> int:
        return sum(a.size for a in self.arrays())


def init_mlp(widths, rng: np.random.Generator, final_bias=True, dtype=np.float64) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        W = rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
        last = k == len(widths) - 2
        b = None if (last and not final_bias) else np.zeros(fan_out, dtype=dtype)
        layers.append(Layer(W, b))
    return MlpParams(layers)


def mlp_forward(params: MlpParams, X: np.ndarray):
    """Apply the MLP rowwise. Returns ``(output, cache)``.

    ReLU follows every layer except the last.
    """
    if X.ndim != 2 or X.shape[1] != params.in_width:
        raise ValueError(f"MLP expects input width {params.in_width}, got shape {X.shape}")
    inputs, pre = [], []
    h = X
    n = len(params.layers)
    for k, layer in enumerate(params.layers):
        inputs.append(h)
        a = h @ layer.W
        if layer.b is not None:
            a = a + layer.b
        pre.append(a)
        h = np.maximum(a, 0.0) if k < n - 1 else a
    return h, (inputs, pre)


def mlp_backward(params: MlpParams, cache, grad_out: np.ndarray):
    """Return ``(grad_input, [grads matching params.arrays()])``."""
    inputs, pre = cache
    grads = []
    g = grad_out
    n = len(params.layers)
    for k in range(n - 1, -1, -1):
        layer = params.layers[k]
        if k < n - 1:
            g = g * (pre[k] > 0)
        layer_grads = [inputs[k].T @ g]
        if layer.b is not None:
            layer_grads.append(g.sum(axis=0))
        grads[:0] = layer_grads
        g = g @ layer.W.T
    return g, grads


def segment_max_pool(Z: np.ndarray, segment_ids: np.ndarray, num_segments: int):
    """Columnwise max over the rows sharing a segment id.

    Returns ``(pooled, argmax)`` where ``argmax[j, k]`` is the row that won
    column ``k`` of segment ``j``. Ties go to the lowest row index.
    """
    Z = np.asarray(Z)
    seg = np.asarray(segment_ids, dtype=np.int64)
    if len(seg) != Z.shape[0]:
        raise ValueError("need one segment id per row")
    counts = np.bincount(seg, minlength=num_segments)
    if len(counts) > num_segments or np.any(counts == 0):
        raise ValueError("every segment must own at least one row")
    order = np.argsort(seg, kind="stable")
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    Zs = Z[order]
    pooled = np.maximum.reduceat(Zs, starts, axis=0)
    winners = Zs == pooled[seg[order]]
    rows = np.broadcast_to(order[:, None], Zs.shape)
    candidate = np.where(winners, rows, np.iinfo(np.int64).max)
    argmax = np.minimum.reduceat(candidate, starts, axis=0)
    return pooled, argmax


def segment_max_pool_backward(grad_pooled: np.ndarray, argmax: np.ndarray, num_rows: int) -> np.ndarray:
    out = np.zeros((num_rows, grad_pooled.shape[1]), dtype=grad_pooled.dtype)
    cols = np.broadcast_to(np.arange(grad_pooled.shape[1]), argmax.shape)
    np.add.at(out, (argmax, cols), grad_pooled)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over rows and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64)
    n, u = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if np.any((labels < 0) | (labels >= u)):
        raise ValueError(f"labels must lie in [0, {u})")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    log_p = z[np.arange(n), labels] - log_norm
    loss = float(-log_p.mean())
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


@dataclass
class AdamState:
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """One bias-corrected Adam update, applied in place to ``params``."""
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ValueError("parameter and gradient shapes differ")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    elif any(m.shape != p.shape for m, p in zip(state.m, params)) or len(state.m) != len(params):
        raise ValueError("optimizer state does not match parameters")
    b1, b2 = state.betas
    state.step += 1
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
