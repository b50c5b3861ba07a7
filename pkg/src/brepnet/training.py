"""Minibatch training with Adam and best-validation checkpointing."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, nn
from .data import LABELS, make_batches
from .features import fit_scaler
from .model import ArchitectureConfig, BRepNetModel, classify_faces, loss_and_grads, save_model
from .walks import KERNELS

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    dataset: str | None = None
    kernel: str = "winged_edge"
    hidden: int = 84
    num_units: int = 1
    epochs: int = 50
    face_budget: int = 1000
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    seed: int = 0
    output: str = "runs/latest"
    split_ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    split_file: str | None = None
    standardize_onehot: bool = True
    threads: int = 1

    def __post_init__(self):
        self.betas = tuple(self.betas)
        self.split_ratios = tuple(self.split_ratios)
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        for name in ("hidden", "face_budget", "threads"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or self.num_units < 0:
            raise ValueError("epochs and num_units must be non-negative")
        if not self.lr > 0 or not all(0 <= b < 1 for b in self.betas):
            raise ValueError("invalid optimizer settings")

    def architecture(self) -> ArchitectureConfig:
        return ArchitectureConfig(kernel=self.kernel, hidden=self.hidden, num_units=self.num_units, seed=self.seed)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float | None
    val_accuracy: float | None
    val_iou: float | None
    improved: bool


@dataclass
class EvalResult:
    loss: float
    tally: metrics.ConfusionTally
    predictions: dict = field(default_factory=dict)


def evaluate(model: BRepNetModel, records, face_budget=1000, threads=1, keep_predictions=False) -> EvalResult:
    """Pooled loss and confusion tally over ``records`` (unshuffled batches)."""
    batches = make_batches(records, face_budget, shuffle=False)

    def run(batch):
        scores = classify_faces(model, batch)
        loss = nn.cross_entropy(scores, batch.labels)[0] * batch.num_faces
        return batch, scores, loss

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(run, batches))
    tally = metrics.ConfusionTally(model.config.num_classes)
    total_loss, faces, predictions = 0.0, 0, {}
    for batch, scores, loss in results:
        metrics.accumulate(tally, scores, batch.labels)
        total_loss += loss
        faces += batch.num_faces
        if keep_predictions:
            pred = metrics.predict(scores)
            for rid, sl in zip(batch.ids, batch.face_slices()):
                predictions[rid] = pred[sl].tolist()
    return EvalResult(total_loss / max(faces, 1), tally, predictions)


def train(config: RunConfig, train_records, val_records=(), output=None, on_epoch=None):
    """Train from scratch; returns ``(best_model, history)``.

    If ``output`` is given the best checkpoint is written to
    ``output/model.brn`` whenever the validation loss improves (the training
    loss stands in when there is no validation set).
    """
    if not train_records:
        raise ValueError("no training solids")
    if any(r.labels is None for r in train_records):
        raise ValueError("training solids must be labelled")
    feats = [r.features() for r in train_records]
    scaler = fit_scaler(*zip(*feats), standardize_onehot=config.standardize_onehot)
    model = BRepNetModel.initialize(config.architecture(), scaler)
    best = model.copy()
    out = Path(output) if output is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_model(best, out / "model.brn")

    opt = nn.AdamState(lr=config.lr, betas=config.betas)
    params = model.parameters()
    history = []
    best_loss = np.inf
    for epoch in range(1, config.epochs + 1):
        batches = make_batches(train_records, config.face_budget, seed=config.seed + epoch)
        total, faces = 0.0, 0
        for batch in batches:
            loss, grads, _ = loss_and_grads(model, batch)
            nn.adam_step(opt, params, grads)
            total += loss * batch.num_faces
            faces += batch.num_faces
        train_loss = total / faces
        if val_records:
            res = evaluate(model, val_records, config.face_budget, config.threads)
            val_loss, val_acc, val_iou = res.loss, metrics.accuracy(res.tally), metrics.iou(res.tally)[1]
            monitored = val_loss
        else:
            val_loss = val_acc = val_iou = None
            monitored = train_loss
        improved = monitored < best_loss
        if improved:
            best_loss = monitored
            best = model.copy()
            if out is not None:
                save_model(best, out / "model.brn")
        stats = EpochStats(epoch, train_loss, val_loss, val_acc, val_iou, improved)
        history.append(stats)
        log.info("epoch %d train %.5f val %s", epoch, train_loss, val_loss)
        if on_epoch is not None:
            on_epoch(stats, model)
    return best, history


def write_history(history, directory) -> list[Path]:
    """Training log as JSON lines plus an SVG of the loss and IoU curves."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    log_path = directory / "train_log.jsonl"
    log_path.write_text("".join(json.dumps(asdict(h)) + "\n" for h in history))
    paths = [log_path]
    if history:
        paths.append(plot_history(history, directory / "curves.svg"))
    return paths


def plot_history(history, path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [h.epoch for h in history]
    fig, (ax_loss, ax_iou) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [h.train_loss for h in history], label="train")
    if history[0].val_loss is not None:
        ax_loss.plot(epochs, [h.val_loss for h in history], label="validation")
        ax_iou.plot(epochs, [h.val_iou for h in history], label="mean IoU")
        ax_iou.plot(epochs, [h.val_accuracy for h in history], label="accuracy")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("cross-entropy")
    ax_loss.legend()
    ax_iou.set_xlabel("epoch")
    ax_iou.set_ylim(0, 1)
    ax_iou.legend()
    fig.tight_layout()
    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "brepnet"}):  # stable element ids
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def class_names(u: int):
    return list(LABELS) if u == len(LABELS) else [str(i) for i in range(u)]
