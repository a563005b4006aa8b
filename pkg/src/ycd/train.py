"""Transfer-learning head trainer and evaluator.

The backbone stays frozen: images are reduced to pooled embeddings once, and
mini-batch SGD with momentum trains only the dense softmax head on top. The
loop is sequential and seeded, so a (embeddings, labels, config) triple
always produces bitwise-identical weights.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import data as data_mod
from . import model as model_mod
from .data import DatasetManifest, TEST, TRAIN
from .model import ModelBundle
from .ops import softmax_batch


class TrainingError(RuntimeError):
    """Training preconditions violated or the loss diverged."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 0.01
    momentum: float = 0.9
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.momentum < 0:
            raise ValueError(f"momentum must be >= 0, got {self.momentum}")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    loss: float
    train_accuracy: float
    test_accuracy: float | None = None


@dataclass(frozen=True)
class ClassAccuracy:
    label: str
    accuracy: float | None
    samples: int


@dataclass(frozen=True)
class EvalReport:
    per_class: tuple[ClassAccuracy, ...]
    overall_accuracy: float
    confusion: tuple[tuple[int, ...], ...]  # rows = true class, bundle label order
    labels: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "overall_accuracy": self.overall_accuracy,
            "per_class": [
                {"label": c.label, "accuracy": c.accuracy, "samples": c.samples}
                for c in self.per_class
            ],
            "confusion": [list(row) for row in self.confusion],
        }


@dataclass(frozen=True)
class EmbeddingSet:
    """Embeddings extracted for one split, in manifest order."""

    embeddings: np.ndarray  # (n, embedding_dim) float32
    label_indices: np.ndarray  # (n,) int64, indices into `labels`
    labels: tuple[str, ...]
    failures: tuple[tuple[str, str], ...] = ()  # (path, reason)


def extract_embeddings(
    bundle: ModelBundle, manifest: DatasetManifest, split: str | None
) -> EmbeddingSet:
    """Run every selected image through the frozen backbone.

    Decode failures do not abort the run; they are collected in the result's
    `failures` list and the corresponding rows are skipped.
    """
    label_to_idx = {label: i for i, label in enumerate(bundle.labels)}
    for label in manifest.classes:
        if label not in label_to_idx:
            raise TrainingError(f"manifest class {label!r} is not a bundle label")
    resolution = bundle.arch.effective_resolution
    rows: list[np.ndarray] = []
    indices: list[int] = []
    failures: list[tuple[str, str]] = []
    for entry in manifest.select(split):
        try:
            image = data_mod.load_and_preprocess(entry.path, resolution)
        except data_mod.DataError as exc:
            failures.append((entry.path, str(exc)))
            continue
        rows.append(model_mod.embed(bundle, image))
        indices.append(label_to_idx[entry.label])
    if rows:
        matrix = np.stack(rows).astype(np.float32)
    else:
        matrix = np.zeros((0, bundle.arch.embedding_dim), dtype=np.float32)
    return EmbeddingSet(
        embeddings=matrix,
        label_indices=np.asarray(indices, dtype=np.int64),
        labels=bundle.labels,
        failures=tuple(failures),
    )


def _epoch_permutations(
    rng: np.random.Generator, n: int, epochs: int
) -> Iterable[np.ndarray]:
    for _ in range(epochs):
        yield rng.permutation(n)


def train_head(
    embeddings: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    num_classes: int | None = None,
    test_embeddings: np.ndarray | None = None,
    test_labels: np.ndarray | None = None,
    permutations: Sequence[np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, list[EpochMetrics]]:
    """SGD-with-momentum softmax regression on frozen embeddings.

    The head starts at zero. Each epoch shuffles with the seeded generator
    (or uses the explicit per-epoch `permutations` override, a hook for
    visitation-order experiments), walks mini-batches of `cfg.batch_size`
    (last batch may be short), and records mean loss plus accuracy over the
    predictions made during the epoch.

    Returns (weight (M, K) float64, bias (K,) float64, metrics per epoch).
    """
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise TrainingError(f"embeddings {x.shape} / labels {y.shape} disagree")
    n, dim = x.shape
    if n == 0:
        raise TrainingError("no training samples")
    k = int(num_classes) if num_classes is not None else int(y.max()) + 1
    present = np.bincount(y, minlength=k)
    if (present == 0).any():
        missing = int(np.flatnonzero(present == 0)[0])
        raise TrainingError(f"class {missing} has zero training samples")

    w = np.zeros((dim, k), dtype=np.float64)
    b = np.zeros(k, dtype=np.float64)
    vel_w = np.zeros_like(w)
    vel_b = np.zeros_like(b)
    onehot = np.eye(k, dtype=np.float64)

    if permutations is None:
        rng = np.random.default_rng(cfg.shuffle_seed)
        perms: Iterable[np.ndarray] = _epoch_permutations(rng, n, cfg.epochs)
    else:
        if len(permutations) != cfg.epochs:
            raise TrainingError(
                f"{len(permutations)} permutations given for {cfg.epochs} epochs"
            )
        perms = permutations

    metrics: list[EpochMetrics] = []
    for epoch, perm in enumerate(perms, start=1):
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            logits = xb @ w + b
            probs = softmax_batch(logits)
            batch_losses = -np.log(probs[np.arange(len(idx)), yb] + 1e-12)
            loss_sum += float(batch_losses.sum())
            correct += int((np.argmax(probs, axis=1) == yb).sum())
            grad_logits = (probs - onehot[yb]) / len(idx)
            grad_w = xb.T @ grad_logits
            grad_b = grad_logits.sum(axis=0)
            vel_w = cfg.momentum * vel_w + grad_w
            vel_b = cfg.momentum * vel_b + grad_b
            w -= cfg.learning_rate * vel_w
            b -= cfg.learning_rate * vel_b
        mean_loss = loss_sum / n
        if not math.isfinite(mean_loss):
            raise TrainingError(
                f"loss diverged at epoch {epoch} (mean loss {mean_loss}); "
                f"lower the learning rate"
            )
        test_acc = None
        if test_embeddings is not None and len(test_embeddings):
            test_acc = _accuracy(np.asarray(test_embeddings, np.float64),
                                 np.asarray(test_labels, np.int64), w, b)
        metrics.append(EpochMetrics(
            epoch=epoch,
            loss=mean_loss,
            train_accuracy=correct / n,
            test_accuracy=test_acc,
        ))
    return w, b, metrics


def _accuracy(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: np.ndarray) -> float:
    predictions = np.argmax(x @ w + b, axis=1)
    return float((predictions == y).mean())


def evaluate(bundle: ModelBundle, manifest: DatasetManifest, split: str | None = TEST) -> EvalReport:
    """Argmax classification over a split; ties break toward the lowest class index."""
    entries = manifest.select(split)
    if not entries:
        raise TrainingError(f"no entries in split {split!r}")
    label_to_idx = {label: i for i, label in enumerate(bundle.labels)}
    for label in manifest.classes:
        if label not in label_to_idx:
            raise TrainingError(f"manifest class {label!r} is not a bundle label")
    k = bundle.num_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    resolution = bundle.arch.effective_resolution
    for entry in entries:
        image = data_mod.load_and_preprocess(entry.path, resolution)
        _, probs = model_mod.forward(bundle, image)
        predicted = int(np.argmax(probs))
        confusion[label_to_idx[entry.label], predicted] += 1
    per_class = []
    for i, label in enumerate(bundle.labels):
        row_sum = int(confusion[i].sum())
        acc = float(confusion[i, i] / row_sum) if row_sum else None
        per_class.append(ClassAccuracy(label=label, accuracy=acc, samples=row_sum))
    total = int(confusion.sum())
    overall = float(np.trace(confusion) / total)
    return EvalReport(
        per_class=tuple(per_class),
        overall_accuracy=overall,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        labels=bundle.labels,
    )


@dataclass(frozen=True)
class SweepRow:
    batch_size: int
    final_train_accuracy: float
    final_test_accuracy: float | None


def batch_size_sweep(
    embeddings: np.ndarray,
    labels: np.ndarray,
    sizes: Sequence[int],
    cfg: TrainConfig,
    num_classes: int | None = None,
    test_embeddings: np.ndarray | None = None,
    test_labels: np.ndarray | None = None,
) -> list[SweepRow]:
    """Train one head per batch size with identical seeds; report final accuracies."""
    if not sizes:
        raise TrainingError("sizes must be non-empty")
    rows = []
    for size in sizes:
        run_cfg = TrainConfig(
            epochs=cfg.epochs,
            batch_size=int(size),
            learning_rate=cfg.learning_rate,
            momentum=cfg.momentum,
            shuffle_seed=cfg.shuffle_seed,
        )
        _, _, metrics = train_head(
            embeddings, labels, run_cfg,
            num_classes=num_classes,
            test_embeddings=test_embeddings,
            test_labels=test_labels,
        )
        rows.append(SweepRow(
            batch_size=int(size),
            final_train_accuracy=metrics[-1].train_accuracy,
            final_test_accuracy=metrics[-1].test_accuracy,
        ))
    return rows


def write_metrics_csv(metrics: Sequence[EpochMetrics], path) -> None:
    """epoch,loss,train_acc,test_acc rows; floats via repr so files are reproducible."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss", "train_acc", "test_acc"])
        for m in metrics:
            writer.writerow([
                m.epoch,
                repr(m.loss),
                repr(m.train_accuracy),
                "" if m.test_accuracy is None else repr(m.test_accuracy),
            ])


def write_eval_json(report: EvalReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=1), encoding="utf-8")


@dataclass(frozen=True)
class TrainResult:
    bundle: ModelBundle
    metrics: list[EpochMetrics]
    train_failures: tuple[tuple[str, str], ...]
    test_failures: tuple[tuple[str, str], ...]


def train_bundle(
    manifest: DatasetManifest,
    arch,
    cfg: TrainConfig,
    init_seed: int = 0,
) -> TrainResult:
    """End-to-end: seeded backbone, embedding extraction, head training.

    The manifest must already carry a split; per-epoch test accuracy is
    computed when the test split is non-empty.
    """
    bundle = model_mod.new_bundle(arch, manifest.classes, init_seed)
    train_set = extract_embeddings(bundle, manifest, TRAIN)
    test_set = extract_embeddings(bundle, manifest, TEST)
    has_test = len(test_set.embeddings) > 0
    w, b, metrics = train_head(
        train_set.embeddings,
        train_set.label_indices,
        cfg,
        num_classes=bundle.num_classes,
        test_embeddings=test_set.embeddings if has_test else None,
        test_labels=test_set.label_indices if has_test else None,
    )
    trained = model_mod.with_head(bundle, w.astype(np.float32), b.astype(np.float32))
    return TrainResult(
        bundle=trained,
        metrics=metrics,
        train_failures=train_set.failures,
        test_failures=test_set.failures,
    )
