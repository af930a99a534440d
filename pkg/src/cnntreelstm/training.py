"""Mini-batch AdaGrad training, evaluation, multi-run aggregation and
finite-difference gradient checking."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .embedding import apply_embedding_gradient
from .errors import ConfigError, DataError, NumericError
from .model import SentimentModel, Sample
from .numkernel import SeededRng
from .optim import AdaGradState, apply_l2
from .treebank import FINE_GRAINED, TaskSetting, extract_phrases

log = logging.getLogger(__name__)

SHUFFLE_STREAM = 11
DROPOUT_STREAM = 12


@dataclass(frozen=True)
class TrainConfig:
    model_lr: float = 0.01
    word_lr: float = 0.1
    l2: float = 1e-4
    batch_size: int = 25
    epochs: int = 60
    seed: int = 0
    setting: str = FINE_GRAINED
    conv_input_dropout: float = 0.5
    conv_output_dropout: float = 0.2
    output_dropout: float = 0.5

    def __post_init__(self):
        TaskSetting(self.setting)
        for name in ("model_lr", "word_lr", "conv_input_dropout", "conv_output_dropout", "output_dropout"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {value}")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be non-negative, got {self.l2}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")

    @property
    def task(self) -> TaskSetting:
        return TaskSetting(self.setting)


@dataclass
class RunResult:
    seed: int
    best_dev: float
    test: float
    best_epoch: int
    train_loss: list = field(default_factory=list)
    updates: int = 0


@dataclass
class RunReport:
    runs: list
    mean: float
    std: float
    max: float


def aggregate(accuracies: Sequence[float]) -> tuple[float, float, float]:
    """(mean, population std, max)."""
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.size == 0:
        raise ValueError("no runs to aggregate")
    return float(acc.mean()), float(acc.std()), float(acc.max())


def training_samples(model: SentimentModel, trees) -> list[Sample]:
    """Tree models train on whole sentences; the sequence model trains on
    every labelled phrase as its own sample."""
    if model.is_tree:
        return [model.prepare_tree(t) for t in trees]
    out = []
    for tree in trees:
        for tokens, label in extract_phrases(tree):
            out.append(model.prepare_tokens(tokens, label))
    return out


def evaluate(model: SentimentModel, samples: Sequence[Sample]) -> float:
    """Sentence-level accuracy: root argmax (lowest index on ties) vs gold root."""
    if not samples:
        return 0.0
    correct = sum(1 for s in samples if model.predict(s) == s.gold)
    return correct / len(samples)


def optimizer_step(model: SentimentModel, grads, emb_grads, opt: AdaGradState, config: TrainConfig):
    params = model.params()
    apply_l2(grads, params, config.l2)
    for name, theta in params.items():
        opt.step(name, theta, grads[name], config.model_lr)
    for ch, eg in zip(model.embedder.channels, emb_grads):
        idx, rows = eg.merged()
        if rows is not None:
            apply_embedding_gradient(ch, idx, rows, opt)


def train(model: SentimentModel, train_samples: Sequence[Sample], dev_samples: Sequence[Sample],
          test_samples: Sequence[Sample], config: TrainConfig,
          on_epoch: Optional[Callable] = None) -> RunResult:
    """Train in place. On return the model holds the best-dev parameters."""
    if not train_samples:
        raise DataError("empty training set")
    base = SeededRng(config.seed)
    shuffle_rng = base.derive(SHUFFLE_STREAM)
    dropout_rng = base.derive(DROPOUT_STREAM)
    for ch in model.embedder.channels:
        ch.learning_rate = config.word_lr
    opt = AdaGradState()
    best = (-1.0, 0, None)
    losses = []
    updates = 0
    n = len(train_samples)
    for epoch in range(1, config.epochs + 1):
        perm = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            grads, emb_grads = model.new_grads()
            batch_loss = 0.0
            for k in perm[start:start + config.batch_size]:
                batch_loss += model.accumulate(train_samples[k], grads, emb_grads, train=True, rng=dropout_rng)
            if not math.isfinite(batch_loss):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
            optimizer_step(model, grads, emb_grads, opt, config)
            updates += 1
            epoch_loss += batch_loss
        losses.append(epoch_loss)
        dev_acc = evaluate(model, dev_samples) if dev_samples else float("nan")
        if not dev_samples or dev_acc > best[0]:
            best = (dev_acc, epoch, model.snapshot())
        log.info("epoch %d loss %.6f dev %.4f", epoch, epoch_loss, dev_acc)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss, dev_acc)
    model.restore(best[2])
    test_acc = evaluate(model, test_samples) if test_samples else float("nan")
    return RunResult(config.seed, best[0], test_acc, best[1], losses, updates)


def run_protocol(runner: Callable[[int], RunResult], seed: int = 0, n_runs: int = 5) -> RunReport:
    """Call ``runner(seed + k)`` for k < n_runs and aggregate the test accuracies."""
    if n_runs < 1:
        raise ConfigError("n_runs must be >= 1")
    runs = [runner(seed + k) for k in range(n_runs)]
    mean, std, mx = aggregate([r.test for r in runs])
    return RunReport(runs, mean, std, mx)


def relative_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def gradient_check(loss_fn: Callable[[], float], tensors: dict, analytic: dict, eps: float = 1e-5):
    """Central differences over every scalar of ``tensors`` (perturbed in place).

    Returns (max relative error, {name: max relative error}).
    """
    per_tensor = {}
    for name, theta in tensors.items():
        numeric = np.zeros_like(theta)
        flat = theta.reshape(-1)
        if flat.base is None and theta.size:
            raise ValueError(f"{name}: tensor must be perturbable in place")
        out = numeric.reshape(-1)
        for i in range(flat.shape[0]):
            old = flat[i]
            flat[i] = old + eps
            up = loss_fn()
            flat[i] = old - eps
            down = loss_fn()
            flat[i] = old
            out[i] = (up - down) / (2.0 * eps)
        per_tensor[name] = float(relative_error(analytic[name], numeric).max()) if theta.size else 0.0
    worst = max(per_tensor.values()) if per_tensor else 0.0
    return worst, per_tensor


def model_gradient_check(model: SentimentModel, sample: Sample, eps=1e-5, train=True, seed=0):
    """Check every trainable scalar, embedding rows included. Dropout masks
    are held fixed by re-seeding the stream for each loss evaluation."""
    grads, emb_grads = model.new_grads()
    model.accumulate(sample, grads, emb_grads, train=train, rng=SeededRng(seed))
    tensors = dict(model.params())
    for ch, eg in zip(model.embedder.channels, emb_grads):
        key = f"embedding.{ch.name}"
        dense = np.zeros_like(ch.table)
        idx, rows = eg.merged()
        np.add.at(dense, idx, rows)
        grads[key] = dense
        tensors[key] = ch.table
    fault = model.fault
    model.fault = None
    try:
        return gradient_check(lambda: model.loss(sample, train, SeededRng(seed)), tensors, grads, eps)
    finally:
        model.fault = fault
