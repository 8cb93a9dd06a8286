"""Training loop: Adam with L2 weight decay, cross-entropy objective, and
early stopping (patience 15) on a seeded 10% validation slice of the train
partition.  The returned model carries the best-validation-loss weights."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data import Dataset
from .layers import cross_entropy
from .network import ImpairmentNet, ModelConfig


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, history: List[Dict[str, float]]):
        self.epoch = epoch
        self.history = history
        super().__init__(f"non-finite loss at epoch {epoch}")


@dataclass
class TrainedModel:
    net: ImpairmentNet
    config: ModelConfig
    history: List[Dict[str, float]]
    best_epoch: int
    epochs_run: int

    def history_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for row in self.history:
            writer.writerow([int(row["epoch"]), f"{row['train_loss']:.8f}", f"{row['val_loss']:.8f}"])
        return buf.getvalue()


class Adam:
    def __init__(self, params, lr: float, weight_decay: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad + self.weight_decay * p.value
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def train(config: ModelConfig, dataset: Dataset, verbose: bool = False) -> TrainedModel:
    net = ImpairmentNet(config)
    opt = Adam(net.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    rng = np.random.default_rng([config.seed & 0xFFFFFFFF, 0x7121])

    train_idx = np.array(dataset.train_idx)
    n_val = max(1, int(round(config.val_fraction * len(train_idx))))
    shuffled = rng.permutation(train_idx)
    val_idx = shuffled[:n_val]
    fit_idx = shuffled[n_val:]
    if len(fit_idx) == 0:
        raise ValueError("train partition too small for a validation slice")

    left, right, labels = dataset.left_maps, dataset.right_maps, dataset.labels
    val_l, val_r, val_y = left[val_idx], right[val_idx], labels[val_idx]

    history: List[Dict[str, float]] = []
    best_val = math.inf
    best_epoch = -1
    best_state: Optional[Dict[str, np.ndarray]] = None

    for epoch in range(config.max_epochs):
        order = rng.permutation(fit_idx)
        batch_losses = []
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            net.zero_grad()
            logits = net.forward(left[idx], right[idx], train=True)
            loss, dlogits = cross_entropy(logits, labels[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, history)
            net.backward(dlogits)
            opt.step()
            batch_losses.append(loss * len(idx))
        train_loss = float(np.sum(batch_losses) / len(order))

        val_logits = net.forward(val_l, val_r, train=False)
        val_loss, _ = cross_entropy(val_logits, val_y)
        if not math.isfinite(val_loss):
            raise TrainingDiverged(epoch, history)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        if verbose:
            print(f"epoch {epoch:3d} train {train_loss:.4f} val {val_loss:.4f}")

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_state = {k: v.copy() for k, v in net.state_tensors().items()}
        elif epoch - best_epoch >= config.patience:
            break

    if best_state is not None:
        net.load_state(best_state)
    net.set_train(False)
    return TrainedModel(net=net, config=config, history=history, best_epoch=best_epoch, epochs_run=len(history))
