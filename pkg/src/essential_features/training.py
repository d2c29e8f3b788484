"""Minibatch SGD training (optionally adversarial and/or in the transformed space)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from ._parallel import fan_out
from .attacks import pgd
from .image import derive_seed, horizontal_flip, make_rng, pad_and_random_crop
from .model import param_gradient, predict, sgd_momentum_step
from .pipeline import essential_features

__all__ = ["TrainConfig", "lr_at", "milestone_schedule", "train", "evaluate", "write_metrics_csv"]


@dataclass(frozen=True)
class TrainConfig:
    lr_schedule: tuple = ((0, 0.01),)  # (first epoch, learning rate) pairs
    momentum: float = 0.9
    weight_decay: float = 0.0002
    epochs: int = 10
    batch: int = 16
    augment: bool = False
    pad: int = 4
    pad_fill: str = "zero"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.epochs < 0 or self.batch < 1:
            raise ValueError("epochs must be >= 0 and batch >= 1")
        if not self.lr_schedule:
            raise ValueError("lr_schedule must not be empty")


def lr_at(schedule, epoch):
    """Learning rate of the last schedule entry starting at or before ``epoch``."""
    lr = schedule[0][1]
    for start, value in sorted(schedule):
        if start <= epoch:
            lr = value
    return lr


def milestone_schedule(lr, milestones, factor=0.1):
    """``lr`` divided by 10 (``factor``) at each milestone epoch."""
    schedule = [(0, lr)]
    for i, m in enumerate(sorted(milestones)):
        schedule.append((int(m), lr * factor ** (i + 1)))
    return tuple(schedule)


def train(model, dataset, cfg, attack=None, preprocess=None, threads=1):
    """Train ``model`` and return ``(model, metrics)``.

    Per batch: optional augmentation (coin-flip horizontal flip, then
    pad-and-crop), optional inner maximization with ``attack`` (an
    :class:`~essential_features.attacks.AttackSpec`), optional transform with
    ``preprocess``, then one SGD-momentum step. ``metrics`` has one dict per
    epoch with the learning rate, mean loss and accuracy on the inputs the
    model was updated on.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    rng = make_rng(cfg.seed)
    velocity = None
    metrics = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        lr = lr_at(cfg.lr_schedule, epoch)
        perm = rng.permutation(n)
        total_loss, correct = 0.0, 0
        for start in range(0, n, cfg.batch):
            idx = perm[start : start + cfg.batch]
            xs = dataset.images[idx]
            ys = dataset.labels[idx]
            if cfg.augment:
                xs = np.stack(
                    [
                        pad_and_random_crop(
                            horizontal_flip(x) if rng.random() < 0.5 else x, cfg.pad, rng, cfg.pad_fill
                        )
                        for x in xs
                    ]
                )

            def inner(j, epoch=epoch, xs=xs, ys=ys, idx=idx, model=model):
                x, y, i = xs[j], int(ys[j]), int(idx[j])
                if attack is not None:
                    spec = replace(attack, seed=derive_seed(cfg.seed, epoch, i, 1))
                    x = pgd(model, x, y, spec, defense=preprocess).adversarial
                if preprocess is not None:
                    x = essential_features(x, preprocess, rng=make_rng(derive_seed(cfg.seed, epoch, i, 2))).output
                return x

            if attack is not None or preprocess is not None:
                xs = np.stack(fan_out(inner, range(len(idx)), threads))
            correct += sum(int(predict(model, x) == y) for x, y in zip(xs, ys))
            grads, loss = param_gradient(model, xs, ys)
            total_loss += loss * len(idx)
            model, velocity = sgd_momentum_step(model, grads, velocity, lr, cfg.momentum, cfg.weight_decay)
        metrics.append({"epoch": epoch, "lr": lr, "loss": total_loss / n, "accuracy": correct / n})
    return model, metrics


def evaluate(model, dataset, preprocess=None, seed=0, threads=1):
    """Fraction of correct argmax predictions, optionally after the transform.

    Example ``i`` is transformed with k-means seed ``derive_seed(seed, i)``.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")

    def one(i):
        x = dataset.images[i]
        if preprocess is not None:
            x = essential_features(x, preprocess, rng=make_rng(derive_seed(seed, i))).output
        return predict(model, x) == int(dataset.labels[i])

    return float(np.mean(fan_out(one, range(len(dataset)), threads)))


def write_metrics_csv(metrics, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "lr", "loss", "accuracy"])
        for m in metrics:
            writer.writerow([m["epoch"]] + [format(float(m[k]), ".17g") for k in ("lr", "loss", "accuracy")])
