"""Hand-differentiated multinomial softmax classifier and synthetic data.

The classifier computes ``W @ x.ravel() + b``. Every derivative used by the
attacks and the optimizer is written out explicitly so it can be checked
against finite differences.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .image import load_ppm, save_ppm

__all__ = [
    "SoftmaxClassifier",
    "LabeledDataset",
    "init_classifier",
    "logits",
    "softmax",
    "cross_entropy",
    "input_gradient",
    "param_gradient",
    "sgd_momentum_step",
    "predict",
    "synth_dataset",
    "save_model",
    "load_model",
    "model_to_csv",
    "save_dataset",
    "load_dataset",
]

_MAGIC = b"EFSM"
_VERSION = 1


@dataclass(frozen=True)
class SoftmaxClassifier:
    weights: np.ndarray  # (classes, H*W*C)
    bias: np.ndarray  # (classes,)
    input_shape: tuple

    def __post_init__(self):
        h, w, c = self.input_shape
        if self.weights.shape != (len(self.bias), h * w * c):
            raise ValueError(
                f"weights {self.weights.shape} inconsistent with input {self.input_shape}"
            )

    @property
    def class_count(self):
        return len(self.bias)


@dataclass
class LabeledDataset:
    images: np.ndarray  # (N, H, W, C)
    labels: np.ndarray  # (N,) int
    class_count: int
    filenames: Optional[list] = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError("label out of range")

    def __len__(self):
        return len(self.labels)

    def subset(self, index):
        names = None if self.filenames is None else list(np.asarray(self.filenames)[index])
        return LabeledDataset(self.images[index], self.labels[index], self.class_count, names)


def init_classifier(input_shape, class_count, rng, scale=0.01):
    h, w, c = input_shape
    weights = rng.uniform(-scale, scale, size=(class_count, h * w * c))
    bias = rng.uniform(-scale, scale, size=class_count)
    return SoftmaxClassifier(weights, bias, tuple(input_shape))


def _flat(model, image):
    if tuple(image.shape) != tuple(model.input_shape):
        raise ValueError(f"image shape {image.shape} does not match model {model.input_shape}")
    return image.reshape(-1)


def logits(model, image):
    return model.weights @ _flat(model, image) + model.bias


def softmax(z):
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(z):
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def cross_entropy(model, image, label):
    return float(-_log_softmax(logits(model, image))[label])


def input_gradient(model, image, label):
    """d cross_entropy / d image, shaped like the image."""
    p = softmax(logits(model, image))
    p[label] -= 1.0
    return (model.weights.T @ p).reshape(image.shape)


def predict(model, image):
    return int(np.argmax(logits(model, image)))


def param_gradient(model, images, labels):
    """Batch-mean gradient of the loss w.r.t. ``(weights, bias)``; also returns the loss."""
    images = np.asarray(images)
    if len(images) == 0:
        raise ValueError("empty batch")
    x = images.reshape(len(images), -1)
    z = x @ model.weights.T + model.bias
    logp = _log_softmax(z)
    rows = np.arange(len(labels))
    loss = float(-logp[rows, labels].mean())
    delta = np.exp(logp)
    delta[rows, labels] -= 1.0
    delta /= len(images)
    return (delta.T @ x, delta.sum(axis=0)), loss


def sgd_momentum_step(model, grads, velocity, lr, momentum, weight_decay):
    """One SGD step with heavy-ball momentum and L2 weight decay.

    ``g' = g + weight_decay * theta``; ``v = momentum * v + g'``; ``theta -= lr * v``.
    ``velocity`` may be ``None`` for a zero start. Returns ``(model, velocity)``.
    """
    params = (model.weights, model.bias)
    if velocity is None:
        velocity = tuple(np.zeros_like(p) for p in params)
    new_params, new_velocity = [], []
    for p, g, v in zip(params, grads, velocity):
        v = momentum * v + (g + weight_decay * p)
        new_velocity.append(v)
        new_params.append(p - lr * v)
    return SoftmaxClassifier(new_params[0], new_params[1], model.input_shape), tuple(new_velocity)


# ---------------------------------------------------------------------------
# synthetic benchmark

_SHAPES = ("square", "hbar", "vbar", "disk", "diamond", "cross")


def _shape_mask(kind, side, cy, cx):
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    dy, dx = np.abs(yy - cy), np.abs(xx - cx)
    r = side / 8
    if kind == "square":
        return (dy <= r) & (dx <= r)
    if kind == "hbar":
        return (dy <= r / 2.5) & (dx <= 1.5 * r)
    if kind == "vbar":
        return (dx <= r / 2.5) & (dy <= 1.5 * r)
    if kind == "disk":
        return dy * dy + dx * dx <= (1.2 * r) ** 2
    if kind == "diamond":
        return dy + dx <= 1.5 * r
    return ((dy <= r / 3) | (dx <= r / 3)) & (np.maximum(dy, dx) <= 1.5 * r)


def synth_dataset(class_count, per_class, side, rng, contrast=0.2, texture=0.015, noise=0.03):
    """Seeded toy stand-in for a natural-image benchmark.

    Each image is a small bright shape on a noisy gray background, plus a
    faint one-pixel checkerboard whose per-channel signs depend on the class.
    The shape (``contrast`` above the background) is the robust cue. The
    checkerboard (amplitude ``texture``) is spread over every pixel, so a
    plainly trained linear model leans on it, yet a perturbation of size
    ``texture`` erases it; it has no Sobel response and is blurred away by
    the transform. Colors, brightness, a +-``side // 32`` position jitter and
    the noise are drawn from ``rng`` in a fixed order, class by class.
    """
    if class_count < 2:
        raise ValueError("class_count must be at least 2")
    yy, xx = np.mgrid[0:side, 0:side]
    checker = np.where((yy + xx) % 2 == 0, 1.0, -1.0)
    jitter = max(1, side // 32)
    images, labels = [], []
    for c in range(class_count):
        kind = _SHAPES[c % len(_SHAPES)]
        signs = -np.ones(3)
        signs[c % 3] = 1.0
        if (c // 3) % 2:
            signs = -signs
        for _ in range(per_class):
            bg = rng.uniform(0.25, 0.45) + rng.uniform(-0.03, 0.03, size=3)
            fg = bg + rng.uniform(0.85 * contrast, 1.15 * contrast) + rng.uniform(-0.03, 0.03, size=3)
            cy, cx = (side - 1) / 2 + rng.integers(-jitter, jitter + 1, size=2)
            img = np.where(_shape_mask(kind, side, cy, cx)[:, :, None], fg, bg)
            img = img + noise * rng.standard_normal((side, side, 3))
            img = img + texture * checker[:, :, None] * signs
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(c)
    return LabeledDataset(np.stack(images), np.array(labels), class_count)


# ---------------------------------------------------------------------------
# persistence


def save_model(model, path):
    """Little-endian binary: magic, version, H, W, C, classes, weights, bias."""
    h, w, c = model.input_shape
    header = struct.pack("<4s5I", _MAGIC, _VERSION, h, w, c, model.class_count)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(model.bias, dtype="<f8").tobytes())


def load_model(path):
    with open(path, "rb") as f:
        buf = f.read()
    size = struct.calcsize("<4s5I")
    if len(buf) < size:
        raise ValueError(f"{path}: truncated model header")
    magic, version, h, w, c, k = struct.unpack_from("<4s5I", buf)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a model file")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    n = k * h * w * c
    data = np.frombuffer(buf, dtype="<f8", offset=size)
    if len(data) != n + k:
        raise ValueError(f"{path}: expected {n + k} parameters, found {len(data)}")
    weights = data[:n].reshape(k, h * w * c).astype(np.float64)
    bias = data[n:].astype(np.float64)
    return SoftmaxClassifier(weights, bias, (h, w, c))


def model_to_csv(model, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["class", "bias"] + [f"w{i}" for i in range(model.weights.shape[1])])
        for k in range(model.class_count):
            row = [model.bias[k]] + list(model.weights[k])
            writer.writerow([k] + [format(float(v), ".17g") for v in row])


def save_dataset(dataset, directory):
    """Write one PPM per image plus ``labels.csv`` (filename,label)."""
    os.makedirs(directory, exist_ok=True)
    width = max(5, len(str(len(dataset))))
    with open(os.path.join(directory, "labels.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["filename", "label"])
        for i, (img, label) in enumerate(zip(dataset.images, dataset.labels)):
            name = f"img_{i:0{width}d}.ppm"
            save_ppm(img, os.path.join(directory, name))
            writer.writerow([name, int(label)])


def load_dataset(directory, class_count=None):
    names, labels = [], []
    with open(os.path.join(directory, "labels.csv"), newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["filename", "label"]:
            raise ValueError(f"{directory}/labels.csv: expected header filename,label")
        for row in reader:
            if row:
                names.append(row[0])
                labels.append(int(row[1]))
    if not names:
        raise ValueError(f"{directory}: empty dataset")
    images = np.stack([load_ppm(os.path.join(directory, n)) for n in names])
    if class_count is None:
        class_count = max(labels) + 1
    return LabeledDataset(images, np.array(labels), class_count, names)
