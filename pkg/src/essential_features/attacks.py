"""L-infinity PGD against a (possibly preprocessed) softmax classifier.

Gradient routes:

``direct``
    Gradient of the undefended loss; the transform is ignored when crafting.
``bpda_identity``
    Forward through the transform, backward as if it were the identity.
``bpda_ag``
    Forward through the transform; backward treats only the color reduction as
    the identity and differentiates the adaptive blur exactly, using the kernel
    selection recorded in the same forward pass.

Success is always judged through the defended forward pass.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._parallel import fan_out
from .blur import adaptive_blur_vjp
from .edges import mean_sobel_gradient
from .image import derive_seed, make_rng
from .model import cross_entropy, input_gradient, predict
from .pipeline import essential_features

__all__ = [
    "METHODS",
    "AttackSpec",
    "AttackResult",
    "pgd",
    "attack_dataset",
    "robust_accuracy",
    "epsilon_sweep",
    "robustness_report",
    "write_sweep_csv",
    "write_report_csv",
]

METHODS = ("direct", "bpda_identity", "bpda_ag")

# evaluation settings used for every reported attack column
DEFAULT_EPS = 0.031
DEFAULT_ALPHA = 0.007
DEFAULT_STEPS = 20


@dataclass(frozen=True)
class AttackSpec:
    method: str = "direct"
    epsilon: float = DEFAULT_EPS
    alpha: float = DEFAULT_ALPHA
    steps: int = DEFAULT_STEPS
    random_start: bool = False
    sobel_lambda: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown attack method {self.method!r}; choose from {METHODS}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.steps > 0 and self.alpha <= 0:
            raise ValueError("alpha must be positive when steps > 0")
        if self.sobel_lambda < 0:
            raise ValueError("sobel_lambda must be non-negative")


@dataclass
class AttackResult:
    adversarial: np.ndarray
    success: bool
    prediction: int
    loss_trace: list = field(default_factory=list)


def _defended(model, x, label, defense, seed):
    res = essential_features(x, defense, rng=make_rng(seed))
    return res, cross_entropy(model, res.output, label)


def _loss_and_grad(model, x, label, spec, defense, step):
    if spec.method == "direct":
        return cross_entropy(model, x, label), input_gradient(model, x, label)
    res, loss = _defended(model, x, label, defense, derive_seed(spec.seed, 1, step))
    g = input_gradient(model, res.output, label)
    if spec.method == "bpda_ag":
        g = adaptive_blur_vjp(g, res.selection, defense.ladder)
    return loss, g


def pgd(model, image, label, spec, defense=None):
    """Run PGD inside ``B_inf(image, eps) & [0, 1]``.

    ``defense`` is an :class:`~essential_features.pipeline.EFConfig` or
    ``None``. Each defended forward pass during the attack re-runs the
    transform with a k-means seed derived from ``spec.seed`` and the step
    index; the final success check uses ``spec.seed`` itself, matching
    :func:`essential_features.training.evaluate`.

    ``loss_trace`` holds the loss at every iterate, including the last.
    """
    if image.shape != tuple(model.input_shape):
        raise ValueError(f"image shape {image.shape} does not match model {model.input_shape}")
    if spec.method != "direct" and defense is None:
        raise ValueError(f"{spec.method} needs a defense to approximate")
    if defense is not None and not defense.emit_intermediates:
        defense = replace(defense, emit_intermediates=True)

    x0 = image
    lo = np.maximum(x0 - spec.epsilon, 0.0)
    hi = np.minimum(x0 + spec.epsilon, 1.0)
    x = x0.copy()
    if spec.random_start and spec.epsilon > 0:
        rng = make_rng(derive_seed(spec.seed, 2))
        x = np.clip(x0 + rng.uniform(-spec.epsilon, spec.epsilon, size=x0.shape), lo, hi)

    trace = []
    for step in range(spec.steps):
        loss, g = _loss_and_grad(model, x, label, spec, defense, step)
        trace.append(loss)
        if spec.sobel_lambda > 0:
            g = g + spec.sobel_lambda * mean_sobel_gradient(x)
        x = np.clip(x + spec.alpha * np.sign(g), lo, hi)

    if defense is None:
        trace.append(cross_entropy(model, x, label))
        pred = predict(model, x)
    else:
        res, loss = _defended(model, x, label, defense, spec.seed)
        if spec.method == "direct":
            trace.append(cross_entropy(model, x, label))
        else:
            trace.append(loss)
        pred = predict(model, res.output)
    return AttackResult(adversarial=x, success=pred != label, prediction=pred, loss_trace=trace)


def attack_dataset(model, dataset, spec, defense=None, threads=1):
    """Attack every example; example ``i`` uses seed ``derive_seed(spec.seed, i)``."""

    def one(i):
        spec_i = replace(spec, seed=derive_seed(spec.seed, i))
        return pgd(model, dataset.images[i], int(dataset.labels[i]), spec_i, defense)

    return fan_out(one, range(len(dataset)), threads)


def robust_accuracy(model, dataset, spec, defense=None, threads=1):
    results = attack_dataset(model, dataset, spec, defense, threads)
    return float(np.mean([not r.success for r in results]))


def epsilon_sweep(model, dataset, eps_list, spec_template, defense=None, threads=1, scale_alpha=True):
    """Robust accuracy for each radius in ``eps_list``.

    With ``scale_alpha`` the step size keeps the template's ``alpha / epsilon``
    ratio so that every radius is reachable within the step budget.
    """
    eps_list = list(eps_list)
    if not eps_list:
        raise ValueError("eps_list must not be empty")
    rows = []
    for eps in eps_list:
        alpha = spec_template.alpha
        if scale_alpha and spec_template.epsilon > 0 and eps > 0:
            alpha = spec_template.alpha * eps / spec_template.epsilon
        spec = replace(spec_template, epsilon=float(eps), alpha=alpha)
        rows.append((float(eps), robust_accuracy(model, dataset, spec, defense, threads)))
    return rows


def robustness_report(model, dataset, defense=None, seed=0, threads=1, spec=None):
    """Natural accuracy plus one robust-accuracy column per applicable attack.

    Returns rows ``{"column", "accuracy", "worst_flag"}``. The BPDA columns are
    only produced for a defended model; the worst attack column is flagged.
    """
    from .training import evaluate

    if spec is None:
        spec = AttackSpec(seed=seed)
    else:
        spec = replace(spec, seed=seed)
    columns = [("natural", evaluate(model, dataset, defense, seed=seed, threads=threads))]
    methods = (("pgd", "direct"),)
    if defense is not None:
        methods += (("bpda", "bpda_identity"), ("bpda_ag", "bpda_ag"))
    for name, method in methods:
        acc = robust_accuracy(model, dataset, replace(spec, method=method), defense, threads)
        columns.append((name, acc))
    worst = min(acc for name, acc in columns[1:])
    rows = []
    flagged = False
    for name, acc in columns:
        flag = name != "natural" and acc == worst and not flagged
        flagged = flagged or flag
        rows.append({"column": name, "accuracy": acc, "worst_flag": flag})
    return rows


def _fmt(v):
    return format(float(v), ".17g")


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epsilon", "accuracy"])
        for eps, acc in rows:
            writer.writerow([_fmt(eps), _fmt(acc)])


def write_report_csv(rows, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["column", "accuracy", "worst_flag"])
        for row in rows:
            writer.writerow([row["column"], _fmt(row["accuracy"]), int(row["worst_flag"])])
