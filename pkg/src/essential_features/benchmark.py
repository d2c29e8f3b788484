"""The seeded desk-scale benchmark: one undefended and one defended toy model.

Both models see the same synthetic data (3 classes, 32x32, 150 train / 60
test) and start from the same initialization. The defended model is trained
adversarially, with BPDA+AG as the inner maximization, on transformed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .attacks import AttackSpec, epsilon_sweep, robust_accuracy, robustness_report
from .image import make_rng
from .model import init_classifier, synth_dataset
from .pipeline import preset
from .training import TrainConfig, evaluate, milestone_schedule, train

SIDE = 32
CLASSES = 3
TRAIN_PER_CLASS = 50
TEST_PER_CLASS = 20
SWEEP_EPS = (0.0, 0.031, 0.1, 0.3, 0.5)

UNDEFENDED_TRAINING = TrainConfig(lr_schedule=milestone_schedule(0.003, [15]), epochs=20, batch=16, seed=0)
DEFENDED_TRAINING = TrainConfig(lr_schedule=milestone_schedule(0.001, [7]), epochs=10, batch=16, seed=0)
INNER_ATTACK = AttackSpec(method="bpda_ag", steps=10)


@dataclass
class Benchmark:
    train_set: object
    test_set: object
    defense: object


def load_benchmark(preset_name="cifar10"):
    return Benchmark(
        train_set=synth_dataset(CLASSES, TRAIN_PER_CLASS, SIDE, make_rng(1)),
        test_set=synth_dataset(CLASSES, TEST_PER_CLASS, SIDE, make_rng(2)),
        defense=preset(preset_name),
    )


def _init():
    return init_classifier((SIDE, SIDE, 3), CLASSES, make_rng(0))


def train_undefended(bench, threads=1):
    model, _ = train(_init(), bench.train_set, UNDEFENDED_TRAINING, threads=threads)
    return model


def train_defended(bench, threads=1):
    model, _ = train(
        _init(), bench.train_set, DEFENDED_TRAINING, attack=INNER_ATTACK, preprocess=bench.defense, threads=threads
    )
    return model


def undefended_row(model, bench, threads=1):
    return {
        "natural": evaluate(model, bench.test_set, threads=threads),
        "pgd": robust_accuracy(model, bench.test_set, AttackSpec(), threads=threads),
    }


def defended_row(model, bench, threads=1):
    rows = robustness_report(model, bench.test_set, bench.defense, threads=threads)
    return {r["column"]: r["accuracy"] for r in rows}


def defended_sweep(model, bench, threads=1):
    return epsilon_sweep(
        model, bench.test_set, SWEEP_EPS, AttackSpec(method="bpda_ag"), bench.defense, threads=threads
    )
