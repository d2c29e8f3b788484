from dataclasses import replace

import numpy as np
import pytest

from essential_features.attacks import (
    AttackSpec,
    attack_dataset,
    epsilon_sweep,
    pgd,
    robust_accuracy,
    robustness_report,
    write_report_csv,
    write_sweep_csv,
)
from essential_features.blur import BlurLadder
from essential_features.image import make_rng
from essential_features.model import cross_entropy, init_classifier, predict, synth_dataset
from essential_features.pipeline import EFConfig, essential_features, preset
from essential_features.quantize import KMeansConfig
from essential_features.training import evaluate

SHAPE = (12, 12, 3)


@pytest.fixture(scope="module")
def setup():
    rng = make_rng(0)
    model = init_classifier(SHAPE, 3, rng, scale=0.2)
    ds = synth_dataset(3, 4, 12, make_rng(1))
    return model, ds


def test_spec_validation():
    for bad in (
        dict(method="fgsm"),
        dict(epsilon=-0.1),
        dict(epsilon=1.5),
        dict(steps=-1),
        dict(alpha=0.0),
        dict(sobel_lambda=-1),
    ):
        with pytest.raises(ValueError):
            AttackSpec(**bad)
    AttackSpec(alpha=0.0, steps=0)


def test_bpda_needs_defense(setup):
    model, ds = setup
    with pytest.raises(ValueError, match="defense"):
        pgd(model, ds.images[0], 0, AttackSpec(method="bpda_ag"))
    with pytest.raises(ValueError):
        pgd(model, np.zeros((4, 4, 3)), 0, AttackSpec())


@pytest.mark.parametrize("method, defended", [("direct", False), ("direct", True), ("bpda_identity", True), ("bpda_ag", True)])
def test_degenerate_budgets_return_input(setup, method, defended):
    model, ds = setup
    d = preset("cifar10") if defended else None
    x = ds.images[0]
    for spec in (AttackSpec(method=method, epsilon=0.0), AttackSpec(method=method, steps=0)):
        res = pgd(model, x, 0, spec, d)
        np.testing.assert_array_equal(res.adversarial, x)
        assert res.adversarial is not x
        clean_pred = predict(model, x if d is None else essential_features(x, d, make_rng(spec.seed)).output)
        assert res.success == (clean_pred != 0)
        assert len(res.loss_trace) == spec.steps + 1


@pytest.mark.parametrize("method", ["direct", "bpda_identity", "bpda_ag"])
def test_box_and_ball_constraints(setup, method):
    model, ds = setup
    d = preset("cifar10")
    for i, (x, y) in enumerate(zip(ds.images[:4], ds.labels[:4])):
        spec = AttackSpec(method=method, epsilon=0.05, alpha=0.02, steps=5, random_start=i % 2 == 1, sobel_lambda=0.5 * (i % 2), seed=i)
        adv = pgd(model, x, int(y), spec, d).adversarial
        assert np.max(np.abs(adv - x)) <= spec.epsilon + 1e-12
        assert adv.min() >= 0 and adv.max() <= 1


def test_direct_loss_trace_monotone_on_linear_model(setup):
    model, ds = setup
    for x, y in zip(ds.images, ds.labels):
        res = pgd(model, x, int(y), AttackSpec(epsilon=0.031, alpha=0.007, steps=20))
        trace = res.loss_trace
        assert len(trace) == 21
        assert all(b >= a - 1e-9 for a, b in zip(trace, trace[1:]))
        assert trace[-1] == pytest.approx(cross_entropy(model, res.adversarial, int(y)), abs=0)


def test_direct_attack_reaches_sign_corner_on_linear_model(setup):
    # for a 2-class linear model the gradient sign is constant, so enough steps land on
    # x0 + eps * sign(w_other - w_label), clipped to the box
    model, ds = setup
    two = replace(model, weights=model.weights[:2], bias=model.bias[:2])
    x = ds.images[0]
    res = pgd(two, x, 0, AttackSpec(epsilon=0.03, alpha=0.01, steps=5))
    want = np.clip(x + 0.03 * np.sign(two.weights[1] - two.weights[0]).reshape(x.shape), 0, 1)
    want = np.clip(want, np.maximum(x - 0.03, 0), np.minimum(x + 0.03, 1))
    np.testing.assert_allclose(res.adversarial, want, atol=1e-15)


def test_bpda_variants_coincide_with_identity_ladder(setup):
    model, ds = setup
    d = EFConfig(BlurLadder((1,), ()), KMeansConfig(k=8))
    for i in range(4):
        a = pgd(model, ds.images[i], int(ds.labels[i]), AttackSpec(method="bpda_identity", seed=i, steps=5), d)
        b = pgd(model, ds.images[i], int(ds.labels[i]), AttackSpec(method="bpda_ag", seed=i, steps=5), d)
        np.testing.assert_array_equal(a.adversarial, b.adversarial)
        assert a.loss_trace == b.loss_trace


def test_bpda_ag_differs_from_identity_with_real_ladder(setup):
    model, ds = setup
    d = preset("resisc45")
    a = pgd(model, ds.images[0], 0, AttackSpec(method="bpda_identity", steps=3), d)
    b = pgd(model, ds.images[0], 0, AttackSpec(method="bpda_ag", steps=3), d)
    assert not np.array_equal(a.adversarial, b.adversarial)


def test_sobel_term_pushes_edge_response_up(setup):
    from essential_features.edges import mean_sobel_response

    model, ds = setup
    zero = replace(model, weights=np.zeros_like(model.weights))  # isolate the Sobel term
    x = ds.images[1]
    adv = pgd(zero, x, 0, AttackSpec(sobel_lambda=1.0, steps=5, epsilon=0.05, alpha=0.01)).adversarial
    assert mean_sobel_response(adv) > mean_sobel_response(x)


def test_attacks_are_deterministic_and_thread_invariant(setup):
    model, ds = setup
    d = preset("cifar10")
    spec = AttackSpec(method="bpda_ag", steps=3, random_start=True, seed=4)
    a = attack_dataset(model, ds, spec, d, threads=1)
    b = attack_dataset(model, ds, spec, d, threads=3)
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra.adversarial, rb.adversarial)
        assert ra.loss_trace == rb.loss_trace


def test_zero_budget_accuracy_equals_evaluate(setup):
    model, ds = setup
    d = preset("cifar10")
    spec = AttackSpec(epsilon=0.0, steps=0, seed=9)
    assert robust_accuracy(model, ds, spec) == evaluate(model, ds)
    assert robust_accuracy(model, ds, spec, d) == evaluate(model, ds, d, seed=9)


def test_sweep(setup, tmp_path):
    model, ds = setup
    rows = epsilon_sweep(model, ds, [0, 0.05, 0.2], AttackSpec(steps=5))
    assert [r[0] for r in rows] == [0, 0.05, 0.2]
    assert rows[0][1] == evaluate(model, ds)
    assert rows[-1][1] <= rows[0][1]
    write_sweep_csv(rows, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "epsilon,accuracy" and len(lines) == 4
    with pytest.raises(ValueError):
        epsilon_sweep(model, ds, [], AttackSpec())


def test_sweep_alpha_scaling(setup):
    model, ds = setup
    sub = ds.subset([0])
    tmpl = AttackSpec(epsilon=0.031, alpha=0.007, steps=20)
    # with scaling, eps=0.062 behaves exactly like a doubled-alpha template
    scaled = epsilon_sweep(model, sub, [0.062], tmpl)[0][1]
    manual = robust_accuracy(model, sub, replace(tmpl, epsilon=0.062, alpha=0.014))
    assert scaled == manual


def test_report_columns(setup, tmp_path):
    model, ds = setup
    plain = robustness_report(model, ds)
    assert [r["column"] for r in plain] == ["natural", "pgd"]
    assert plain[1]["worst_flag"] and not plain[0]["worst_flag"]
    spec = AttackSpec(steps=2)
    rows = robustness_report(model, ds, preset("cifar10"), spec=spec)
    assert [r["column"] for r in rows] == ["natural", "pgd", "bpda", "bpda_ag"]
    attack_accs = [r["accuracy"] for r in rows[1:]]
    flagged = [r for r in rows if r["worst_flag"]]
    assert len(flagged) == 1 and flagged[0]["accuracy"] == min(attack_accs)
    write_report_csv(rows, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "column,accuracy,worst_flag" and len(lines) == 5
