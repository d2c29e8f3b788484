"""``ef`` command line: transform, attack, train, eval, sweep, synth.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error. Every random
choice is seeded from ``--seed`` (default: ``$EF_SEED``, else 0), and results
do not depend on ``--threads``.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from .attacks import (
    AttackSpec,
    attack_dataset,
    epsilon_sweep,
    robustness_report,
    write_report_csv,
    write_sweep_csv,
)
from .blur import BlurLadder
from .image import PPMFormatError, derive_seed, load_ppm, make_rng, save_ppm
from .model import init_classifier, load_dataset, load_model, save_dataset, save_model, synth_dataset
from .pipeline import PRESETS, essential_features, preset
from .quantize import save_palette_csv
from .training import TrainConfig, milestone_schedule, train, write_metrics_csv

METHOD_NAMES = {"direct": "direct", "bpda": "bpda_identity", "bpda-ag": "bpda_ag"}


class UsageError(Exception):
    pass


def _fmt(v):
    return format(float(v), ".17g")


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _default_seed():
    raw = os.environ.get("EF_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"ef: EF_SEED must be an integer, got {raw!r}") from None


def _common(parser):
    parser.add_argument("--seed", type=int, default=None, help="master seed (default $EF_SEED or 0)")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")
    parser.add_argument("--preset", choices=sorted(PRESETS), default="cifar10", help="transform settings")
    parser.add_argument("--invert-ladder", action="store_true", help="strong edges get the largest kernel")
    parser.add_argument("--pooled-selection", action="store_true", help="choose kernels from the channel-max edge map")


def _preset(args, name):
    cfg = preset(name, seed=args.seed)
    return replace(cfg, invert_ladder=args.invert_ladder, pooled_selection=args.pooled_selection)


def _attack_flags(parser, steps=20):
    parser.add_argument("--eps", type=float, default=0.031)
    parser.add_argument("--alpha", type=float, default=0.007)
    parser.add_argument("--steps", type=int, default=steps)
    parser.add_argument("--random-start", action="store_true")
    parser.add_argument("--sobel-lambda", type=float, default=0.0)


def _defense_flag(parser):
    parser.add_argument(
        "--defense",
        nargs="?",
        const="",
        default=None,
        metavar="PRESET",
        help="evaluate through the transform (bare flag: use --preset)",
    )


def _resolve_defense(args):
    if args.defense is None:
        return None
    name = args.defense or args.preset
    if name not in PRESETS:
        raise UsageError(f"unknown defense preset {name!r}; choose from {sorted(PRESETS)}")
    return _preset(args, name)


def _attack_spec(args, method):
    try:
        return AttackSpec(
            method=method,
            epsilon=args.eps,
            alpha=args.alpha,
            steps=args.steps,
            random_start=args.random_start,
            sobel_lambda=args.sobel_lambda,
            seed=args.seed,
        )
    except ValueError as err:
        raise UsageError(str(err)) from None


def _load_model_and_data(args):
    model = load_model(args.model)
    data = load_dataset(args.data, class_count=model.class_count)
    if data.images.shape[1:] != tuple(model.input_shape):
        raise ValueError(f"dataset images {data.images.shape[1:]} do not match model input {model.input_shape}")
    return model, data


# ---------------------------------------------------------------------------
# subcommands


def cmd_transform(args):
    cfg = _preset(args, args.preset)
    if args.kernels is not None or args.thresholds is not None:
        sizes = tuple(args.kernels) if args.kernels is not None else cfg.ladder.sizes
        if args.thresholds is not None:
            thresholds = tuple(t / 255 for t in args.thresholds)
        elif len(sizes) == len(cfg.ladder.sizes):
            thresholds = cfg.ladder.thresholds
        else:
            raise UsageError("--kernels with a different length needs matching --thresholds")
        try:
            ladder = BlurLadder(sizes, thresholds)
        except ValueError as err:
            raise UsageError(str(err)) from None
        cfg = replace(cfg, ladder=ladder)
    if args.k is not None:
        if args.k < 1:
            raise UsageError("--k must be positive")
        cfg = replace(cfg, kmeans=replace(cfg.kmeans, k=args.k))

    image = load_ppm(args.input)
    if image.shape[2] != 3:
        raise ValueError(f"{args.input}: the transform needs a color (P6) image")
    res = essential_features(image, cfg)
    save_ppm(res.output, args.output)
    if args.dump_edges:
        edges = np.clip(res.edge_map, 0.0, 1.0)
        save_ppm(_collapse(edges, args.dump_edges, np.max), args.dump_edges)
    if args.dump_selection:
        # gray level = kernel size / 255
        sel = res.selection.astype(np.float64) / 255
        save_ppm(_collapse(sel, args.dump_selection, np.min), args.dump_selection)
    if args.dump_palette:
        save_palette_csv(res.palette, args.dump_palette)
    return 0


def _collapse(image, path, reducer):
    """Single-channel copy for ``.pgm`` targets, full color otherwise."""
    if str(path).lower().endswith(".pgm"):
        return reducer(image, axis=2, keepdims=True)
    return image


def cmd_attack(args):
    method = METHOD_NAMES[args.method]
    defense = _resolve_defense(args)
    if method != "direct" and defense is None:
        raise UsageError(f"--method {args.method} needs --defense")
    spec = _attack_spec(args, method)
    model, data = _load_model_and_data(args)
    results = attack_dataset(model, data, spec, defense, threads=args.threads)
    names = data.filenames or [f"{i}" for i in range(len(data))]
    if args.out_csv:
        with open(args.out_csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["filename", "label", "prediction", "success", "linf", "final_loss"])
            for name, x, y, r in zip(names, data.images, data.labels, results):
                linf = float(np.max(np.abs(r.adversarial - x)))
                writer.writerow([name, int(y), r.prediction, int(r.success), _fmt(linf), _fmt(r.loss_trace[-1])])
    if args.dump_adv:
        os.makedirs(args.dump_adv, exist_ok=True)
        for i, r in enumerate(results):
            save_ppm(r.adversarial, os.path.join(args.dump_adv, f"adv_{i:05d}.ppm"))
            if defense is not None:
                seed = derive_seed(spec.seed, i)
                out = essential_features(r.adversarial, defense, rng=make_rng(seed)).output
                save_ppm(out, os.path.join(args.dump_adv, f"ef_{i:05d}.ppm"))
    acc = float(np.mean([not r.success for r in results]))
    print(f"robust_accuracy {_fmt(acc)}")
    return 0


def cmd_train(args):
    defense = _resolve_defense(args)
    attack = None
    if args.adv_train != "none":
        method = METHOD_NAMES[args.adv_train]
        if method != "direct" and defense is None:
            raise UsageError(f"--adv-train {args.adv_train} needs --defense")
        attack = _attack_spec(args, method)
    try:
        cfg = TrainConfig(
            lr_schedule=milestone_schedule(args.lr, args.lr_milestones),
            momentum=args.momentum,
            weight_decay=args.weight_decay,
            epochs=args.epochs,
            batch=args.batch,
            augment=args.augment,
            pad=args.pad,
            seed=args.seed,
        )
    except ValueError as err:
        raise UsageError(str(err)) from None
    data = load_dataset(args.data, class_count=args.classes)
    model = init_classifier(data.images.shape[1:], data.class_count, make_rng(derive_seed(args.seed, 0)))
    model, metrics = train(model, data, cfg, attack=attack, preprocess=defense, threads=args.threads)
    save_model(model, args.out_model)
    if args.metrics_csv:
        write_metrics_csv(metrics, args.metrics_csv)
    for m in metrics:
        print(f"epoch {m['epoch']} lr {m['lr']:.3g} loss {m['loss']:.6f} accuracy {m['accuracy']:.4f}")
    return 0


def cmd_eval(args):
    defense = _resolve_defense(args)
    spec = _attack_spec(args, "direct")
    model, data = _load_model_and_data(args)
    rows = robustness_report(model, data, defense, seed=args.seed, threads=args.threads, spec=spec)
    if args.out_csv:
        write_report_csv(rows, args.out_csv)
    for row in rows:
        mark = " *" if row["worst_flag"] else ""
        print(f"{row['column']:<8} {row['accuracy']:.4f}{mark}")
    return 0


def cmd_sweep(args):
    method = METHOD_NAMES[args.method]
    defense = _resolve_defense(args)
    if method != "direct" and defense is None:
        raise UsageError(f"--method {args.method} needs --defense")
    if not args.eps_list or any(not 0 <= e <= 1 for e in args.eps_list):
        raise UsageError("--eps-list needs values in [0, 1]")
    spec = _attack_spec(args, method)
    model, data = _load_model_and_data(args)
    rows = epsilon_sweep(
        model, data, args.eps_list, spec, defense, threads=args.threads, scale_alpha=not args.fixed_alpha
    )
    if args.out_csv:
        write_sweep_csv(rows, args.out_csv)
    for eps, acc in rows:
        print(f"eps {eps:g} accuracy {acc:.4f}")
    return 0


def cmd_synth(args):
    if args.classes < 2 or args.per_class < 1 or args.side < 4:
        raise UsageError("need --classes >= 2, --per-class >= 1 and --side >= 4")
    data = synth_dataset(args.classes, args.per_class, args.side, make_rng(args.seed))
    save_dataset(data, args.out)
    print(f"wrote {len(data)} images to {args.out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="ef", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="apply the preprocessing transform to one image")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--kernels", type=_int_list, help="odd kernel sizes, e.g. 3,7,13")
    p.add_argument("--thresholds", type=_float_list, help="edge thresholds on the 0-255 scale, e.g. 25,55")
    p.add_argument("--k", type=int, help="palette size")
    p.add_argument("--dump-edges")
    p.add_argument("--dump-selection")
    p.add_argument("--dump-palette")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("attack", help="run PGD on every image of a dataset")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=sorted(METHOD_NAMES), default="direct")
    _attack_flags(p)
    _defense_flag(p)
    p.add_argument("--out-csv")
    p.add_argument("--dump-adv")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("train", help="train the softmax classifier")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--metrics-csv")
    p.add_argument("--classes", type=int, help="class count (default: largest label + 1)")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--lr-milestones", type=_int_list, default=[], help="epochs where lr is divided by 10")
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=0.0002)
    p.add_argument("--augment", action="store_true", help="random flip plus pad-and-crop")
    p.add_argument("--pad", type=int, default=4)
    p.add_argument("--adv-train", choices=["none", "direct", "bpda-ag"], default="none")
    _attack_flags(p, steps=10)
    _defense_flag(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="natural and robust accuracy table")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    _attack_flags(p)
    _defense_flag(p)
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="robust accuracy over several radii")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--eps-list", type=_float_list, default=[0, 0.031, 0.1, 0.3, 0.5])
    p.add_argument("--method", choices=sorted(METHOD_NAMES), default="direct")
    _attack_flags(p)
    p.add_argument("--fixed-alpha", action="store_true", help="keep --alpha for every radius")
    _defense_flag(p)
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a seeded synthetic dataset")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--side", type=int, default=32)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as err:
        parser.error(str(err))
    except (OSError, PPMFormatError, ValueError) as err:
        print(f"ef: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
