"""Attack one test image with each gradient route and save what the model sees.

For every route the script writes the adversarial input and its transformed
version side by side (demos/output/gallery_<route>.ppm), and prints the loss
trajectory. The classifier is a quick plainly trained toy model, so this runs
in a few seconds; see benchmark_table.py for the adversarially trained one.

    python3 demos/attack_gallery.py
"""

from pathlib import Path

import numpy as np

from essential_features import AttackSpec, TrainConfig, essential_features, init_classifier, make_rng
from essential_features import pgd, preset, save_ppm, synth_dataset, train
from essential_features.edges import mean_sobel_response
from essential_features.model import predict

out = Path(__file__).parent / "output"
out.mkdir(exist_ok=True)

train_set = synth_dataset(3, 30, 32, make_rng(1))
model, _ = train(init_classifier((32, 32, 3), 3, make_rng(0)), train_set, TrainConfig(epochs=10, lr_schedule=((0, 0.003),)))
defense = preset("cifar10")

x = synth_dataset(3, 1, 32, make_rng(2)).images[1]
label = 1
clean_view = essential_features(x, defense).output
print(f"clean: raw prediction {predict(model, x)}, defended prediction {predict(model, clean_view)}")

routes = [
    ("direct", AttackSpec(method="direct"), None),
    ("direct_vs_defense", AttackSpec(method="direct"), defense),
    ("bpda", AttackSpec(method="bpda_identity"), defense),
    ("bpda_ag", AttackSpec(method="bpda_ag"), defense),
    ("bpda_ag_sobel", AttackSpec(method="bpda_ag", sobel_lambda=5.0), defense),
]
for name, spec, d in routes:
    res = pgd(model, x, label, spec, d)
    seen = essential_features(res.adversarial, d or defense).output
    save_ppm(np.concatenate([x, res.adversarial, seen], axis=1), out / f"gallery_{name}.ppm")
    trace = " ".join(f"{v:.2f}" for v in res.loss_trace[::5])
    print(
        f"{name:<18} success={str(res.success):<5} pred={res.prediction} "
        f"edge mean {mean_sobel_response(res.adversarial):.4f}  loss {trace}"
    )
