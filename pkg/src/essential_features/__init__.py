"""Content-aware image preprocessing defense (adaptive Sobel-thresholded
Gaussian blur followed by k-means color reduction), its differentiable
approximations, L-infinity PGD attacks and a toy adversarial-training loop."""

from .attacks import AttackResult, AttackSpec, epsilon_sweep, pgd, robustness_report
from .blur import (
    BlurLadder,
    adaptive_blur,
    adaptive_blur_vjp,
    blur_edge_map,
    gaussian_blur,
    make_gaussian_kernel,
    select_kernels,
)
from .edges import mean_sobel_response, sobel_response
from .image import (
    area_resize,
    derive_seed,
    horizontal_flip,
    load_ppm,
    make_rng,
    pad_and_random_crop,
    pad_reflect101,
    save_ppm,
)
from .model import (
    LabeledDataset,
    SoftmaxClassifier,
    cross_entropy,
    init_classifier,
    input_gradient,
    logits,
    param_gradient,
    sgd_momentum_step,
    synth_dataset,
)
from .pipeline import EFConfig, EFResult, essential_features, preset
from .quantize import KMeansConfig, apply_palette, kmeans_palette, reconstruction_error
from .training import TrainConfig, evaluate, train

__version__ = "0.1.0"
