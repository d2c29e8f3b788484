"""The full transform: Sobel -> threshold -> adaptive blur -> k-means colors."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .blur import BlurLadder, adaptive_blur, blur_edge_map, select_kernels
from .edges import sobel_response
from .image import make_rng
from .quantize import KMeansConfig, apply_palette, kmeans_palette

__all__ = ["EFConfig", "EFResult", "PRESETS", "preset", "essential_features"]


@dataclass(frozen=True)
class EFConfig:
    ladder: BlurLadder
    kmeans: KMeansConfig
    emit_intermediates: bool = True
    invert_ladder: bool = False
    pooled_selection: bool = False

    def with_seed(self, seed):
        return replace(self, kmeans=replace(self.kmeans, seed=int(seed)))


@dataclass
class EFResult:
    output: np.ndarray
    selection: Optional[np.ndarray] = None
    palette: Optional[np.ndarray] = None
    edge_map: Optional[np.ndarray] = None
    blurred: Optional[np.ndarray] = field(default=None, repr=False)


PRESETS = {
    "cifar10": dict(sizes=(1, 3, 5), thresholds=(15, 55), k=32),
    "resisc45": dict(sizes=(3, 7, 13), thresholds=(25, 55), k=16),
}


def preset(name, seed=0):
    """Transform settings used for the two benchmark datasets.

    Thresholds are listed on the 0-255 scale and converted here.
    """
    try:
        p = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    ladder = BlurLadder(p["sizes"], tuple(t / 255 for t in p["thresholds"]))
    return EFConfig(ladder=ladder, kmeans=KMeansConfig(k=p["k"], iterations=20, thumb_side=32, seed=seed))


def essential_features(image, cfg, rng=None):
    """Apply the transform to an RGB image.

    ``rng`` drives the k-means initialization; when omitted a generator seeded
    from ``cfg.kmeans.seed`` is used. The palette is fitted to the adaptively
    blurred image (clipped to [0, 1]), not to the raw input.
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("essential_features needs an (H, W, 3) image")
    if rng is None:
        rng = make_rng(cfg.kmeans.seed)
    edges = sobel_response(image)
    selection = select_kernels(
        blur_edge_map(edges), cfg.ladder, invert=cfg.invert_ladder, pooled=cfg.pooled_selection
    )
    blurred = np.clip(adaptive_blur(image, selection, cfg.ladder), 0.0, 1.0)
    palette = kmeans_palette(blurred, cfg.kmeans, rng)
    output = apply_palette(blurred, palette)
    if not cfg.emit_intermediates:
        return EFResult(output=output)
    return EFResult(output=output, selection=selection, palette=palette, edge_map=edges, blurred=blurred)
