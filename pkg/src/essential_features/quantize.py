"""k-means color reduction with the palette fitted on an area-downsized thumbnail.

A palette is a ``(k, 3)`` float64 array of RGB centers in ``[0, 1]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .image import area_resize

__all__ = [
    "KMeansConfig",
    "thumbnail",
    "nearest_center",
    "kmeans_palette",
    "apply_palette",
    "reconstruction_error",
    "save_palette_csv",
    "load_palette_csv",
]


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    iterations: int = 20
    thumb_side: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.thumb_side < 1:
            raise ValueError("thumb_side must be positive")


def _require_rgb(image):
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("color reduction needs a 3-channel image")


def thumbnail(image, side):
    """Area-downsized ``side x side`` copy; axes shorter than ``side`` are kept."""
    h, w = image.shape[:2]
    return area_resize(image, min(side, h), min(side, w))


def _sq_distances(pixels, centers):
    """Exact per-pair squared distances (used where exactness matters)."""
    total = None
    for c in range(pixels.shape[1]):
        diff = np.subtract.outer(pixels[:, c], centers[:, c])
        diff *= diff
        total = diff if total is None else total + diff
    return total


def nearest_center(pixels, centers, exact=True):
    """Index of the closest center per pixel and its squared distance.

    Ties go to the lowest index. With ``exact=False`` candidates are ranked by
    the expanded form ``|c|^2 - 2 x.c``, which is much faster but may order
    centers closer than ~1e-8 differently; the returned distance is always
    computed exactly for the chosen center.
    """
    if exact:
        score = _sq_distances(pixels, centers)
    else:
        score = np.einsum("kc,kc->k", centers, centers) - 2.0 * (pixels @ centers.T)
    idx = np.argmin(score, axis=1)
    diff = pixels - centers[idx]
    return idx, np.einsum("nc,nc->n", diff, diff)


def _lloyd(pixels, centers, iterations):
    """Run Lloyd steps; returns final centers and the objective trace.

    ``trace[0]`` is the mean squared distance under the initial centers and
    ``trace[t]`` the same quantity after ``t`` center updates.
    """
    k = len(centers)
    labels, dist = nearest_center(pixels, centers, exact=False)
    trace = [float(dist.mean())]
    for _ in range(iterations):
        counts = np.bincount(labels, minlength=k)
        sums = np.stack(
            [np.bincount(labels, weights=pixels[:, c], minlength=k) for c in range(3)], axis=1
        )
        filled = counts > 0
        centers = centers.copy()
        centers[filled] = sums[filled] / counts[filled, None]
        labels, dist = nearest_center(pixels, centers, exact=False)
        trace.append(float(dist.mean()))
    return centers, trace


def kmeans_palette(image, cfg, rng, return_trace=False):
    """Fit ``cfg.k`` colors to the thumbnail of ``image``.

    Centers start at ``k`` distinct thumbnail pixels drawn uniformly with
    ``rng`` and go through exactly ``cfg.iterations`` Lloyd steps; empty
    clusters keep their previous center.
    """
    _require_rgb(image)
    pixels = thumbnail(image, cfg.thumb_side).reshape(-1, 3)
    if cfg.k > len(pixels):
        raise ValueError(f"k={cfg.k} exceeds the {len(pixels)} thumbnail pixels")
    init = rng.choice(len(pixels), size=cfg.k, replace=False)
    centers, trace = _lloyd(pixels, pixels[init].copy(), cfg.iterations)
    if return_trace:
        return centers, trace
    return centers


def apply_palette(image, palette):
    _require_rgb(image)
    h, w, _ = image.shape
    idx, _ = nearest_center(image.reshape(-1, 3), palette)
    return palette[idx].reshape(h, w, 3)


def reconstruction_error(image, palette):
    """Mean over pixels of the squared RGB distance to the nearest center."""
    _require_rgb(image)
    _, dist = nearest_center(image.reshape(-1, 3), palette)
    return float(dist.mean())


def save_palette_csv(palette, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["r", "g", "b"])
        for row in palette:
            writer.writerow([format(float(v), ".17g") for v in row])


def load_palette_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64).reshape(-1, 3)
