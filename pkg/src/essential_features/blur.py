"""Gaussian kernels, fixed and adaptive blurring, and the adaptive-blur VJP.

A *selection map* is an integer array shaped like the image holding, for each
pixel and channel, the kernel size picked from a :class:`BlurLadder`. With the
selection frozen, :func:`adaptive_blur` is linear in the image and
:func:`adaptive_blur_vjp` is its exact transpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .filters import correlate1d, correlate1d_adjoint

__all__ = [
    "BlurLadder",
    "make_gaussian_kernel",
    "gaussian_blur",
    "gaussian_blur_adjoint",
    "blur_edge_map",
    "select_kernels",
    "adaptive_blur",
    "adaptive_blur_vjp",
]


@dataclass(frozen=True)
class BlurLadder:
    """Allowed kernel sizes (ascending) and the edge cutoffs between them."""

    sizes: tuple
    thresholds: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        thresholds = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "thresholds", thresholds)
        if not sizes:
            raise ValueError("ladder needs at least one kernel size")
        for s in sizes:
            _check_size(s)
        if any(a >= b for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"kernel sizes must be strictly increasing: {sizes}")
        if len(thresholds) != len(sizes) - 1:
            raise ValueError("need exactly len(sizes) - 1 thresholds")
        if any(a >= b for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"thresholds must be strictly increasing: {thresholds}")
        if any(not 0.0 <= t <= 1.0 for t in thresholds):
            raise ValueError("thresholds must lie in [0, 1]")


def _check_size(size):
    if int(size) != size or size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be an odd positive integer, got {size}")


@lru_cache(maxsize=None)
def _kernel(size):
    if size == 1:
        return (1.0,)
    sigma = 0.3 * ((size - 1) * 0.5 - 1) + 0.8
    x = np.arange(size) - (size - 1) / 2
    w = np.exp(-(x * x) / (2 * sigma * sigma))
    w /= w.sum()
    # enforce exact symmetry after normalization
    w = 0.5 * (w + w[::-1])
    return tuple(w)


def make_gaussian_kernel(size):
    """Sampled, normalized 1-D Gaussian with the size-derived default sigma.

    ``sigma = 0.3 * ((size - 1) * 0.5 - 1) + 0.8``; size 1 is the identity.
    """
    _check_size(size)
    return np.array(_kernel(int(size)))


def gaussian_blur(image, size):
    """Separable Gaussian blur (rows then columns), reflect-101 borders."""
    _check_size(size)
    if size == 1:
        return image.copy()
    w = _kernel(int(size))
    return correlate1d(correlate1d(image, w, axis=1), w, axis=0)


def gaussian_blur_adjoint(grad, size):
    _check_size(size)
    if size == 1:
        return grad.copy()
    w = _kernel(int(size))
    return correlate1d_adjoint(correlate1d_adjoint(grad, w, axis=0), w, axis=1)


def blur_edge_map(edges):
    return gaussian_blur(edges, 3)


def select_kernels(blurred_edges, ladder, invert=False, pooled=False):
    """Pick a kernel size per pixel and channel from the edge response.

    Starting at the largest kernel, each threshold strictly exceeded steps one
    size down the ladder. ``invert`` walks the ladder the other way (strong
    edges get large kernels); ``pooled`` selects from the per-pixel channel
    maximum instead of each channel's own response.
    """
    response = np.asarray(blurred_edges)
    if response.ndim != 3:
        raise ValueError("edge map must be (H, W, C)")
    if pooled:
        response = np.broadcast_to(response.max(axis=2, keepdims=True), response.shape)
    steps = np.zeros(response.shape, dtype=np.intp)
    for t in ladder.thresholds:
        steps += response > t
    sizes = np.array(ladder.sizes)
    if invert:
        return sizes[steps]
    return sizes[len(sizes) - 1 - steps]


def _check_selection(shape, selection, ladder):
    if selection.shape != shape:
        raise ValueError(f"selection shape {selection.shape} does not match {shape}")
    if not np.all(np.isin(selection, ladder.sizes)):
        raise ValueError("selection contains sizes outside the ladder")


def adaptive_blur(image, selection, ladder):
    """Per pixel and channel, take the value of the blur chosen by ``selection``."""
    _check_selection(image.shape, selection, ladder)
    out = np.zeros_like(image)
    for s in ladder.sizes:
        mask = selection == s
        if mask.any():
            out = np.where(mask, gaussian_blur(image, s), out)
    return out


def adaptive_blur_vjp(upstream, selection, ladder):
    """Transpose of :func:`adaptive_blur` with the selection held fixed.

    Sums, over kernel sizes, the blur adjoint of the upstream gradient masked
    to the pixels that selected that size.
    """
    _check_selection(upstream.shape, selection, ladder)
    grad = None
    for s in ladder.sizes:
        mask = selection == s
        if not mask.any():
            continue
        g = gaussian_blur_adjoint(np.where(mask, upstream, 0.0), s)
        grad = g if grad is None else grad + g
    return np.zeros_like(upstream) if grad is None else grad
