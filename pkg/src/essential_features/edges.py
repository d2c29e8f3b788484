"""Normalized Sobel gradient-magnitude response, per channel."""

import numpy as np

from .filters import correlate1d, correlate1d_adjoint

__all__ = ["SOBEL_NORM", "sobel_xy", "sobel_response", "mean_sobel_response", "mean_sobel_gradient"]

# Largest attainable magnitude on [0, 1] inputs: |gx|, |gy| <= 4 each.
SOBEL_NORM = 4.0 * np.sqrt(2.0)

_SMOOTH = (1.0, 2.0, 1.0)
_DIFF = (-1.0, 0.0, 1.0)


def sobel_xy(image):
    """Cross-correlate every channel with the 3x3 Sobel x and y kernels."""
    gx = correlate1d(correlate1d(image, _SMOOTH, axis=0), _DIFF, axis=1)
    gy = correlate1d(correlate1d(image, _DIFF, axis=0), _SMOOTH, axis=1)
    return gx, gy


def sobel_response(image):
    """Edge map in [0, 1]: ``sqrt(gx**2 + gy**2) / (4 * sqrt(2))``.

    Equivalent to dividing by 1442.5 (= 1020 * sqrt(2)) on a [0, 255] image.
    """
    gx, gy = sobel_xy(image)
    return np.sqrt(gx * gx + gy * gy) / SOBEL_NORM


def mean_sobel_response(image):
    return float(np.mean(sobel_response(image)))


def mean_sobel_gradient(image):
    """Gradient of :func:`mean_sobel_response` with respect to the image.

    The magnitude's derivative is taken as zero where the magnitude vanishes.
    """
    gx, gy = sobel_xy(image)
    mag = np.sqrt(gx * gx + gy * gy)
    scale = np.zeros_like(mag)
    nz = mag > 0
    scale[nz] = 1.0 / (mag[nz] * SOBEL_NORM * mag.size)
    ux, uy = gx * scale, gy * scale
    grad = correlate1d_adjoint(correlate1d_adjoint(ux, _DIFF, axis=1), _SMOOTH, axis=0)
    grad += correlate1d_adjoint(correlate1d_adjoint(uy, _SMOOTH, axis=1), _DIFF, axis=0)
    return grad
