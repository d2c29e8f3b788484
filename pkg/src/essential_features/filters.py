"""Separable 1-D correlation under reflect-101 borders, and its exact transpose.

The forward pass gathers a reflect-101 padded copy of the axis and takes a
weighted sum of shifted slices. The transpose scatters the weighted upstream
values into the padded buffer and folds the padding back onto the mirrored
source positions, so ``<correlate1d(x), u> == <x, correlate1d_adjoint(u)>``.
Summation order is fixed, so results are bit-reproducible.
"""

import numpy as np

from .image import reflect101_index

__all__ = ["correlate1d", "correlate1d_adjoint"]


def correlate1d(x, weights, axis):
    weights = np.asarray(weights, dtype=np.float64)
    r = len(weights) // 2
    n = x.shape[axis]
    xp = np.take(x, reflect101_index(n, -r, n + r), axis=axis)
    xp = np.moveaxis(xp, axis, 0)
    out = weights[0] * xp[0:n]
    for j in range(1, len(weights)):
        out = out + weights[j] * xp[j : j + n]
    return np.moveaxis(out, 0, axis)


def correlate1d_adjoint(u, weights, axis):
    weights = np.asarray(weights, dtype=np.float64)
    r = len(weights) // 2
    n = u.shape[axis]
    um = np.moveaxis(u, axis, 0)
    gp = np.zeros((n + 2 * r,) + um.shape[1:])
    for j in range(len(weights)):
        gp[j : j + n] += weights[j] * um
    if r == 0:
        return np.moveaxis(gp, 0, axis)
    g = gp[r : r + n].copy()
    np.add.at(g, reflect101_index(n, -r, 0), gp[:r])
    np.add.at(g, reflect101_index(n, n, n + r), gp[n + r :])
    return np.moveaxis(g, 0, axis)
