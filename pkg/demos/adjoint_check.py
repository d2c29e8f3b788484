"""Why the BPDA+AG gradient can be trusted.

With the kernel choice frozen, the adaptive blur is a linear map A. The
attack needs A^T u, which adaptive_blur_vjp computes without ever forming A.
Here A is built column by column on a tiny image so both sides can be compared
directly, then the cheaper dot-product test is run on a larger one.

    python3 demos/adjoint_check.py
"""

import numpy as np

from essential_features import adaptive_blur, adaptive_blur_vjp, blur_edge_map, make_rng, preset, sobel_response
from essential_features.blur import select_kernels

rng = make_rng(0)
ladder = preset("resisc45").ladder

shape = (7, 6, 3)
x = rng.uniform(size=shape)
sel = select_kernels(blur_edge_map(sobel_response(x)), ladder)
n = x.size

A = np.empty((n, n))
for j in range(n):
    e = np.zeros(n)
    e[j] = 1.0
    A[:, j] = adaptive_blur(e.reshape(shape), sel, ladder).ravel()

u = rng.standard_normal(shape)
explicit = A.T @ u.ravel()
fast = adaptive_blur_vjp(u, sel, ladder).ravel()
print(f"explicit transpose vs vjp: max diff {np.abs(explicit - fast).max():.2e}")

# Rows sum to one (every output is a weighted average); columns do not, because
# reflected borders and mixed kernel sizes give some inputs extra weight.
print(f"row sums in [{A.sum(1).min():.12f}, {A.sum(1).max():.12f}]")
print(f"column sums in [{A.sum(0).min():.3f}, {A.sum(0).max():.3f}]")

# Dot-product test at attack scale.
x = rng.uniform(size=(64, 64, 3))
sel = rng.choice(np.array(ladder.sizes), size=x.shape)
u = rng.standard_normal(x.shape)
lhs = np.vdot(adaptive_blur(x, sel, ladder), u)
rhs = np.vdot(x, adaptive_blur_vjp(u, sel, ladder))
print(f"<Ax, u> = {lhs:.12f}\n<x, A^T u> = {rhs:.12f}\ndifference {abs(lhs - rhs):.1e}")
