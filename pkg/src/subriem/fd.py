"""Finite-difference stencils (Fornberg's recursion) and central derivatives."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _weights(k: int, offsets: tuple) -> tuple:
    x = np.asarray(offsets, dtype=float)
    N = len(x)
    c = np.zeros((N, k + 1))
    c1, c4 = 1.0, x[0]
    c[0, 0] = 1.0
    for i in range(1, N):
        mn = min(i, k)
        c2, c5, c4 = 1.0, c4, x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for s in range(mn, 0, -1):
                    c[i, s] = c1 * (s * c[i - 1, s - 1] - c5 * c[i - 1, s]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for s in range(mn, 0, -1):
                c[j, s] = (c4 * c[j, s] - s * c[j, s - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return tuple(c[:, k])


def fd_weights(k: int, offsets) -> np.ndarray:
    """Weights w with ``f^(k)(0) ~ sum_j w_j f(offsets_j)`` for unit spacing."""
    return np.array(_weights(int(k), tuple(float(o) for o in offsets)))


def central_offsets(k: int, half: int | None = None) -> np.ndarray:
    """Symmetric integer stencil for the k-th derivative, second order or better."""
    if half is None:
        half = k // 2 + 1 if k > 0 else 0
    return np.arange(-half, half + 1)


def central_derivative(f, t0, k: int, h: float, half: int | None = None):
    """k-th derivative of a vectorised scalar function at t0."""
    if k == 0:
        return float(f(np.array([t0]))[0])
    off = central_offsets(k, half)
    w = fd_weights(k, off)
    vals = f(t0 + h * off)
    return float(w @ vals) / h ** k
