"""Fixed-step classical RK4 loops used by the reference oracles.

Each kernel takes the vector fields as arguments. With numba dispatchers for
``f`` and ``g`` the compiled version is used; ``kernel.py_func`` runs the same
loop on arbitrary Python callables.
"""

import numpy as np
from numba import njit


@njit
def rk4_full(f, g, lam, eps, x, y, h, nsteps):
    for _ in range(nsteps):
        k1x = (-lam * x + f(y)) / eps
        k1y = g(x, y)
        x2 = x + 0.5 * h * k1x
        y2 = y + 0.5 * h * k1y
        k2x = (-lam * x2 + f(y2)) / eps
        k2y = g(x2, y2)
        x3 = x + 0.5 * h * k2x
        y3 = y + 0.5 * h * k2y
        k3x = (-lam * x3 + f(y3)) / eps
        k3y = g(x3, y3)
        x4 = x + h * k3x
        y4 = y + h * k3y
        k4x = (-lam * x4 + f(y4)) / eps
        k4y = g(x4, y4)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return x, y


@njit
def rk4_reduced(f, g, lam, Y, h, nsteps):
    for _ in range(nsteps):
        k1 = g(f(Y) / lam, Y)
        Y2 = Y + 0.5 * h * k1
        k2 = g(f(Y2) / lam, Y2)
        Y3 = Y + 0.5 * h * k2
        k3 = g(f(Y3) / lam, Y3)
        Y4 = Y + h * k3
        k4 = g(f(Y4) / lam, Y4)
        Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Y


def py_rk4_full(f, g, lam, eps, x, y, h, nsteps):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return rk4_full.py_func(
        lambda v: np.asarray(f(v), dtype=float),
        lambda u, v: np.asarray(g(u, v), dtype=float),
        lam, eps, x, y, h, nsteps,
    )


def py_rk4_reduced(f, g, lam, Y, h, nsteps):
    return rk4_reduced.py_func(
        lambda v: np.asarray(f(v), dtype=float),
        lambda u, v: np.asarray(g(u, v), dtype=float),
        lam, np.asarray(Y, dtype=float), h, nsteps,
    )
